"""Backend selection for the conv/pool hot-path kernels.

The env var AVAFFECT_BACKEND picks the implementation:

  auto   (default) numba when importable, else pure numpy
  numba  require the jitted kernels, fail if numba is missing
  numpy  force the pure-numpy fallback

Both backends implement identical semantics; `benchmarks/bench_kernels.py`
compares their speed side by side.
"""

from __future__ import annotations

import os

from . import numpy_ops

_choice = os.environ.get("AVAFFECT_BACKEND", "auto").strip().lower()

if _choice == "numpy":
    _impl = numpy_ops
elif _choice in ("auto", "numba"):
    try:
        from . import numba_ops as _impl  # noqa: F401
    except ImportError:
        if _choice == "numba":
            raise ImportError(
                "AVAFFECT_BACKEND=numba but numba is not installed"
            ) from None
        _impl = numpy_ops
else:
    raise ValueError(
        f"AVAFFECT_BACKEND must be auto|numba|numpy, got {_choice!r}"
    )

BACKEND = _impl.NAME

conv2d_forward = _impl.conv2d_forward
conv2d_kernel_grad = _impl.conv2d_kernel_grad
conv2d_input_grad = _impl.conv2d_input_grad
maxpool2d_forward = _impl.maxpool2d_forward
maxpool2d_backward = _impl.maxpool2d_backward
