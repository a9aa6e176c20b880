"""Small shared helpers: atomic file writes, seed derivation, downsampling."""

from __future__ import annotations

import hashlib
import os
from pathlib import Path

import numpy as np

RNG_SCHEME = "avaffect-rng-v1"


def atomic_write_bytes(path: str | Path, data: bytes) -> None:
    """Write `data` to `path` via a temp file + rename so readers never see
    a partial file. The temp file lives in the target directory (same fs)."""
    path = Path(path)
    tmp = path.with_name(f".{path.name}.tmp.{os.getpid()}")
    try:
        with open(tmp, "wb") as fh:
            fh.write(data)
            fh.flush()
            os.fsync(fh.fileno())
        os.replace(tmp, path)
    except BaseException:
        tmp.unlink(missing_ok=True)
        raise


def atomic_write_text(path: str | Path, text: str) -> None:
    atomic_write_bytes(path, text.encode("utf-8"))


def derive_seed(*parts) -> int:
    """Collapse a tuple of identifying parts into a 64-bit seed.

    Stable across runs and platforms (SHA-256 of the rendered parts under a
    versioned scheme tag), so every consumer of randomness can be keyed by
    (root_seed, epoch, utterance_id, purpose) without sharing mutable state.
    """
    text = RNG_SCHEME + "|" + "|".join(str(p) for p in parts)
    digest = hashlib.sha256(text.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little")


def derive_rng(*parts) -> np.random.Generator:
    return np.random.default_rng(derive_seed(*parts))


def downsample_mean(arr: np.ndarray, factor: int) -> np.ndarray:
    """Average-pool the two leading axes by `factor`, cropping any remainder.

    Used by the toy model configs to shrink STFT maps / frames before the
    conv stack; identity when factor == 1.
    """
    if factor < 1:
        raise ValueError(f"downsample factor must be >= 1, got {factor}")
    if factor == 1:
        return arr
    h = (arr.shape[0] // factor) * factor
    w = (arr.shape[1] // factor) * factor
    cropped = arr[:h, :w]
    shaped = cropped.reshape(h // factor, factor, w // factor, factor, *arr.shape[2:])
    return shaped.mean(axis=(1, 3))
