"""Pure-numpy reference kernels for the conv/pool hot paths.

These are the fallback backend; `numba_ops` provides jitted twins with the
same signatures and semantics. Convolution is cross-correlation over a
zero-padded input (no kernel flip). Max-pooling is fixed 2x2/stride-2 with
floor semantics: a trailing odd row/column is dropped.
"""

from __future__ import annotations

import numpy as np

NAME = "numpy"


def _windows(xp: np.ndarray, kh: int, kw: int, stride: int) -> np.ndarray:
    """Strided view [B,C,HO,WO,kh,kw] of every kernel-sized patch."""
    win = np.lib.stride_tricks.sliding_window_view(xp, (kh, kw), axis=(2, 3))
    return win[:, :, ::stride, ::stride]


def conv2d_forward(x: np.ndarray, k: np.ndarray, stride: int, pad: int) -> np.ndarray:
    b, c, h, w = x.shape
    f, _, kh, kw = k.shape
    xp = np.pad(x, ((0, 0), (0, 0), (pad, pad), (pad, pad)))
    win = _windows(xp, kh, kw, stride)
    ho, wo = win.shape[2], win.shape[3]
    cols = win.transpose(0, 2, 3, 1, 4, 5).reshape(b * ho * wo, c * kh * kw)
    y = cols @ k.reshape(f, -1).T
    return np.ascontiguousarray(y.reshape(b, ho, wo, f).transpose(0, 3, 1, 2))


def conv2d_kernel_grad(
    gy: np.ndarray, x: np.ndarray, stride: int, pad: int, kh: int, kw: int
) -> np.ndarray:
    b, f, ho, wo = gy.shape
    c = x.shape[1]
    xp = np.pad(x, ((0, 0), (0, 0), (pad, pad), (pad, pad)))
    win = _windows(xp, kh, kw, stride)
    cols = win.transpose(0, 2, 3, 1, 4, 5).reshape(b * ho * wo, c * kh * kw)
    g = gy.transpose(0, 2, 3, 1).reshape(b * ho * wo, f)
    return (g.T @ cols).reshape(f, c, kh, kw)


def conv2d_input_grad(
    gy: np.ndarray, k: np.ndarray, stride: int, pad: int, h: int, w: int
) -> np.ndarray:
    b, f, ho, wo = gy.shape
    _, c, kh, kw = k.shape
    g = gy.transpose(0, 2, 3, 1).reshape(b * ho * wo, f)
    dwin = (g @ k.reshape(f, -1)).reshape(b, ho, wo, c, kh, kw)
    dxp = np.zeros((b, c, h + 2 * pad, w + 2 * pad), dtype=gy.dtype)
    for u in range(kh):
        for v in range(kw):
            dxp[:, :, u : u + ho * stride : stride, v : v + wo * stride : stride] += (
                dwin[:, :, :, :, u, v].transpose(0, 3, 1, 2)
            )
    return np.ascontiguousarray(dxp[:, :, pad : pad + h, pad : pad + w])


def maxpool2d_forward(x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Returns (pooled, arg) where arg holds flat h*W+w input positions.

    Argmax takes the first maximum in row-major window order, so gradient
    routing on ties is well defined.
    """
    b, c, h, w = x.shape
    ho, wo = h // 2, w // 2
    xc = x[:, :, : ho * 2, : wo * 2]
    cand = xc.reshape(b, c, ho, 2, wo, 2).transpose(0, 1, 2, 4, 3, 5).reshape(b, c, ho, wo, 4)
    idx = cand.argmax(axis=-1)
    y = np.take_along_axis(cand, idx[..., None], axis=-1)[..., 0]
    hi = 2 * np.arange(ho)[None, None, :, None] + idx // 2
    wi = 2 * np.arange(wo)[None, None, None, :] + idx % 2
    return np.ascontiguousarray(y), (hi * w + wi).astype(np.int64)


def maxpool2d_backward(gy: np.ndarray, arg: np.ndarray, h: int, w: int) -> np.ndarray:
    b, c = gy.shape[:2]
    dx = np.zeros((b, c, h * w), dtype=gy.dtype)
    # windows are disjoint, so positions within one (b,c) plane are unique
    np.put_along_axis(dx, arg.reshape(b, c, -1), gy.reshape(b, c, -1), axis=2)
    return dx.reshape(b, c, h, w)
