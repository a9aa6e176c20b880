"""Numba-jitted kernels; signatures and semantics match `numpy_ops`.

Loops parallelize over independent output slices only (batch or filter
axis), so results are bitwise reproducible regardless of thread count.
Accumulation happens in float64 and is cast on store.
"""

from __future__ import annotations

import numpy as np
from numba import njit, prange

NAME = "numba"


@njit(cache=True, parallel=True)
def conv2d_forward(x, k, stride, pad):
    b_n, c_n, h, w = x.shape
    f_n, _, kh, kw = k.shape
    ho = (h + 2 * pad - kh) // stride + 1
    wo = (w + 2 * pad - kw) // stride + 1
    y = np.empty((b_n, f_n, ho, wo), dtype=x.dtype)
    for b in prange(b_n):
        for f in range(f_n):
            for i in range(ho):
                hi0 = i * stride - pad
                for j in range(wo):
                    wi0 = j * stride - pad
                    acc = 0.0
                    for c in range(c_n):
                        for u in range(kh):
                            hi = hi0 + u
                            if hi < 0 or hi >= h:
                                continue
                            for v in range(kw):
                                wi = wi0 + v
                                if wi < 0 or wi >= w:
                                    continue
                                acc += x[b, c, hi, wi] * k[f, c, u, v]
                    y[b, f, i, j] = acc
    return y


@njit(cache=True, parallel=True)
def conv2d_kernel_grad(gy, x, stride, pad, kh, kw):
    b_n, f_n, ho, wo = gy.shape
    c_n, h, w = x.shape[1], x.shape[2], x.shape[3]
    dk = np.empty((f_n, c_n, kh, kw), dtype=gy.dtype)
    for f in prange(f_n):
        for c in range(c_n):
            for u in range(kh):
                for v in range(kw):
                    acc = 0.0
                    for b in range(b_n):
                        for i in range(ho):
                            hi = i * stride - pad + u
                            if hi < 0 or hi >= h:
                                continue
                            for j in range(wo):
                                wi = j * stride - pad + v
                                if wi < 0 or wi >= w:
                                    continue
                                acc += gy[b, f, i, j] * x[b, c, hi, wi]
                    dk[f, c, u, v] = acc
    return dk


@njit(cache=True, parallel=True)
def conv2d_input_grad(gy, k, stride, pad, h, w):
    b_n, f_n, ho, wo = gy.shape
    c_n, kh, kw = k.shape[1], k.shape[2], k.shape[3]
    dx = np.zeros((b_n, c_n, h, w), dtype=gy.dtype)
    for b in prange(b_n):
        for f in range(f_n):
            for i in range(ho):
                hi0 = i * stride - pad
                for j in range(wo):
                    wi0 = j * stride - pad
                    g = gy[b, f, i, j]
                    for c in range(c_n):
                        for u in range(kh):
                            hi = hi0 + u
                            if hi < 0 or hi >= h:
                                continue
                            for v in range(kw):
                                wi = wi0 + v
                                if wi < 0 or wi >= w:
                                    continue
                                dx[b, c, hi, wi] += g * k[f, c, u, v]
    return dx


@njit(cache=True, parallel=True)
def maxpool2d_forward(x):
    b_n, c_n, h, w = x.shape
    ho, wo = h // 2, w // 2
    y = np.empty((b_n, c_n, ho, wo), dtype=x.dtype)
    arg = np.empty((b_n, c_n, ho, wo), dtype=np.int64)
    for b in prange(b_n):
        for c in range(c_n):
            for i in range(ho):
                for j in range(wo):
                    bh = 2 * i
                    bw = 2 * j
                    best = x[b, c, bh, bw]
                    for u in range(2):
                        for v in range(2):
                            val = x[b, c, 2 * i + u, 2 * j + v]
                            if val > best:
                                best = val
                                bh = 2 * i + u
                                bw = 2 * j + v
                    y[b, c, i, j] = best
                    arg[b, c, i, j] = bh * w + bw
    return y, arg


@njit(cache=True, parallel=True)
def maxpool2d_backward(gy, arg, h, w):
    b_n, c_n, ho, wo = gy.shape
    dx = np.zeros((b_n, c_n, h, w), dtype=gy.dtype)
    for b in prange(b_n):
        for c in range(c_n):
            for i in range(ho):
                for j in range(wo):
                    a = arg[b, c, i, j]
                    dx[b, c, a // w, a % w] += gy[b, c, i, j]
    return dx
