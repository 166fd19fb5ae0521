"""Compiled depthwise 1-D convolution kernels.

Arrays are viewed as ``(A, L, M, C)`` with the convolution running along ``L``
and one filter per channel ``C``.  Zero padding, same-size output.
"""

import numba
import numpy as np


@numba.njit(cache=True, fastmath=False)
def dw_forward(x, w):
    A, L, M, C = x.shape
    K = w.shape[0]
    p = K // 2
    out = np.zeros_like(x)
    for a in range(A):
        for l in range(L):
            for k in range(K):
                g = l + k - p
                if g < 0 or g >= L:
                    continue
                for m in range(M):
                    for c in range(C):
                        out[a, l, m, c] += w[k, c] * x[a, g, m, c]
    return out


@numba.njit(cache=True, fastmath=False)
def dw_grad_input(gout, w):
    A, L, M, C = gout.shape
    K = w.shape[0]
    p = K // 2
    gx = np.zeros_like(gout)
    for a in range(A):
        for g in range(L):
            for k in range(K):
                l = g - k + p
                if l < 0 or l >= L:
                    continue
                for m in range(M):
                    for c in range(C):
                        gx[a, g, m, c] += w[k, c] * gout[a, l, m, c]
    return gx


@numba.njit(cache=True, fastmath=False)
def dw_grad_weight(gout, x, K):
    A, L, M, C = x.shape
    p = K // 2
    gw = np.zeros((K, C), dtype=x.dtype)
    for a in range(A):
        for l in range(L):
            for k in range(K):
                g = l + k - p
                if g < 0 or g >= L:
                    continue
                for m in range(M):
                    for c in range(C):
                        gw[k, c] += gout[a, l, m, c] * x[a, g, m, c]
    return gw


def as_alm(x: np.ndarray, axis: int) -> np.ndarray:
    """View ``x`` (channels last) as ``(A, L, M, C)`` convolving along ``axis``."""
    axis = axis % x.ndim
    if axis == x.ndim - 1:
        raise ValueError("cannot convolve along the channel axis")
    a = int(np.prod(x.shape[:axis], dtype=np.int64))
    m = int(np.prod(x.shape[axis + 1:-1], dtype=np.int64))
    return np.ascontiguousarray(x).reshape(a, x.shape[axis], m, x.shape[-1])
