"""Differentiable layer primitives on channels-last tensors ``(..., F, S, C)``."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Literal, Optional

import numpy as np

from . import _kernels
from .engine import Tensor, as_tensor, make_node

FREQ_AXIS = -3
TIME_AXIS = -2

KernelTag = Literal["depthwise_1xK", "depthwise_Kx1", "pointwise_1x1"]


def axis_index(axis) -> int:
    if axis in ("frequency", "freq", "f"):
        return FREQ_AXIS
    if axis in ("time", "t", "s"):
        return TIME_AXIS
    if isinstance(axis, (int, np.integer)):
        return int(axis)
    raise ValueError(f"unknown axis {axis!r}")


@dataclass
class LayerParams:
    """Weights of one convolution.

    ``depthwise_Kx1`` filters run along frequency, ``depthwise_1xK`` along time;
    depthwise kernels are stored as ``(K, C)``, pointwise as ``(C_in, C_out)``.
    """

    kernel: Tensor
    bias: Optional[Tensor] = None
    kernel_shape_tag: KernelTag = "pointwise_1x1"

    def __post_init__(self):
        if self.kernel_shape_tag not in ("depthwise_1xK", "depthwise_Kx1", "pointwise_1x1"):
            raise ValueError(f"unknown kernel tag {self.kernel_shape_tag!r}")
        if self.kernel.ndim != 2:
            raise ValueError("kernels are 2-D: (K, C) or (C_in, C_out)")

    @property
    def axis(self) -> int | None:
        return {"depthwise_Kx1": FREQ_AXIS, "depthwise_1xK": TIME_AXIS}.get(self.kernel_shape_tag)

    def tensors(self) -> list[Tensor]:
        return [self.kernel] + ([self.bias] if self.bias is not None else [])


def depthwise_conv(x: Tensor, params: LayerParams, axis=None) -> Tensor:
    """Per-channel 1-D convolution (correlation form) along frequency or time.

    Zero padding keeps the output the same size as the input.
    """
    if axis is None:
        axis = params.axis
        if axis is None:
            raise ValueError("pointwise params passed to depthwise_conv")
    else:
        axis = axis_index(axis)
        if params.axis is not None and params.axis != axis:
            raise ValueError(f"kernel tag {params.kernel_shape_tag} does not match axis {axis}")
    w = params.kernel
    k, c = w.shape
    if k % 2 == 0:
        raise ValueError(f"depthwise kernel length must be odd, got {k}")
    if x.shape[-1] != c:
        raise ValueError(f"channel mismatch: input has {x.shape[-1]}, kernel has {c}")
    xv = _kernels.as_alm(x.data, axis)
    wd = np.ascontiguousarray(w.data, dtype=xv.dtype)
    out = _kernels.dw_forward(xv, wd).reshape(x.shape)
    parents = [x, w]
    if params.bias is not None:
        out = out + params.bias.data
        parents.append(params.bias)

    def bw(g):
        gv = _kernels.as_alm(g.astype(xv.dtype, copy=False), axis)
        gx = _kernels.dw_grad_input(gv, wd).reshape(x.shape) if x.requires_grad else None
        gw = _kernels.dw_grad_weight(gv, xv, k) if w.requires_grad else None
        grads = [gx, gw]
        if params.bias is not None:
            grads.append(g.reshape(-1, c).sum(axis=0))
        return tuple(grads)

    return make_node(out, parents, bw)


def pointwise_conv(x: Tensor, params: LayerParams) -> Tensor:
    """1x1 convolution: the same affine map applied at every resource element."""
    w = params.kernel
    if params.kernel_shape_tag != "pointwise_1x1":
        raise ValueError("depthwise params passed to pointwise_conv")
    c_in, c_out = w.shape
    if x.shape[-1] != c_in:
        raise ValueError(f"pointwise input has {x.shape[-1]} channels, kernel expects {c_in}")
    x2 = x.data.reshape(-1, c_in)
    out = x2 @ w.data
    parents = [x, w]
    if params.bias is not None:
        out = out + params.bias.data
        parents.append(params.bias)
    out = out.reshape(x.shape[:-1] + (c_out,))

    def bw(g):
        g2 = g.reshape(-1, c_out)
        grads = [
            (g2 @ w.data.T).reshape(x.shape) if x.requires_grad else None,
            x2.T @ g2 if w.requires_grad else None,
        ]
        if params.bias is not None:
            grads.append(g2.sum(axis=0))
        return tuple(grads)

    return make_node(out, parents, bw)


def nearest_resample(x: Tensor, factor: int, direction: Literal["down", "up"], axis, length: int | None = None) -> Tensor:
    """Nearest-neighbour subsampling along one axis.

    ``down`` keeps samples ``0, N, 2N, ...`` (a right edge replicated up to the next
    multiple of ``N`` never contributes, so the output length is ``ceil(L / N)``).
    ``up`` repeats each sample ``N`` times and truncates to ``length`` when given.
    """
    factor = int(factor)
    if factor <= 0:
        raise ValueError(f"resampling factor must be >= 1, got {factor}")
    x = as_tensor(x)
    ax = axis_index(axis) % x.ndim
    if factor == 1:
        return x
    n = x.shape[ax]
    if direction == "down":
        idx = [slice(None)] * x.ndim
        idx[ax] = slice(None, None, factor)
        idx = tuple(idx)

        def bw_down(g):
            full = np.zeros(x.shape, dtype=g.dtype)
            full[idx] = g
            return (full,)

        return make_node(x.data[idx], (x,), bw_down)
    if direction == "up":
        out_len = n * factor if length is None else int(length)
        if not (n - 1) * factor < out_len <= n * factor:
            raise ValueError(f"cannot upsample length {n} by {factor} to {out_len}")
        rep = np.repeat(x.data, factor, axis=ax)
        out = np.take(rep, np.arange(out_len), axis=ax)

        def bw_up(g):
            pad = n * factor - out_len
            if pad:
                widths = [(0, 0)] * g.ndim
                widths[ax] = (0, pad)
                g = np.pad(g, widths)
            shape = g.shape[:ax] + (n, factor) + g.shape[ax + 1:]
            return (g.reshape(shape).sum(axis=ax + 1),)

        return make_node(out, (x,), bw_up)
    raise ValueError(f"direction must be 'down' or 'up', got {direction!r}")


def he_uniform(rng: np.random.Generator, shape: tuple[int, ...], fan_in: int, dtype=np.float64) -> np.ndarray:
    limit = np.sqrt(6.0 / max(fan_in, 1))
    return rng.uniform(-limit, limit, size=shape).astype(dtype)
