"""Shared neural building blocks: coordinate maps, separable convs and residual blocks."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator, Literal, Optional

import numpy as np

from ..tensor import (
    FREQ_AXIS,
    LayerParams,
    Tensor,
    depthwise_conv,
    he_uniform,
    nearest_resample,
    parameter,
    pointwise_conv,
    relu,
)

Plan = Literal["detector", "denoise", "dense"]


@dataclass(frozen=True)
class CoordinateMaps:
    m_f: np.ndarray  # (N_F, N_S, 1)
    m_s: np.ndarray  # (N_F, N_S, 1)


def build_coordinate_maps(n_f: int, n_s: int, dtype=np.float64) -> CoordinateMaps:
    """Index planes scaled to [-1, 1] along frequency and time."""
    if n_f < 2 or n_s < 2:
        raise ValueError(f"coordinate maps need N_F, N_S >= 2, got ({n_f}, {n_s})")
    f = 2.0 * np.arange(n_f) / (n_f - 1) - 1.0
    s = 2.0 * np.arange(n_s) / (n_s - 1) - 1.0
    m_f = np.broadcast_to(f[:, None, None], (n_f, n_s, 1)).astype(dtype)
    m_s = np.broadcast_to(s[None, :, None], (n_f, n_s, 1)).astype(dtype)
    return CoordinateMaps(m_f, m_s)


class Module:
    """Anything holding LayerParams / Tensors / sub-modules as attributes or lists."""

    def named_parameters(self, prefix: str = "") -> Iterator[tuple[str, Tensor]]:
        for key, value in vars(self).items():
            yield from _walk(value, f"{prefix}{key}")

    def parameters(self) -> list[Tensor]:
        return [t for _, t in self.named_parameters()]


def _walk(value, name):
    if isinstance(value, Tensor):
        if value.requires_grad:
            yield name, value
    elif isinstance(value, LayerParams):
        yield f"{name}.kernel", value.kernel
        if value.bias is not None:
            yield f"{name}.bias", value.bias
    elif isinstance(value, Module):
        yield from value.named_parameters(prefix=f"{name}.")
    elif isinstance(value, (list, tuple)):
        for i, v in enumerate(value):
            yield from _walk(v, f"{name}.{i}")


def init_pointwise(rng, c_in, c_out, dtype, zero=False, bias=True) -> LayerParams:
    w = np.zeros((c_in, c_out), dtype) if zero else he_uniform(rng, (c_in, c_out), c_in, dtype)
    b = parameter(np.zeros(c_out, dtype)) if bias else None
    return LayerParams(parameter(w), b, "pointwise_1x1")


def init_depthwise(rng, k, c, axis: Literal["freq", "time"], dtype) -> LayerParams:
    tag = "depthwise_Kx1" if axis == "freq" else "depthwise_1xK"
    return LayerParams(parameter(he_uniform(rng, (k, c), k, dtype)), None, tag)


class SeparableConv(Module):
    """Depthwise 1-D conv followed by a pointwise map with bias."""

    def __init__(self, rng, k, c_in, c_out, axis, dtype, zero_pointwise=False):
        self.dw = init_depthwise(rng, k, c_in, axis, dtype)
        self.pw = init_pointwise(rng, c_in, c_out, dtype, zero=zero_pointwise)

    def __call__(self, x: Tensor) -> Tensor:
        return pointwise_conv(depthwise_conv(x, self.dw), self.pw)


class ResBlock(Module):
    """``A + Up(f(Down(A)))`` with subsampling along frequency.

    ``plan`` selects the inner branch: ``detector`` (time then frequency
    separable convs), ``denoise`` (two frequency convs) or ``dense`` (two
    pointwise maps).  Every branch starts with a ReLU and has a ReLU between its
    two convs.  A pointwise projection replaces the identity skip when the channel
    count changes.
    """

    def __init__(self, rng, c_in: int, c_out: int, plan: Plan, factor: int = 1, kernel: int = 13,
                 kernel_time: Optional[int] = None, dtype=np.float32, zero_final: bool = True):
        if factor < 1:
            raise ValueError("subsampling factor must be >= 1")
        self.plan = plan
        self.factor = int(factor)
        if plan == "detector":
            self.conv1 = SeparableConv(rng, kernel_time or kernel, c_in, c_out, "time", dtype)
            self.conv2 = SeparableConv(rng, kernel, c_out, c_out, "freq", dtype, zero_pointwise=zero_final)
        elif plan == "denoise":
            self.conv1 = SeparableConv(rng, kernel, c_in, c_out, "freq", dtype)
            self.conv2 = SeparableConv(rng, kernel, c_out, c_out, "freq", dtype, zero_pointwise=zero_final)
        elif plan == "dense":
            self.conv1 = init_pointwise(rng, c_in, c_out, dtype)
            self.conv2 = init_pointwise(rng, c_out, c_out, dtype, zero=zero_final)
        else:
            raise ValueError(f"unknown kernel plan {plan!r}")
        self.skip = init_pointwise(rng, c_in, c_out, dtype, bias=False) if c_in != c_out else None

    def branch(self, x: Tensor) -> Tensor:
        if self.plan == "dense":
            return pointwise_conv(relu(pointwise_conv(relu(x), self.conv1)), self.conv2)
        return self.conv2(relu(self.conv1(relu(x))))

    def increment(self, x: Tensor) -> Tensor:
        """``Up(f(Down(x)))`` alone, at full resolution."""
        n = self.factor
        if n == 1:
            return self.branch(x)
        length = x.shape[FREQ_AXIS]
        z = self.branch(nearest_resample(x, n, "down", FREQ_AXIS))
        return nearest_resample(z, n, "up", FREQ_AXIS, length=length)

    def __call__(self, x: Tensor) -> Tensor:
        skip = x if self.skip is None else pointwise_conv(x, self.skip)
        return skip + self.increment(x)
