"""Analytic FLOPs accounting of the neural blocks.

One multiply-add counts as 2 FLOPs.  Resampling is free; biases and ReLUs are
ignored.  Counts are reported per 192 subcarriers and per MIMO layer unless
``normalize=False``.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

from ..neural.config import ArchConfig

REFERENCE_SUBCARRIERS = 192
FLOPS_PER_MAC = 2


@dataclass(frozen=True)
class FlopsDims:
    n_subcarriers: int = 192
    n_symbols: int = 14
    n_rx: int = 16
    n_layers: int = 4
    n_dmrs: int = 1
    pilot_comb: int = 4

    def __post_init__(self):
        if min(self.n_subcarriers, self.n_symbols, self.n_rx, self.n_layers, self.n_dmrs, self.pilot_comb) < 1:
            raise ValueError("all dimensions must be positive")


@dataclass(frozen=True)
class LayerCost:
    block: str  # denoise | detect | demap
    kind: str  # depthwise | pointwise | mixer | resample
    positions: int  # output positions the layer is evaluated at
    c_in: int
    c_out: int
    kernel: int = 1
    instances: int = 1  # antenna pairs or layers sharing this layer


@dataclass
class FlopsReport:
    denoise: float
    detect: float
    demap: float
    total: float
    normalized: bool
    dims: dict
    macs: dict

    def to_dict(self) -> dict:
        return asdict(self)


def layer_macs(layer: LayerCost) -> int:
    if layer.kind == "depthwise":
        per = layer.kernel * layer.c_in
    elif layer.kind in ("pointwise", "mixer"):
        per = layer.c_in * layer.c_out
    elif layer.kind == "resample":
        per = 0
    else:
        raise ValueError(f"unknown layer type {layer.kind!r}")
    return per * layer.positions * layer.instances


def _sep(block, positions, k, c_in, c_out, instances):
    return [LayerCost(block, "depthwise", positions, c_in, c_in, k, instances),
            LayerCost(block, "pointwise", positions, c_in, c_out, 1, instances)]


def layer_inventory(arch: ArchConfig, dims: FlopsDims) -> list[LayerCost]:
    """Every costed layer of the receiver for all MIMO layers of one slot."""
    out: list[LayerCost] = []
    n_f, n_s, n_t = dims.n_subcarriers, dims.n_symbols, dims.n_layers
    if arch.denoise.enabled:
        dn = arch.denoise
        f_p = n_f // dims.pilot_comb
        s_p = dims.n_dmrs
        pairs = dims.n_rx * n_t
        c_in = 2
        for c_out, n in zip(dn.filters, dn.subsample):
            pos = math.ceil(f_p / n) * s_p
            out += _sep("denoise", pos, dn.kernel, c_in, c_out, pairs)
            out += _sep("denoise", pos, dn.kernel, c_out, c_out, pairs)
            if c_in != c_out:
                out.append(LayerCost("denoise", "pointwise", f_p * s_p, c_in, c_out, 1, pairs))
            if n > 1:
                out.append(LayerCost("denoise", "resample", f_p * s_p, c_out, c_out, 1, pairs))
            cs = min(dn.mixer_channels, c_out) * s_p
            out.append(LayerCost("denoise", "mixer", f_p, cs, cs, 1, pairs))
            c_in = c_out
    dt = arch.detector
    c = dt.channels
    out.append(LayerCost("detect", "pointwise", n_f * n_s, dt.input_channels, c, 1, n_t))
    for _ in range(dt.sections):
        for n in dt.subsample:
            pos = math.ceil(n_f / n) * n_s
            out += _sep("detect", pos, dt.kernel_time, c, c, n_t)
            out += _sep("detect", pos, dt.kernel_freq, c, c, n_t)
            if n > 1:
                out.append(LayerCost("detect", "resample", n_f * n_s, c, c, 1, n_t))
    c_in = c
    for c_out in arch.demapper.filters:
        out.append(LayerCost("demap", "pointwise", n_f * n_s, c_in, c_out, 1, n_t))
        out.append(LayerCost("demap", "pointwise", n_f * n_s, c_out, c_out, 1, n_t))
        if c_in != c_out:
            out.append(LayerCost("demap", "pointwise", n_f * n_s, c_in, c_out, 1, n_t))
        c_in = c_out
    return out


def count_flops(arch: ArchConfig, dims: FlopsDims | None = None, normalize: bool = True,
                layers: list[LayerCost] | None = None) -> FlopsReport:
    """FLOPs per inference of the denoise, detect and demap parts.

    With ``normalize`` the counts are divided by the number of MIMO layers and
    scaled to 192 subcarriers.
    """
    dims = dims or FlopsDims()
    layers = layer_inventory(arch, dims) if layers is None else layers
    macs = {"denoise": 0, "detect": 0, "demap": 0}
    for layer in layers:
        if layer.block not in macs:
            raise ValueError(f"unknown block {layer.block!r}")
        macs[layer.block] += layer_macs(layer)
    scale = 1.0
    if normalize:
        scale = REFERENCE_SUBCARRIERS / (dims.n_subcarriers * dims.n_layers)
    flops = {k: FLOPS_PER_MAC * v * scale for k, v in macs.items()}
    total = flops["denoise"] + flops["detect"] + flops["demap"]
    return FlopsReport(flops["denoise"], flops["detect"], flops["demap"], total, normalize, asdict(dims), macs)
