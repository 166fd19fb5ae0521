"""Per-layer detector over the two equalized streams, and the per-RE demapper."""

from __future__ import annotations

import numpy as np

from ..tensor import Tensor, as_tensor, broadcast_to, cast, complex_from, concat, getitem, imag, pointwise_conv, real
from .blocks import CoordinateMaps, Module, ResBlock, build_coordinate_maps, init_pointwise
from .config import DemapperConfig, DetectorConfig


class DetectorNet(Module):
    """Input projection followed by sections of subsampled residual blocks.

    A section maps ``X`` to ``X + Z`` where ``Z`` is the sum of the block
    increments, i.e. the blocks are chained on the residual path and the section
    shortcut is that same path.
    """

    def __init__(self, cfg: DetectorConfig, rng: np.random.Generator, dtype=np.float32, zero_final: bool = True):
        self.cfg = cfg
        self.dtype = np.dtype(dtype)
        c = cfg.channels
        self.project = init_pointwise(rng, cfg.input_channels, c, dtype)
        self.sections = [
            [ResBlock(rng, c, c, "detector", factor=n, kernel=cfg.kernel_freq, kernel_time=cfg.kernel_time,
                      dtype=dtype, zero_final=zero_final) for n in cfg.subsample]
            for _ in range(cfg.sections)
        ]

    def __call__(self, x: Tensor, activations: list | None = None):
        x = pointwise_conv(x, self.project)
        symbols = []
        for blocks in self.sections:
            for block in blocks:
                x = block(x)
                if activations is not None:
                    activations.append(x)
            symbols.append(complex_from(cast(getitem(x, (Ellipsis, 0)), np.float64),
                                        cast(getitem(x, (Ellipsis, 1)), np.float64)))
        return x, symbols


class DemapperNet(Module):
    def __init__(self, cfg: DemapperConfig, c_in: int, rng: np.random.Generator, dtype=np.float32,
                 zero_final: bool = True):
        self.cfg = cfg
        self.c_in = c_in
        self.blocks = []
        for c_out in cfg.filters:
            self.blocks.append(ResBlock(rng, c_in, c_out, "dense", dtype=dtype, zero_final=zero_final))
            c_in = c_out

    def __call__(self, x: Tensor, activations: list | None = None) -> Tensor:
        for block in self.blocks:
            x = block(x)
            if activations is not None:
                activations.append(x)
        return x


def detector_input(x_lmmse, x_rzf, maps: CoordinateMaps, dtype=np.float32) -> Tensor:
    """Stack ``[Re, Im]`` of both equalized streams ``(..., N_F, N_S)`` with the coordinate maps."""
    a, b = as_tensor(x_lmmse), as_tensor(x_rzf)
    if a.shape != b.shape:
        raise ValueError(f"equalizer streams differ in shape: {a.shape} vs {b.shape}")
    if a.shape[-2:] != maps.m_f.shape[:2]:
        raise ValueError(f"coordinate maps {maps.m_f.shape[:2]} do not match grid {a.shape[-2:]}")
    shape = a.shape + (1,)
    parts = [real(a), imag(a), real(b), imag(b)]
    parts = [p.reshape(shape) for p in parts]
    coords = [Tensor(np.broadcast_to(m, shape)) for m in (maps.m_f, maps.m_s)]
    return cast(concat(parts + coords, axis=-1), dtype)


def detector_forward(x_lmmse, x_rzf, maps: CoordinateMaps | None, net: DetectorNet, activations: list | None = None):
    """Features ``(..., N_F, N_S, C)`` and the per-section complex symbol estimates."""
    a = as_tensor(x_lmmse)
    if maps is None:
        maps = build_coordinate_maps(*a.shape[-2:])
    return net(detector_input(x_lmmse, x_rzf, maps, net.dtype), activations)


def demapper_forward(features: Tensor, net: DemapperNet, activations: list | None = None) -> Tensor:
    """Per-RE LLRs ``(..., N_F, N_S, B)``; channel ``b`` of the last block is ``LLR_b``."""
    if features.shape[-1] != net.c_in:
        raise ValueError(f"demapper expects {net.c_in} feature channels, got {features.shape[-1]}")
    return net(features, activations)
