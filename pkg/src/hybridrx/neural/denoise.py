"""Learned pilot-domain smoothing applied to each RX/TX antenna pair."""

from __future__ import annotations

import numpy as np

from ..tensor import Tensor, as_tensor, cast, complex_from, concat, getitem, imag, parameter, real, reshape, stack
from ..tensor import LayerParams, pointwise_conv
from .blocks import Module, ResBlock
from .config import DenoiseConfig


class TimeMixer(Module):
    """Residual pointwise mix of the first ``C_s`` channels across pilot symbols.

    Features ``(..., F_P, S_P, C)``: channels ``[:C_s]`` of all ``S_P`` symbols are
    stacked into one ``S_P * C_s`` vector per subcarrier, mapped by a matrix shared
    over frequency, unstacked and added back.  The weight is sized for two pilot
    symbols; a single pilot symbol uses its top-left ``C_s x C_s`` block.
    """

    MAX_PILOT_SYMBOLS = 2

    def __init__(self, channels: int, c_s: int, dtype):
        self.c_s = min(c_s, channels)
        n = self.MAX_PILOT_SYMBOLS * self.c_s
        self.weight = parameter(np.zeros((n, n), dtype))

    def __call__(self, x: Tensor) -> Tensor:
        *lead, f_p, s_p, c = x.shape
        cs = self.c_s
        if s_p not in (1, 2):
            raise ValueError(f"time mixer supports 1 or 2 pilot symbols, got {s_p}")
        head = getitem(x, (Ellipsis, slice(0, cs)))
        stacked = reshape(head, tuple(lead) + (f_p, 1, s_p * cs))
        w = self.weight if s_p == self.MAX_PILOT_SYMBOLS else getitem(self.weight, (slice(0, s_p * cs), slice(0, s_p * cs)))
        mixed = pointwise_conv(stacked, LayerParams(w, None, "pointwise_1x1"))
        head = head + reshape(mixed, tuple(lead) + (f_p, s_p, cs))
        if cs == c:
            return head
        return concat([head, getitem(x, (Ellipsis, slice(cs, None)))], axis=-1)


class DenoiseNet(Module):
    def __init__(self, cfg: DenoiseConfig, rng: np.random.Generator, dtype=np.float32, zero_final: bool = True):
        self.cfg = cfg
        self.dtype = np.dtype(dtype)
        c_in = 2
        self.blocks, self.mixers = [], []
        for c_out, n in zip(cfg.filters, cfg.subsample):
            block = ResBlock(rng, c_in, c_out, "denoise", factor=n, kernel=cfg.kernel, dtype=dtype, zero_final=zero_final)
            if block.skip is not None and zero_final:
                # identity-start: the whole stack passes Re/Im through at init
                block.skip.kernel.data[...] = np.eye(c_in, c_out, dtype=dtype)
            self.blocks.append(block)
            self.mixers.append(TimeMixer(c_out, cfg.mixer_channels, dtype))
            c_in = c_out

    def __call__(self, x: Tensor, activations: list | None = None) -> Tensor:
        for block, mixer in zip(self.blocks, self.mixers):
            x = mixer(block(x))
            if activations is not None:
                activations.append(x)
        return x


def denoise_forward(raw_pilot_grid, net: DenoiseNet, activations: list | None = None) -> Tensor:
    """Denoise complex pilot grids ``(..., F_P, S_P)``; returns a complex tensor of the same shape."""
    z = as_tensor(raw_pilot_grid)
    if z.ndim < 2:
        raise ValueError("pilot grid must be at least 2-D (F_P, S_P)")
    s_p = z.shape[-1]
    if s_p not in (1, 2):
        raise ValueError(f"DenoiseNN supports 1 or 2 DMRS symbols, got S_P={s_p}")
    if not z.is_complex:
        z = complex_from(z, Tensor(np.zeros(z.shape)))
    x = cast(stack([real(z), imag(z)], axis=-1), net.dtype)
    out = cast(net(x, activations), np.float64)
    return complex_from(getitem(out, (Ellipsis, 0)), getitem(out, (Ellipsis, 1)))
