"""Pilot-based channel estimation: rank-one LS estimates, smoothing and interpolation."""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Literal

import numpy as np

from ..sim.pilots import PilotPattern

Stage = Literal["raw_pilot", "denoised_pilot", "full_grid"]

FIR_LENGTH = 7


@dataclass
class ChannelEstimate:
    """Channel estimate at one stage of the pipeline.

    Pilot stages hold ``(..., F_P, S_P, N_R, N_T)`` per-layer pilot grids, the
    full-grid stage ``(..., N_F, N_S, N_R, N_T)``.
    """

    stage: Stage
    h_hat: np.ndarray
    pattern: PilotPattern


def raw_ls_estimate(y: np.ndarray, pattern: PilotPattern, pilot_values: np.ndarray | None = None) -> ChannelEstimate:
    """Rank-one LS estimates ``y x^H / ||x||^2`` at the pilot REs.

    With one active layer per pilot RE, only that layer's column is nonzero, so the
    estimate reduces to ``y / p`` for layer ``k``; results are gathered into the
    per-layer pilot grids.
    """
    values = pattern.values if pilot_values is None else np.asarray(pilot_values)
    if not np.any(values):
        raise ValueError("pilot pattern has no pilot REs")
    y = np.asarray(y)
    dmrs = list(pattern.dmrs_symbols)
    grids = []
    for k in range(pattern.n_layers):
        sc = pattern.pilot_subcarriers(k)
        x = values[np.ix_(sc, dmrs, [k])][..., 0]  # (F_P, S_P)
        y_p = y[..., sc, :, :][..., dmrs, :]  # (..., F_P, S_P, N_R)
        grids.append(y_p * (np.conj(x) / np.abs(x) ** 2)[..., None])
    return ChannelEstimate("raw_pilot", np.stack(grids, axis=-1), pattern)


def raw_rank_one(y: np.ndarray, pattern: PilotPattern) -> np.ndarray:
    """Full-grid ``(..., N_F, N_S, N_R, N_T)`` view of the raw estimates, zero off pilots."""
    x = pattern.values
    norm = np.sum(np.abs(x) ** 2, axis=-1)
    with np.errstate(divide="ignore", invalid="ignore"):
        scale = np.where(norm > 0, 1.0 / norm, 0.0)
    return np.asarray(y)[..., :, None] * np.conj(x)[:, :, None, :] * scale[:, :, None, None]


@lru_cache(maxsize=None)
def static_fir_taps(length: int = FIR_LENGTH) -> np.ndarray:
    """Raised-cosine low-pass taps with unit DC gain."""
    half = length // 2
    n = np.arange(-half, half + 1)
    taps = 0.5 * (1.0 + np.cos(np.pi * n / (half + 1)))
    return taps / taps.sum()


@lru_cache(maxsize=None)
def smoothing_matrix(n: int, length: int = FIR_LENGTH) -> np.ndarray:
    """``(n, n)`` FIR smoother; rows renormalized at the edges so constants pass exactly."""
    taps = static_fir_taps(length)
    half = length // 2
    m = np.zeros((n, n))
    for i in range(n):
        for j, t in zip(range(i - half, i + half + 1), taps):
            if 0 <= j < n:
                m[i, j] = t
    m /= m.sum(axis=1, keepdims=True)
    m.setflags(write=False)
    return m


def frequency_interp_matrix(n_subcarriers: int, pilot_sc: np.ndarray) -> np.ndarray:
    """Linear interpolation between pilot subcarriers with edge hold, ``(N_F, F_P)``."""
    eye = np.eye(len(pilot_sc))
    f = np.arange(n_subcarriers)
    return np.stack([np.interp(f, pilot_sc, eye[:, m]) for m in range(len(pilot_sc))], axis=1)


def time_interp_matrix(n_symbols: int, dmrs_symbols) -> np.ndarray:
    """``(N_S, S_P)``: replicate a single DMRS symbol, else linear inter/extrapolation."""
    dmrs = list(dmrs_symbols)
    s = np.arange(n_symbols, dtype=float)
    if len(dmrs) == 1:
        return np.ones((n_symbols, 1))
    if len(dmrs) != 2:
        raise ValueError("time interpolation supports 1 or 2 DMRS symbols")
    s0, s1 = dmrs
    w1 = (s - s0) / (s1 - s0)
    return np.stack([1.0 - w1, w1], axis=1)


def interpolation_operators(pattern: PilotPattern, smooth: bool) -> tuple[np.ndarray, np.ndarray]:
    """Per-layer frequency operators ``(N_T, N_F, F_P)`` and the time operator ``(N_S, S_P)``."""
    return _interp_ops(pattern.n_subcarriers, pattern.n_symbols, pattern.n_layers, pattern.dmrs_symbols, smooth)


@lru_cache(maxsize=64)
def _interp_ops(n_f, n_s, n_t, dmrs, smooth):
    f_p = n_f // 4
    ops = []
    for k in range(n_t):
        a = frequency_interp_matrix(n_f, np.arange(k % 4, n_f, 4))
        if smooth:
            a = a @ smoothing_matrix(f_p)
        ops.append(a)
    freq = np.stack(ops)
    time = time_interp_matrix(n_s, dmrs)
    freq.setflags(write=False)
    time.setflags(write=False)
    return freq, time


def interpolate_and_smooth(raw: ChannelEstimate, mode: Literal["baseline_static", "passthrough"] = "baseline_static"
                           ) -> ChannelEstimate:
    """Pilot grids to the full RE grid.

    ``baseline_static`` smooths each pilot row with the static FIR before
    interpolating; ``passthrough`` interpolates only (used after learned denoising).
    """
    if raw.stage not in ("raw_pilot", "denoised_pilot"):
        raise ValueError(f"expected a pilot-stage estimate, got {raw.stage}")
    if mode not in ("baseline_static", "passthrough"):
        raise ValueError(f"unknown interpolation mode {mode!r}")
    freq, time = interpolation_operators(raw.pattern, smooth=(mode == "baseline_static"))
    full = np.einsum("kfm,sn,...mnrk->...fsrk", freq, time, raw.h_hat, optimize=True)
    return ChannelEstimate("full_grid", full, raw.pattern)
