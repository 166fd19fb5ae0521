"""Tapped-delay Rayleigh channel with exponential delay profile and AR(1) ageing."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import j0

N_TAPS = 8
# per-tap power decay exp(-TAP_DECAY * l) before normalization
TAP_DECAY = 0.5


@dataclass
class ChannelRealization:
    h: np.ndarray  # (N_F, N_S, N_R, N_T)
    interferer_h: np.ndarray  # (N_F, N_S, N_R, 1)
    meta: dict = field(default_factory=dict)


def tap_profile(delay_spread_norm: float, n_taps: int = N_TAPS) -> tuple[np.ndarray, np.ndarray]:
    """Tap delays (in units of 1/subcarrier spacing) and unit-sum powers.

    Taps are uniformly spaced and the spacing is chosen so the RMS delay spread of
    the discrete profile equals ``delay_spread_norm``.
    """
    if delay_spread_norm < 0:
        raise ValueError("delay_spread_norm must be >= 0")
    powers = np.exp(-TAP_DECAY * np.arange(n_taps))
    powers /= powers.sum()
    idx = np.arange(n_taps)
    mean = np.sum(powers * idx)
    rms_taps = np.sqrt(np.sum(powers * (idx - mean) ** 2))
    delays = idx * (delay_spread_norm / rms_taps)
    return delays, powers


def ar1_coefficient(doppler_norm: float) -> float:
    """Symbol-to-symbol correlation ``J0(2*pi*f_D*T)`` of the AR(1) tap process."""
    if doppler_norm < 0:
        raise ValueError("doppler_norm must be >= 0")
    return float(np.clip(j0(2 * np.pi * doppler_norm), -1.0, 1.0))


def tapped_delay_response(rng: np.random.Generator, n_subcarriers: int, n_symbols: int, n_rx: int, n_tx: int,
                          delay_spread_norm: float, doppler_norm: float) -> np.ndarray:
    """Frequency response ``(N_F, N_S, N_R, N_T)`` of one random realization."""
    delays, powers = tap_profile(delay_spread_norm)
    a = ar1_coefficient(doppler_norm)
    shape = (N_TAPS, n_rx, n_tx)
    scale = np.sqrt(powers / 2.0)[:, None, None]
    taps = np.empty((n_symbols,) + shape, dtype=complex)
    taps[0] = scale * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))
    innov = np.sqrt(max(1.0 - a * a, 0.0))
    for s in range(1, n_symbols):
        w = scale * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))
        taps[s] = a * taps[s - 1] + innov * w
    dft = np.exp(-2j * np.pi * np.outer(np.arange(n_subcarriers), delays))
    return np.einsum("fl,slrt->fsrt", dft, taps)


def generate_channel(cfg, rng: np.random.Generator) -> ChannelRealization:
    """Desired-user channel and one independent interferer channel for ``cfg``."""
    dims = (cfg.n_subcarriers, cfg.n_symbols, cfg.n_rx)
    h = tapped_delay_response(rng, *dims, cfg.n_layers, cfg.delay_spread_norm, cfg.doppler_norm)
    hi = tapped_delay_response(rng, *dims, 1, cfg.delay_spread_norm, cfg.doppler_norm)
    meta = {
        "n_taps": N_TAPS,
        "delay_spread_norm": cfg.delay_spread_norm,
        "doppler_norm": cfg.doppler_norm,
        "ar1": ar1_coefficient(cfg.doppler_norm),
    }
    return ChannelRealization(h, hi, meta)
