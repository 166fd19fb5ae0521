"""Random draws of slot configurations for training and evaluation."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .slot import SlotConfig


@dataclass(frozen=True)
class Scenario:
    """Distribution over slots.

    When ``sinr_db_range`` is set, the SNR of each slot is derived from a uniformly
    drawn target SINR and the slot's INR draw, so realized SINRs spread evenly over
    the range; otherwise SNR is uniform over ``snr_db_range``.
    """

    n_subcarriers: int = 48
    n_rx: int = 4
    n_layers: tuple[int, ...] = (2,)
    modulation_order: int = 4
    n_dmrs: tuple[int, ...] = (1, 2)
    snr_db_range: tuple[float, float] = (0.0, 30.0)
    sinr_db_range: Optional[tuple[float, float]] = None
    inr_mean_db: Optional[float] = 10.0
    inr_std_db: float = 5.0
    doppler_range: tuple[float, float] = (0.0, 0.02)
    delay_range: tuple[float, float] = (0.002, 0.03)

    def draw(self, n: int, rng: np.random.Generator) -> list[SlotConfig]:
        """``n`` configs sharing one layer count and DMRS configuration."""
        n_layers = int(rng.choice(self.n_layers))
        n_dmrs = int(rng.choice(self.n_dmrs))
        cfgs = []
        for _ in range(n):
            inr = None
            inr_std = 0.0
            if self.inr_mean_db is not None:
                inr = float(self.inr_mean_db + self.inr_std_db * rng.standard_normal())
            if self.sinr_db_range is not None:
                target = rng.uniform(*self.sinr_db_range)
                inr_lin = 0.0 if inr is None else 10.0 ** (inr / 10.0)
                snr = float(target + 10.0 * math.log10(1.0 + inr_lin))
            else:
                snr = float(rng.uniform(*self.snr_db_range))
            cfgs.append(SlotConfig(
                n_subcarriers=self.n_subcarriers, n_rx=self.n_rx, n_layers=n_layers,
                modulation_order=self.modulation_order, n_dmrs_symbols=n_dmrs, snr_db=snr,
                inr_db=inr, inr_std_db=inr_std,
                doppler_norm=float(rng.uniform(*self.doppler_range)),
                delay_spread_norm=float(rng.uniform(*self.delay_range)),
                seed=int(rng.integers(0, 2**62)),
            ))
        return cfgs
