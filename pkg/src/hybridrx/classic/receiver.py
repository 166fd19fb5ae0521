"""Conventional receiver chain: LS estimation, static smoothing, INCM, LMMSE, exact LLRs."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..sim.slot import SlotBatch
from .demap import LlrGrid, exact_llr_demap
from .equalizer import DEFAULT_ALPHA, EqualizerOutput, equalize
from .estimation import interpolate_and_smooth, raw_ls_estimate
from .incm import BAND_SIZE, estimate_incm_bands

# absolute diagonal loading of INCM estimates; keeps noise-free slots invertible
INCM_FLOOR = 1e-10


def load_incm(R: np.ndarray, floor: float = INCM_FLOOR) -> np.ndarray:
    return R + floor * np.eye(R.shape[-1])


@dataclass
class ReceiverOutput:
    llr: LlrGrid
    x_hat: np.ndarray  # (B, N_F, N_S, N_T)
    eq: EqualizerOutput


@dataclass
class BaselineReceiver:
    """LS + static FIR + linear interpolation + OAS-INCM + linear equalizer + exact demapper.

    ``csi="perfect"`` replaces the channel estimate by the true channel (the INCM is
    then estimated from residuals against the true channel).
    """

    equalizer: str = "LMMSE"
    alpha: float = DEFAULT_ALPHA
    band_size: int = BAND_SIZE
    smoothing: str = "baseline_static"
    csi: str = "estimated"
    max_log: bool = False

    def channel_estimate(self, batch: SlotBatch) -> np.ndarray:
        if self.csi == "perfect":
            return batch.h
        raw = raw_ls_estimate(batch.y, batch.pattern)
        return interpolate_and_smooth(raw, self.smoothing).h_hat

    def __call__(self, batch: SlotBatch) -> ReceiverOutput:
        h = self.channel_estimate(batch)
        R, _ = estimate_incm_bands(batch.y, h, batch.pattern, self.band_size)
        R = load_incm(R)
        eq = equalize(batch.y, h, R, self.equalizer, alpha=self.alpha, band_size=self.band_size)
        var = np.where(eq.valid, eq.post_eq_noise_var, 1.0)
        llr = exact_llr_demap(eq.x_hat, var, batch.modulation_order, max_log=self.max_log)
        llr[~eq.valid] = 0.0
        return ReceiverOutput(LlrGrid(llr, batch.modulation_order), eq.x_hat, eq)
