"""Conventional receiver building blocks."""

from .demap import LLR_CLAMP, LlrGrid, exact_llr_demap, hard_decision, pad_llrs
from .equalizer import DEFAULT_ALPHA, EqualizerOutput, equalize, equalize_re, filter_matrix, inverse_incm
from .estimation import (
    ChannelEstimate,
    frequency_interp_matrix,
    interpolate_and_smooth,
    interpolation_operators,
    raw_ls_estimate,
    raw_rank_one,
    smoothing_matrix,
    static_fir_taps,
    time_interp_matrix,
)
from .incm import BAND_SIZE, IncmEstimate, band_slices, estimate_incm, estimate_incm_bands, oas_shrink, pilot_residuals
from .receiver import INCM_FLOOR, BaselineReceiver, ReceiverOutput, load_incm
