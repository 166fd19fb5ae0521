"""Interference-plus-noise covariance estimation with OAS shrinkage."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..sim.pilots import PilotPattern
from ..tensor.clinalg import hermitize

BAND_SIZE = 24


@dataclass
class IncmEstimate:
    band_index: int
    S_sample: np.ndarray
    rho: float | np.ndarray
    R_shrunk: np.ndarray
    P: int


def oas_shrink(S: np.ndarray, P: int) -> tuple[np.ndarray, np.ndarray]:
    """Shrink sample covariances toward a scaled identity.

    ``R = (1 - rho) S + rho tr(S)/N I`` with the complex-Gaussian OAS coefficient

        rho = min(1, ((1 - 1/N) tr(S^2) + tr(S)^2) / ((P + 1 - 1/N) (tr(S^2) - tr(S)^2/N)))

    Works on stacks ``(..., N, N)``; returns ``(rho, R)``.  A zero-trace input
    returns ``rho = 1`` and ``R = 0``.
    """
    if P < 1:
        raise ValueError("OAS needs at least one sample")
    S = np.asarray(S)
    n = S.shape[-1]
    tr = np.real(np.trace(S, axis1=-2, axis2=-1))
    tr2 = np.sum(np.abs(S) ** 2, axis=(-2, -1))
    num = (1.0 - 1.0 / n) * tr2 + tr ** 2
    den = (P + 1.0 - 1.0 / n) * (tr2 - tr ** 2 / n)
    with np.errstate(divide="ignore", invalid="ignore"):
        rho = np.where(den > 0, np.minimum(1.0, num / np.where(den > 0, den, 1.0)), 1.0)
    rho = np.clip(rho, 0.0, 1.0)
    eye = np.eye(n)
    target = (tr / n)[..., None, None] * eye
    R = (1.0 - rho)[..., None, None] * S + rho[..., None, None] * target
    return rho, hermitize(R)


def pilot_residuals(y: np.ndarray, h_full: np.ndarray, pattern: PilotPattern) -> np.ndarray:
    """``d = y - H x`` at every pilot RE, full-grid shape ``(..., N_F, N_S, N_R)`` (zero elsewhere)."""
    x = pattern.values
    mask = np.any(pattern.pilot_mask, axis=-1)
    d = y - np.einsum("...fsrt,fst->...fsr", h_full, x)
    return d * mask[:, :, None]


def band_slices(n_subcarriers: int, band_size: int = BAND_SIZE) -> list[slice]:
    return [slice(lo, min(lo + band_size, n_subcarriers)) for lo in range(0, n_subcarriers, band_size)]


def estimate_incm(y: np.ndarray, h_full: np.ndarray, pattern: PilotPattern, band: slice,
                  band_index: int = 0) -> IncmEstimate:
    """Sample covariance of pilot residuals in one subcarrier band, shrunk with OAS.

    Pilots of all DMRS symbols in the band are pooled.
    """
    mask = np.any(pattern.pilot_mask, axis=-1)[band]
    P = int(mask.sum())
    if P == 0:
        raise ValueError(f"band {band} contains no pilot REs")
    d = pilot_residuals(y, h_full, pattern)[..., band, :, :][..., mask, :]  # (..., P, N_R)
    S = np.einsum("...pi,...pj->...ij", d, np.conj(d)) / P
    rho, R = oas_shrink(S, P)
    return IncmEstimate(band_index, S, rho, R, P)


def estimate_incm_bands(y: np.ndarray, h_full: np.ndarray, pattern: PilotPattern, band_size: int = BAND_SIZE,
                        shrink: bool = True) -> tuple[np.ndarray, np.ndarray]:
    """Shrunk INCM per band, ``(..., n_bands, N_R, N_R)``, plus the ``(..., n_bands)`` coefficients."""
    Rs, rhos = [], []
    for b, sl in enumerate(band_slices(pattern.n_subcarriers, band_size)):
        est = estimate_incm(y, h_full, pattern, sl, b)
        Rs.append(est.R_shrunk if shrink else est.S_sample)
        rhos.append(est.rho if shrink else np.zeros(est.S_sample.shape[:-2]))
    return np.stack(Rs, axis=-3), np.stack(rhos, axis=-1)


def band_index_map(n_subcarriers: int, band_size: int = BAND_SIZE) -> np.ndarray:
    return np.arange(n_subcarriers) // band_size
