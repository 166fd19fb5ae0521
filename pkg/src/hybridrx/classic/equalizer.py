"""Unit-gain linear MIMO equalizers: RZF, LMMSE (with INCM) and matched filter."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Literal, Optional

import numpy as np

from ..tensor.clinalg import SolveError, hermitian_solve
from .incm import BAND_SIZE, band_index_map

EqKind = Literal["RZF", "LMMSE", "MF"]
DEFAULT_ALPHA = 1e-4
MIN_GAIN = 1e-12


@dataclass
class EqualizerOutput:
    kind: str
    x_hat: np.ndarray  # (..., N_T)
    post_eq_noise_var: np.ndarray  # (..., N_T)
    valid: np.ndarray  # (..., N_T) bool; False where the unit-gain scaling is undefined
    w: np.ndarray  # scaled filter D^-1 W, (..., N_T, N_R)


def _mH(a: np.ndarray) -> np.ndarray:
    return np.conj(np.swapaxes(a, -1, -2))


def inverse_incm(R: np.ndarray) -> np.ndarray:
    n = R.shape[-1]
    eye = np.broadcast_to(np.eye(n, dtype=complex), R.shape)
    return hermitian_solve(R, eye)


def filter_matrix(h: np.ndarray, kind: str, R: Optional[np.ndarray] = None, alpha: float = DEFAULT_ALPHA,
                  R_inv: Optional[np.ndarray] = None, lmmse_form: Literal["remark", "direct"] = "remark") -> np.ndarray:
    """Unscaled filter ``W`` ``(..., N_T, N_R)`` for channel stacks ``h`` ``(..., N_R, N_T)``."""
    h = np.asarray(h)
    n_t = h.shape[-1]
    hH = _mH(h)
    if kind == "MF":
        return hH
    if kind == "RZF":
        if alpha < 0:
            raise ValueError("RZF regularization alpha must be >= 0")
        gram = hH @ h + alpha * np.eye(n_t)
        try:
            return hermitian_solve(gram, hH)
        except SolveError as exc:
            raise SolveError(f"RZF Gram matrix is singular (alpha={alpha})") from exc
    if kind == "LMMSE":
        if lmmse_form == "direct":
            if R is None:
                raise ValueError("LMMSE needs an INCM estimate")
            m = h @ hH + R
            return _mH(hermitian_solve(m, h))
        if R_inv is None:
            if R is None:
                raise ValueError("LMMSE needs an INCM estimate")
            R_inv = inverse_incm(R)
        q = R_inv @ h  # R^-1 H
        g = hH @ q + np.eye(n_t)
        return hermitian_solve(g, _mH(q))
    raise ValueError(f"unknown equalizer kind {kind!r}")


def equalize_re(y: np.ndarray, h: np.ndarray, kind: str, R: Optional[np.ndarray] = None, alpha: float = DEFAULT_ALPHA,
                R_inv: Optional[np.ndarray] = None, noise_R: Optional[np.ndarray] = None,
                lmmse_form: Literal["remark", "direct"] = "remark") -> EqualizerOutput:
    """Equalize per-RE stacks: ``y`` ``(..., N_R)``, ``h`` ``(..., N_R, N_T)``.

    ``R`` / ``R_inv`` must broadcast against ``(..., N_R, N_R)``.  The filter is scaled
    by ``diag(W H)^-1`` so every stream has unit gain.  The post-equalization noise
    variance treats residual inter-stream leakage as Gaussian and uses ``noise_R``
    (default ``R``) for the impairment covariance.
    """
    w = filter_matrix(h, kind, R=R, alpha=alpha, R_inv=R_inv, lmmse_form=lmmse_form)
    gain = np.einsum("...kr,...rk->...k", w, h)
    valid = np.abs(gain) >= MIN_GAIN
    safe = np.where(valid, gain, 1.0)
    w_s = np.where(valid[..., None], w / safe[..., None], 0.0)
    x_hat = np.einsum("...kr,...r->...k", w_s, y)
    cov = noise_R if noise_R is not None else R
    if cov is None:
        raise ValueError("post-equalization noise variance needs an impairment covariance")
    noise = np.real(np.einsum("...kr,...rq,...kq->...k", w_s, np.broadcast_to(cov, w_s.shape[:-2] + cov.shape[-2:]),
                              np.conj(w_s)))
    leak = np.abs(w_s @ h) ** 2
    n_t = h.shape[-1]
    leak = leak.sum(axis=-1) - leak[..., np.arange(n_t), np.arange(n_t)]
    var = np.maximum(noise + leak, np.finfo(float).tiny)
    return EqualizerOutput(kind, np.where(valid, x_hat, 0.0), np.where(valid, var, np.inf), valid, w_s)


def equalize(y: np.ndarray, h_full: np.ndarray, incm: Optional[np.ndarray], kind: str, alpha: float = DEFAULT_ALPHA,
             band_size: int = BAND_SIZE, noise_var=None) -> EqualizerOutput:
    """Equalize a resource grid.

    ``y`` ``(..., N_F, N_S, N_R)``, ``h_full`` ``(..., N_F, N_S, N_R, N_T)``, ``incm``
    per-band ``(..., n_bands, N_R, N_R)``.  Without ``incm`` (RZF/MF only), the
    noise variance uses ``noise_var * I``.
    """
    n_f, n_r = h_full.shape[-4], h_full.shape[-2]
    if incm is not None:
        per_re = np.take(incm, band_index_map(n_f, band_size), axis=-3)[..., :, None, :, :]
        r_inv = inverse_incm(incm)
        r_inv_re = np.take(r_inv, band_index_map(n_f, band_size), axis=-3)[..., :, None, :, :]
    else:
        if kind == "LMMSE":
            raise ValueError("LMMSE needs an INCM estimate")
        if noise_var is None:
            raise ValueError("need incm or noise_var for the post-equalization noise variance")
        nv = np.asarray(noise_var, dtype=float).reshape(np.shape(noise_var) + (1, 1, 1, 1))
        per_re = nv * np.eye(n_r)
        r_inv_re = None
    return equalize_re(y, h_full, kind, R=per_re, alpha=alpha, R_inv=r_inv_re, noise_R=per_re)
