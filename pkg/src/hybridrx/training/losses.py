"""SNR-weighted bit cross entropy with a section-symbol loss, and the mVCL activation penalty."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ..tensor import Tensor, abs2, as_tensor, cast, getitem, mean, mul, sigmoid_cross_entropy, tsum
from ..tensor.engine import make_node


@dataclass
class LossBreakdown:
    """Loss terms averaged over the batch.

    ``bit_loss`` and ``symbol_loss`` are already multiplied by the per-sample SNR
    weight (and ``symbol_loss`` by lambda); the ``*_raw`` values are unweighted.
    For a single SNR, ``total = snr_weight * (bit_loss_raw + lambda * symbol_loss_raw) + mvcl``.
    """

    total: Tensor
    bit_loss: float
    symbol_loss: float
    mvcl: float
    snr_weight: float
    bit_loss_raw: float
    symbol_loss_raw: float

    def as_row(self) -> dict[str, float]:
        return {"total": float(self.total.data), "bit_loss": self.bit_loss, "symbol_loss": self.symbol_loss,
                "mvcl": self.mvcl}


def snr_weight(snr_linear) -> np.ndarray:
    snr = np.asarray(snr_linear, dtype=float)
    if np.any(snr <= 0):
        raise ValueError("snr_linear must be positive")
    return np.log2(1.0 + snr)


def composite_loss(llrs, true_bits: np.ndarray, section_symbols: Sequence, true_symbols: np.ndarray, snr_linear,
                   data_mask: np.ndarray | None = None, lambda_sym: float = 1e-4,
                   mvcl: Tensor | float = 0.0) -> LossBreakdown:
    """Composite training loss.

    Parameters
    ----------
    llrs : Tensor
        ``(B, N_F, N_S, N_T, n_bits)``; the first ``true_bits.shape[-1]`` channels are used.
        The probability of a one bit is ``sigmoid(-LLR)``.
    true_bits : ndarray
        ``(B, N_F, N_S, N_T, B_mod)``.
    section_symbols : list of Tensor
        Complex per-section estimates ``(B, N_F, N_S, N_T)``.
    true_symbols : ndarray
        Transmitted symbols ``(B, N_F, N_S, N_T)``.
    snr_linear : float or ndarray
        Per-sample linear SNR used for the ``log2(1 + snr)`` weight.
    data_mask : ndarray, optional
        ``(N_F, N_S)`` data REs; pilot REs are excluded from both terms.
    """
    llrs = as_tensor(llrs)
    true_bits = np.asarray(true_bits)
    true_symbols = np.asarray(true_symbols)
    if lambda_sym < 0:
        raise ValueError("lambda_sym must be >= 0")
    if llrs.ndim != true_bits.ndim or llrs.shape[:-1] != true_bits.shape[:-1] or llrs.shape[-1] < true_bits.shape[-1]:
        raise ValueError(f"LLR shape {llrs.shape} incompatible with bits {true_bits.shape}")
    if true_symbols.shape != true_bits.shape[:-1]:
        raise ValueError(f"symbol shape {true_symbols.shape} incompatible with bits {true_bits.shape}")
    batch = true_bits.shape[0]
    w = np.broadcast_to(snr_weight(snr_linear), (batch,)).astype(float)
    if data_mask is None:
        data_mask = np.ones(true_bits.shape[1:3], dtype=bool)
    b_mod = true_bits.shape[-1]
    n_t = true_bits.shape[3]
    re_mask = np.asarray(data_mask, dtype=float)
    n_data = re_mask.sum()

    llr = cast(getitem(llrs, (Ellipsis, slice(0, b_mod))), np.float64)
    ce = sigmoid_cross_entropy(-llr, true_bits)
    bit_mask = re_mask[:, :, None, None] / (n_data * n_t * b_mod)
    ce_q = tsum(mul(ce, bit_mask).reshape(batch, -1), axis=1)  # mean CE per bit, (B,)

    sym_q = Tensor(np.zeros(batch))
    sym_mask = re_mask[:, :, None]
    for x_hat in section_symbols:
        err = mul(abs2(as_tensor(x_hat) - true_symbols), sym_mask)
        sym_q = sym_q + tsum(err.reshape(batch, -1), axis=1)

    total_q = mul(ce_q + lambda_sym * sym_q, w)
    mv = as_tensor(mvcl)
    total = mean(total_q) + mv
    return LossBreakdown(
        total=total,
        bit_loss=float(np.mean(w * ce_q.data)),
        symbol_loss=float(np.mean(w * lambda_sym * sym_q.data)),
        mvcl=float(mv.data),
        snr_weight=float(np.mean(w)),
        bit_loss_raw=float(np.mean(ce_q.data)),
        symbol_loss_raw=float(np.mean(sym_q.data)),
    )


def mvcl_penalty(activations: Sequence[Tensor], alpha: float = 1e-5, mean_target: float = 0.0,
                 var_target: float = 1.0) -> Tensor:
    """Sum over layers of ``alpha * (||mu - mu*||^2 + ||v - v*||^2) / C``.

    ``mu`` and ``v`` are per-channel statistics over every axis but the last.
    """
    if alpha < 0:
        raise ValueError("mvcl alpha must be >= 0")
    total = Tensor(np.zeros(()))
    if alpha == 0:
        return total
    for act in activations:
        total = total + _mvcl_term(as_tensor(act), alpha, mean_target, var_target)
    return total


def _mvcl_term(a: Tensor, alpha: float, mean_target: float, var_target: float) -> Tensor:
    # fused statistics with a closed-form gradient; the mean's contribution to
    # d(var)/dx sums to zero and drops out
    c = a.shape[-1]
    x = a.data.reshape(-1, c)
    n = x.shape[0]
    mu = x.mean(axis=0, dtype=np.float64)
    d = x - mu.astype(x.dtype)
    v = np.mean(np.square(d, dtype=np.float64), axis=0)
    dm, dv = mu - mean_target, v - var_target
    value = alpha * (np.sum(dm ** 2) + np.sum(dv ** 2)) / c

    def bw(g):
        coef = float(g) * alpha / c * 2.0 / n
        scale = (2.0 * coef * dv).astype(d.dtype)
        shift = (coef * dm).astype(d.dtype)
        return ((d * scale + shift).reshape(a.shape),)

    return make_node(np.asarray(value), (a,), bw)
