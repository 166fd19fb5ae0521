"""Symbol-to-bit demapping with the ``log(Pr0 / Pr1)`` sign convention."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from ..sim.qam import bit_labels, constellation

LLR_CLAMP = 30.0
MAX_BITS = 8
_CHUNK = 1 << 15


@dataclass
class LlrGrid:
    """LLRs ``(..., N_F, N_S, N_T, B)`` of which the first ``valid_bits`` are meaningful."""

    llr: np.ndarray
    valid_bits: int

    @property
    def bits(self) -> np.ndarray:
        return self.llr[..., :self.valid_bits]


def exact_llr_demap(x_hat, noise_var, order: int, max_log: bool = False, clamp: float | None = LLR_CLAMP) -> np.ndarray:
    """Per-bit LLRs of equalized symbols under a circular Gaussian residual.

    ``x_hat`` and ``noise_var`` broadcast together; the output has a trailing axis of
    length ``order``.  ``max_log`` replaces the log-sum-exp by a maximum.
    """
    x_hat = np.asarray(x_hat, dtype=complex)
    noise_var = np.asarray(noise_var, dtype=float)
    if np.any(noise_var <= 0):
        raise ValueError("noise_var must be positive")
    x_hat, noise_var = np.broadcast_arrays(x_hat, noise_var)
    points = constellation(order)
    labels = bit_labels(order).astype(bool)
    flat_x = x_hat.reshape(-1)
    flat_v = noise_var.reshape(-1)
    out = np.empty((flat_x.size, order))
    for lo in range(0, flat_x.size, _CHUNK):
        xs = flat_x[lo:lo + _CHUNK, None]
        metric = -np.abs(xs - points[None, :]) ** 2 / flat_v[lo:lo + _CHUNK, None]
        for l in range(order):
            m0 = metric[:, ~labels[:, l]]
            m1 = metric[:, labels[:, l]]
            if max_log:
                out[lo:lo + _CHUNK, l] = m0.max(axis=1) - m1.max(axis=1)
            else:
                out[lo:lo + _CHUNK, l] = logsumexp(m0, axis=1) - logsumexp(m1, axis=1)
    if clamp is not None:
        np.clip(out, -clamp, clamp, out=out)
    return out.reshape(x_hat.shape + (order,))


def hard_decision(llr: np.ndarray, rng: np.random.Generator | None = None) -> np.ndarray:
    """Bit 1 where the LLR is negative; exact zeros are broken by ``rng`` coin flips (else 0)."""
    llr = np.asarray(llr)
    bits = (llr < 0).astype(np.int8)
    if rng is not None:
        ties = llr == 0
        if np.any(ties):
            bits[ties] = rng.integers(0, 2, size=int(ties.sum()), dtype=np.int8)
    return bits


def pad_llrs(llr: np.ndarray, width: int = MAX_BITS) -> np.ndarray:
    pad = width - llr.shape[-1]
    if pad < 0:
        raise ValueError("more LLRs than the output width")
    return np.concatenate([llr, np.zeros(llr.shape[:-1] + (pad,))], axis=-1) if pad else llr
