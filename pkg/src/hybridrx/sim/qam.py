"""Gray-coded square QAM with unit average energy (3GPP bit ordering)."""

from __future__ import annotations

from functools import lru_cache

import numpy as np

SUPPORTED_ORDERS = (2, 4, 6, 8)


def _check_order(order: int) -> int:
    if order not in SUPPORTED_ORDERS:
        raise ValueError(f"unsupported modulation order {order}; expected bits/symbol in {SUPPORTED_ORDERS}")
    return int(order)


def _pam_level(bits: np.ndarray) -> np.ndarray:
    """Amplitude from the bits of one dimension, most significant first."""
    m = bits.shape[-1]
    level = np.ones(bits.shape[:-1])
    # nested form 2^(m-1) - (1-2b)(2^(m-2) - ...)
    for i in range(m - 1, 0, -1):
        level = 2.0 ** (m - i) - (1 - 2 * bits[..., i]) * level
    return (1 - 2 * bits[..., 0]) * level


@lru_cache(maxsize=None)
def _tables(order: int) -> tuple[np.ndarray, np.ndarray]:
    n = 1 << order
    labels = ((np.arange(n)[:, None] >> np.arange(order - 1, -1, -1)) & 1).astype(np.int8)
    points = modulate(labels, order)
    points.setflags(write=False)
    labels.setflags(write=False)
    return points, labels


def constellation(order: int) -> np.ndarray:
    """Constellation points indexed by the integer whose binary digits are the bit label."""
    return _tables(_check_order(order))[0]


def bit_labels(order: int) -> np.ndarray:
    """``(2**order, order)`` bit labels matching :func:`constellation`."""
    return _tables(_check_order(order))[1]


def modulate(bits: np.ndarray, order: int) -> np.ndarray:
    """Map bit groups along the last axis (length ``order``) to symbols."""
    order = _check_order(order)
    bits = np.asarray(bits)
    if bits.shape[-1] != order:
        raise ValueError(f"expected {order} bits per symbol, got {bits.shape[-1]}")
    m = order // 2
    i_part = _pam_level(bits[..., 0::2].astype(np.float64))
    q_part = _pam_level(bits[..., 1::2].astype(np.float64))
    norm = np.sqrt(2.0 * (4.0 ** m - 1.0) / 3.0)
    return (i_part + 1j * q_part) / norm


def map_qam(bits, order: int) -> complex:
    """Map one bit vector of length ``order`` to its constellation point."""
    bits = np.asarray(bits)
    if bits.ndim != 1:
        raise ValueError("map_qam takes one bit vector; use modulate() for arrays")
    return complex(modulate(bits, order))
