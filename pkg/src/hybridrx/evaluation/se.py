"""Spectral efficiency from a link configuration and a target block error rate."""

from __future__ import annotations

from dataclasses import dataclass


@dataclass(frozen=True)
class SeParams:
    """Inputs of the spectral-efficiency formula.

    Attributes:
        n_t: number of MIMO layers.
        q_m: bits per modulation symbol.
        r: code rate in (0, 1).
        bler_target: block error rate at the operating point, in [0, 1].
        rho_re: fraction of resource elements carrying data, in (0, 1].
        gamma: useful fraction of the symbol duration (cyclic prefix removed), in (0, 1].
    """

    n_t: int
    q_m: int
    r: float
    bler_target: float
    rho_re: float
    gamma: float

    def __post_init__(self):
        if self.n_t < 1 or self.q_m < 1:
            raise ValueError("n_t and q_m must be positive integers")
        if not 0.0 < self.r < 1.0:
            raise ValueError(f"code rate must lie in (0, 1), got {self.r}")
        if not 0.0 <= self.bler_target <= 1.0:
            raise ValueError(f"BLER target must lie in [0, 1], got {self.bler_target}")
        for name in ("rho_re", "gamma"):
            v = getattr(self, name)
            if not 0.0 < v <= 1.0:
                raise ValueError(f"{name} must lie in (0, 1], got {v}")


def compute_spectral_efficiency(p: SeParams) -> float:
    """Bits/s/Hz: ``N_T * Q_m * r * (1 - BLER) * rho * gamma``."""
    return p.n_t * p.q_m * p.r * (1.0 - p.bler_target) * p.rho_re * p.gamma
