"""Comb-type DMRS pilot pattern, orthogonal across up to four layers."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

MAX_LAYERS = 4
PILOT_SPACING = 4
DMRS_POSITIONS = {1: (2,), 2: (2, 11)}


@dataclass(frozen=True, eq=False)
class PilotPattern:
    """Pilot placement and values over one slot.

    ``values[f, s, k]`` is the known pilot of layer ``k`` (zero off-pilot).
    DMRS symbols carry no data; subcarriers whose comb offset has no active layer
    stay empty.
    """

    n_subcarriers: int
    n_symbols: int
    n_layers: int
    dmrs_symbols: tuple[int, ...]
    values: np.ndarray

    @property
    def pilot_mask(self) -> np.ndarray:
        """``(N_F, N_S, N_T)`` boolean mask of pilot REs per layer."""
        return self.values != 0

    @property
    def pilot_res(self) -> set[tuple[int, int, int]]:
        return {tuple(int(v) for v in idx) for idx in np.argwhere(self.pilot_mask)}

    @property
    def data_mask(self) -> np.ndarray:
        """``(N_F, N_S)`` mask of data-carrying REs."""
        mask = np.ones((self.n_subcarriers, self.n_symbols), dtype=bool)
        mask[:, list(self.dmrs_symbols)] = False
        return mask

    @property
    def n_pilot_symbols(self) -> int:
        return len(self.dmrs_symbols)

    @property
    def n_pilot_subcarriers(self) -> int:
        return self.n_subcarriers // PILOT_SPACING

    def offset(self, layer: int) -> int:
        return layer % PILOT_SPACING

    def pilot_subcarriers(self, layer: int) -> np.ndarray:
        return np.arange(self.offset(layer), self.n_subcarriers, PILOT_SPACING)

    def pilot_grid_values(self) -> np.ndarray:
        """Pilot values rearranged to ``(F_P, S_P, N_T)`` per-layer pilot grids."""
        out = np.empty((self.n_pilot_subcarriers, self.n_pilot_symbols, self.n_layers), dtype=complex)
        for k in range(self.n_layers):
            out[:, :, k] = self.values[self.pilot_subcarriers(k)][:, list(self.dmrs_symbols), k]
        return out


def build_pilot_pattern(n_layers: int, n_dmrs_symbols: int, n_subcarriers: int, n_symbols: int = 14,
                        seed: int = 0, amplitude: float = 1.0) -> PilotPattern:
    """Layer ``k`` sends QPSK pilots on subcarriers ``i % 4 == k`` of every DMRS symbol."""
    if not 1 <= n_layers <= MAX_LAYERS:
        raise ValueError(f"pilot pattern supports 1..{MAX_LAYERS} layers, got {n_layers}")
    if n_dmrs_symbols not in DMRS_POSITIONS:
        raise ValueError(f"n_dmrs_symbols must be 1 or 2, got {n_dmrs_symbols}")
    if n_subcarriers % PILOT_SPACING:
        raise ValueError("n_subcarriers must be a multiple of the pilot spacing")
    dmrs = DMRS_POSITIONS[n_dmrs_symbols]
    if max(dmrs) >= n_symbols:
        raise ValueError(f"slot of {n_symbols} symbols is too short for DMRS at {dmrs}")
    values = np.zeros((n_subcarriers, n_symbols, n_layers), dtype=complex)
    n_sc = n_subcarriers // PILOT_SPACING
    for k in range(n_layers):
        rng = np.random.default_rng([seed, k])
        qpsk = rng.integers(0, 2, size=(n_sc, len(dmrs), 2))
        seq = amplitude * ((1 - 2 * qpsk[..., 0]) + 1j * (1 - 2 * qpsk[..., 1])) / np.sqrt(2.0)
        sc = np.arange(k % PILOT_SPACING, n_subcarriers, PILOT_SPACING)
        values[np.ix_(sc, list(dmrs), [k])] = seq[..., None]
    values.setflags(write=False)
    return PilotPattern(n_subcarriers, n_symbols, n_layers, tuple(dmrs), values)
