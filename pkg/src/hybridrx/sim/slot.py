"""Slot generation for ``y = H x + v + n`` over one OFDM slot."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field, replace
from functools import lru_cache
from typing import Optional, Sequence

import numpy as np

from .channel import ChannelRealization, generate_channel
from .pilots import MAX_LAYERS, PilotPattern, build_pilot_pattern
from .qam import SUPPORTED_ORDERS, modulate


@lru_cache(maxsize=64)
def _cached_pattern(n_layers, n_dmrs, n_subcarriers, n_symbols, seed) -> PilotPattern:
    return build_pilot_pattern(n_layers, n_dmrs, n_subcarriers, n_symbols, seed=seed)


@dataclass(frozen=True)
class SlotConfig:
    """Parameters of one simulated slot.

    ``inr_db=None`` disables the interferer.  With ``inr_std_db > 0`` the INR in dB
    is drawn from ``N(inr_db, inr_std_db)`` per slot (log-normal INR).
    ``snr_db=inf`` disables noise.
    """

    n_subcarriers: int = 48
    n_symbols: int = 14
    n_rx: int = 4
    n_layers: int = 2
    modulation_order: int = 4
    n_dmrs_symbols: int = 1
    snr_db: float = 10.0
    inr_db: Optional[float] = None
    inr_std_db: float = 0.0
    doppler_norm: float = 0.0
    delay_spread_norm: float = 0.0
    seed: int = 0
    pilot_seed: int = 0

    def __post_init__(self):
        if self.n_layers > MAX_LAYERS:
            raise ValueError(f"at most {MAX_LAYERS} layers are supported")
        if not 1 <= self.n_layers <= self.n_rx:
            raise ValueError("need 1 <= n_layers <= n_rx")
        if self.n_subcarriers <= 0 or self.n_subcarriers % 12:
            raise ValueError("n_subcarriers must be a positive multiple of 12 (whole PRBs)")
        if self.modulation_order not in SUPPORTED_ORDERS:
            raise ValueError(f"modulation_order must be one of {SUPPORTED_ORDERS}")
        if self.inr_std_db < 0 or self.doppler_norm < 0 or self.delay_spread_norm < 0:
            raise ValueError("inr_std_db, doppler_norm and delay_spread_norm must be >= 0")

    @property
    def noise_var(self) -> float:
        return 0.0 if math.isinf(self.snr_db) and self.snr_db > 0 else 10.0 ** (-self.snr_db / 10.0)

    def pattern(self) -> PilotPattern:
        return _cached_pattern(self.n_layers, self.n_dmrs_symbols, self.n_subcarriers, self.n_symbols, self.pilot_seed)

    def to_dict(self) -> dict:
        return asdict(self)

    def with_(self, **kw) -> "SlotConfig":
        return replace(self, **kw)


@dataclass
class TxSlot:
    bits: np.ndarray  # (N_F, N_S, N_T, B_mod) int8, zero off data REs
    x: np.ndarray  # (N_F, N_S, N_T) incl. pilots
    pattern: PilotPattern

    @property
    def data_mask(self) -> np.ndarray:
        return self.pattern.data_mask


@dataclass
class ResourceGrid:
    """Received samples plus the impairment bookkeeping used for SINR binning."""

    y: np.ndarray  # (N_F, N_S, N_R)
    noise_var: float
    inr_db: Optional[float]
    interference_power: float
    impairment: np.ndarray = field(repr=False)  # v + n
    sinr_db: float = float("nan")


@dataclass
class Slot:
    cfg: SlotConfig
    tx: TxSlot
    channel: ChannelRealization
    grid: ResourceGrid


def make_tx(cfg: SlotConfig, pattern: PilotPattern, rng: np.random.Generator) -> TxSlot:
    shape = (cfg.n_subcarriers, cfg.n_symbols, cfg.n_layers, cfg.modulation_order)
    bits = rng.integers(0, 2, size=shape, dtype=np.int8)
    bits[~pattern.data_mask] = 0
    x = modulate(bits, cfg.modulation_order)
    x[~pattern.data_mask] = 0
    x = x + pattern.values
    return TxSlot(bits, x, pattern)


def synthesize_received(tx: TxSlot, ch: ChannelRealization, cfg: SlotConfig, rng: np.random.Generator) -> ResourceGrid:
    sigma2 = cfg.noise_var
    y = np.einsum("fsrt,fst->fsr", ch.h, tx.x)
    shape = y.shape
    inr_db = None
    v = np.zeros(shape, dtype=complex)
    if cfg.inr_db is not None:
        inr_db = float(cfg.inr_db + (cfg.inr_std_db * rng.standard_normal() if cfg.inr_std_db > 0 else 0.0))
        bits = rng.integers(0, 2, size=shape[:2] + (cfg.modulation_order,), dtype=np.int8)
        s_int = modulate(bits, cfg.modulation_order)
        v = np.sqrt(sigma2 * 10.0 ** (inr_db / 10.0)) * ch.interferer_h[..., 0] * s_int[..., None]
    n = np.sqrt(sigma2 / 2.0) * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))
    d = v + n
    p_d = float(np.mean(np.abs(d) ** 2))
    sinr_db = float("inf") if p_d == 0 else -10.0 * math.log10(p_d)
    return ResourceGrid(y=y + d, noise_var=sigma2, inr_db=inr_db, interference_power=float(np.mean(np.abs(v) ** 2)),
                        impairment=d, sinr_db=sinr_db)


def generate_slot(cfg: SlotConfig) -> Slot:
    """Deterministic in ``cfg`` (including ``cfg.seed``)."""
    rng = np.random.default_rng(cfg.seed)
    pattern = cfg.pattern()
    ch = generate_channel(cfg, rng)
    tx = make_tx(cfg, pattern, rng)
    grid = synthesize_received(tx, ch, cfg, rng)
    return Slot(cfg, tx, ch, grid)


@dataclass
class SlotBatch:
    """Slots sharing dimensions and pilot pattern, stacked along a leading axis."""

    y: np.ndarray  # (B, N_F, N_S, N_R)
    x: np.ndarray  # (B, N_F, N_S, N_T)
    bits: np.ndarray  # (B, N_F, N_S, N_T, B_mod)
    h: np.ndarray  # (B, N_F, N_S, N_R, N_T) true channel
    noise_var: np.ndarray  # (B,)
    snr_db: np.ndarray
    sinr_db: np.ndarray
    pattern: PilotPattern
    modulation_order: int
    impairment: np.ndarray  # (B, N_F, N_S, N_R)
    interferer_h: np.ndarray  # (B, N_F, N_S, N_R, 1)
    inr_db: np.ndarray  # nan where no interferer

    def __len__(self) -> int:
        return self.y.shape[0]

    @property
    def data_mask(self) -> np.ndarray:
        return self.pattern.data_mask

    def select(self, idx) -> "SlotBatch":
        arrays = {k: getattr(self, k)[idx] for k in ("y", "x", "bits", "h", "noise_var", "snr_db", "sinr_db",
                                                     "impairment", "interferer_h", "inr_db")}
        return SlotBatch(pattern=self.pattern, modulation_order=self.modulation_order, **arrays)


def stack_slots(slots: Sequence[Slot]) -> SlotBatch:
    first = slots[0].cfg
    for s in slots[1:]:
        c = s.cfg
        if (c.n_subcarriers, c.n_symbols, c.n_rx, c.n_layers, c.modulation_order, c.n_dmrs_symbols, c.pilot_seed) != (
                first.n_subcarriers, first.n_symbols, first.n_rx, first.n_layers, first.modulation_order,
                first.n_dmrs_symbols, first.pilot_seed):
            raise ValueError("slots in a batch must share dimensions and pilot pattern")
    return SlotBatch(
        y=np.stack([s.grid.y for s in slots]),
        x=np.stack([s.tx.x for s in slots]),
        bits=np.stack([s.tx.bits for s in slots]),
        h=np.stack([s.channel.h for s in slots]),
        noise_var=np.array([s.grid.noise_var for s in slots]),
        snr_db=np.array([s.cfg.snr_db for s in slots], dtype=float),
        sinr_db=np.array([s.grid.sinr_db for s in slots]),
        pattern=slots[0].tx.pattern,
        modulation_order=first.modulation_order,
        impairment=np.stack([s.grid.impairment for s in slots]),
        interferer_h=np.stack([s.channel.interferer_h for s in slots]),
        inr_db=np.array([np.nan if s.grid.inr_db is None else s.grid.inr_db for s in slots]),
    )


def generate_batch(cfgs: Sequence[SlotConfig]) -> SlotBatch:
    return stack_slots([generate_slot(c) for c in cfgs])
