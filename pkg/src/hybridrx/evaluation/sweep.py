"""Monte-Carlo BER sweeps binned by realized SINR."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional, Sequence

import numpy as np

from ..classic.demap import hard_decision
from ..classic.receiver import BaselineReceiver
from ..sim.scenario import Scenario
from ..sim.slot import SlotBatch, generate_batch

CSV_COLUMNS = ("sinr_bin_center", "uncoded_ber", "sample_count")

BASELINE_RECEIVERS = {
    "baseline": dict(equalizer="LMMSE"),
    "baseline-rzf": dict(equalizer="RZF"),
    "baseline-mf": dict(equalizer="MF"),
    "baseline-perfect": dict(equalizer="LMMSE", csi="perfect"),
}
# ablation tags and the architecture switches a checkpoint must have
NEURAL_RECEIVERS = {
    "eqdeeprx": dict(denoise=True, lmmse=True, rzf=True),
    "eqdeeprx-nodenoise": dict(denoise=False, lmmse=True, rzf=True),
    "eqdeeprx-lmmse-only": dict(denoise=None, lmmse=True, rzf=False),
    "eqdeeprx-rzf-only": dict(denoise=None, lmmse=False, rzf=True),
}
RECEIVERS = tuple(BASELINE_RECEIVERS) + tuple(NEURAL_RECEIVERS) + ("zero-llr",)

Receiver = Callable[[SlotBatch, np.random.Generator], np.ndarray]


@dataclass
class SweepSpec:
    receiver: str = "baseline"
    scenario: Scenario = field(default_factory=Scenario)
    n_slots: int = 2000
    n_bins: int = 10
    bin_edges: Optional[Sequence[float]] = None
    seed: int = 0
    batch_size: int = 16
    checkpoint: Optional[str] = None
    output: Optional[str] = None

    def __post_init__(self):
        if self.receiver not in RECEIVERS:
            raise ValueError(f"unknown receiver {self.receiver!r}; choose from {list(RECEIVERS)}")
        if self.bin_edges is not None:
            edges = np.asarray(self.bin_edges, dtype=float)
            if edges.ndim != 1 or edges.size < 2 or np.any(np.diff(edges) <= 0):
                raise ValueError("bin_edges must be a strictly increasing list of at least two values")
            self.n_bins = edges.size - 1
        if self.n_bins < 1:
            raise ValueError("n_bins must be >= 1")
        if self.n_slots < self.n_bins:
            raise ValueError(f"n_slots ({self.n_slots}) must be >= n_bins ({self.n_bins})")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")


@dataclass
class SlotMetrics:
    sinr_db: np.ndarray
    bit_errors: np.ndarray
    n_bits: np.ndarray

    @property
    def ber(self) -> np.ndarray:
        return self.bit_errors / self.n_bits


@dataclass
class BinRow:
    center: float
    ber: Optional[float]
    count: int


def make_receiver(name: str, checkpoint: str | None = None, model=None) -> Receiver:
    """Callable mapping a batch to hard-decided LLRs ``(B, N_F, N_S, N_T, B_mod)``."""
    if name in BASELINE_RECEIVERS:
        rx = BaselineReceiver(**BASELINE_RECEIVERS[name])
        return lambda batch, rng: rx(batch).llr.bits
    if name == "zero-llr":
        return lambda batch, rng: np.zeros(batch.bits.shape)
    if name in NEURAL_RECEIVERS:
        if model is None:
            if checkpoint is None:
                raise ValueError(f"receiver {name!r} needs a checkpoint")
            from ..training.loop import load_trained_model

            model = load_trained_model(checkpoint)
        want = NEURAL_RECEIVERS[name]
        arch = model.arch
        have = dict(denoise=arch.denoise.enabled, lmmse=arch.equalizer.lmmse, rzf=arch.equalizer.rzf)
        bad = [k for k, v in want.items() if v is not None and have[k] != v]
        if bad:
            raise ValueError(f"checkpoint architecture {have} does not match receiver {name!r}")
        return lambda batch, rng: model.infer_llrs(batch.y, batch.pattern)[..., :batch.modulation_order]
    raise ValueError(f"unknown receiver {name!r}")


def sweep_batches(scenario: Scenario, n_slots: int, seed: int, batch_size: int = 16):
    """Deterministic stream of evaluation batches; identical for every receiver."""
    rng = np.random.default_rng([seed, 0])
    left = n_slots
    while left > 0:
        n = min(batch_size, left)
        yield generate_batch(scenario.draw(n, rng))
        left -= n


def slot_metrics(receiver: Receiver, batches, seed: int = 0) -> SlotMetrics:
    """Per-slot realized SINR and hard-decision bit errors on data REs."""
    tie_rng = np.random.default_rng([seed, 1])
    sinr, errs, nbits = [], [], []
    for b in batches:
        llr = receiver(b, tie_rng)
        mask = b.data_mask
        wrong = hard_decision(llr[:, mask], tie_rng) != b.bits[:, mask]
        errs.append(wrong.reshape(len(b), -1).sum(axis=1))
        nbits.append(np.full(len(b), wrong[0].size))
        sinr.append(np.asarray(b.sinr_db, dtype=float))
    return SlotMetrics(np.concatenate(sinr), np.concatenate(errs), np.concatenate(nbits))


def equal_population_edges(sinr_db: np.ndarray, n_bins: int) -> np.ndarray:
    return np.quantile(np.asarray(sinr_db, dtype=float), np.linspace(0.0, 1.0, n_bins + 1))


def bin_by_sinr(m: SlotMetrics, edges: np.ndarray) -> list[BinRow]:
    """Pooled BER per SINR bin; slots outside the outer edges are dropped."""
    edges = np.asarray(edges, dtype=float)
    idx = np.searchsorted(edges, m.sinr_db, side="right") - 1
    idx[m.sinr_db == edges[-1]] = edges.size - 2  # closed last bin
    rows = []
    for k in range(edges.size - 1):
        sel = idx == k
        count = int(sel.sum())
        ber = float(m.bit_errors[sel].sum() / m.n_bits[sel].sum()) if count else None
        rows.append(BinRow(0.5 * (edges[k] + edges[k + 1]), ber, count))
    return rows


def format_csv(rows: list[BinRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for r in rows:
        w.writerow([f"{r.center:.4f}", "" if r.ber is None else f"{r.ber:.8e}", r.count])
    return buf.getvalue()


def run_ber_sweep(spec: SweepSpec, model=None) -> list[BinRow]:
    """Simulate ``spec.n_slots`` slots, decode them and bin the per-slot BER by SINR.

    Bins are equal-population unless ``spec.bin_edges`` is given.  Writes the CSV
    to ``spec.output`` when set.
    """
    receiver = make_receiver(spec.receiver, spec.checkpoint, model)
    m = slot_metrics(receiver, sweep_batches(spec.scenario, spec.n_slots, spec.seed, spec.batch_size), spec.seed)
    edges = np.asarray(spec.bin_edges, dtype=float) if spec.bin_edges is not None else \
        equal_population_edges(m.sinr_db, spec.n_bins)
    rows = bin_by_sinr(m, edges)
    if spec.output:
        Path(spec.output).write_text(format_csv(rows))
    return rows
