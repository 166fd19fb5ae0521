"""Desk-scale learning-gain experiment: trained receivers versus the conventional baseline."""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..neural.config import preset
from ..neural.model import EqDeepRx
from ..sim.scenario import Scenario
from ..sim.slot import generate_batch
from ..training.loop import TrainConfig, train_loop
from .sweep import SlotMetrics, make_receiver, slot_metrics

log = logging.getLogger(__name__)


@dataclass
class GainExperiment:
    steps: int = 2500
    lr: float = 2e-3
    batch_size: int = 16
    seed: int = 0
    modulation_order: int = 4
    n_subcarriers: int = 48
    n_rx: int = 4
    n_layers: int = 2
    train_sinr_db: tuple[float, float] = (6.0, 22.0)
    bin_edges: tuple[float, ...] = (8.0, 10.0, 12.0, 14.0, 16.0, 18.0, 20.0)
    slots_per_bin: int = 1000
    out_dir: str | None = None

    def scenario(self, sinr_range) -> Scenario:
        return Scenario(n_subcarriers=self.n_subcarriers, n_rx=self.n_rx, n_layers=(self.n_layers,),
                        modulation_order=self.modulation_order, sinr_db_range=tuple(sinr_range))


@dataclass
class GainResult:
    bin_edges: np.ndarray
    ber: dict = field(default_factory=dict)  # receiver -> per-bin BER
    counts: np.ndarray | None = None
    seconds: dict = field(default_factory=dict)
    models: dict = field(default_factory=dict, repr=False)


def binned_eval_batches(exp: GainExperiment, seed: int):
    """Batches whose realized SINR fills every bin with at least ``slots_per_bin`` slots.

    Slots are drawn with target SINRs inside one bin at a time; a slot is kept
    only if its realized SINR lands in that bin.
    """
    edges = exp.bin_edges
    batches = []
    for k in range(len(edges) - 1):
        lo, hi = edges[k], edges[k + 1]
        rng = np.random.default_rng([seed, 7, k])
        sc = exp.scenario((lo, hi))
        kept = 0
        while kept < exp.slots_per_bin:
            b = generate_batch(sc.draw(exp.batch_size, rng))
            sel = np.nonzero((b.sinr_db >= lo) & (b.sinr_db < hi))[0]
            sel = sel[: exp.slots_per_bin - kept]
            if sel.size:
                batches.append(b.select(sel))
                kept += sel.size
    return batches


def per_bin_ber(m: SlotMetrics, edges) -> tuple[np.ndarray, np.ndarray]:
    edges = np.asarray(edges, dtype=float)
    idx = np.searchsorted(edges, m.sinr_db, side="right") - 1
    ber, counts = [], []
    for k in range(edges.size - 1):
        sel = idx == k
        counts.append(int(sel.sum()))
        ber.append(m.bit_errors[sel].sum() / max(m.n_bits[sel].sum(), 1))
    return np.asarray(ber), np.asarray(counts)


def run_gain_experiment(exp: GainExperiment) -> GainResult:
    """Train the full model and the no-denoise ablation, then compare per-bin BER on shared slots."""
    res = GainResult(np.asarray(exp.bin_edges))
    train_sc = exp.scenario(exp.train_sinr_db)
    cfg = TrainConfig(steps=exp.steps, lr=exp.lr, batch_size=exp.batch_size, seed=exp.seed, val_every=0,
                      log_every=max(exp.steps // 10, 1), checkpoint_every=0)
    models = {}
    for name, arch in (("eqdeeprx", preset("desk")),
                       ("eqdeeprx-nodenoise", preset("desk").replace(denoise={"enabled": False}))):
        t0 = time.time()
        model = EqDeepRx(arch, seed=exp.seed)
        out = Path(exp.out_dir) / name if exp.out_dir else None
        train_loop(model, cfg, train_sc, out_dir=out)
        models[name] = model
        res.seconds[f"train:{name}"] = time.time() - t0
        log.info("trained %s in %.0f s", name, res.seconds[f"train:{name}"])

    t0 = time.time()
    batches = binned_eval_batches(exp, exp.seed + 1)
    for name in ("baseline", "eqdeeprx", "eqdeeprx-nodenoise"):
        rx = make_receiver(name, model=models.get(name))
        m = slot_metrics(rx, batches, seed=exp.seed)
        res.ber[name], res.counts = per_bin_ber(m, exp.bin_edges)
    res.seconds["eval"] = time.time() - t0
    res.models = models
    return res
