"""Online-data training loop with validation BER, metrics CSV and resumable checkpoints."""

from __future__ import annotations

import csv
import dataclasses
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from ..classic.demap import hard_decision
from ..neural.model import EqDeepRx, StageError
from ..sim.scenario import Scenario
from ..sim.slot import SlotBatch, generate_batch
from ..tensor import checkpoint
from .losses import composite_loss, mvcl_penalty
from .optim import Adam, linear_decay

log = logging.getLogger(__name__)

METRIC_FIELDS = ("step", "total", "bit_loss", "symbol_loss", "mvcl", "val_ber", "lr")
TRAIN_SCHEMA = "hybridrx.train/1"
_VAL_STREAM = 1 << 20  # rng key separating validation draws from step draws


class TrainingError(RuntimeError):
    def __init__(self, stage: str, message: str):
        self.stage = stage
        super().__init__(f"[{stage}] {message}")


@dataclass(frozen=True)
class TrainConfig:
    batch_size: int = 16
    lr: float = 1e-3
    steps: int = 20000
    lambda_sym: float = 1e-4
    mvcl_alpha: float = 1e-5
    mvcl_mean: float = 0.0
    mvcl_var: float = 1.0
    optimizer: str = "adam"
    seed: int = 0
    grad_clip: Optional[float] = None
    log_every: int = 50
    val_every: int = 500
    val_slots: int = 64
    checkpoint_every: int = 1000

    def __post_init__(self):
        if self.lambda_sym < 0 or self.mvcl_alpha < 0:
            raise ValueError("lambda_sym and mvcl_alpha must be >= 0")
        if self.batch_size < 1 or self.steps < 0:
            raise ValueError("batch_size must be >= 1 and steps >= 0")
        if self.optimizer not in ("adam", "lamb"):
            raise ValueError(f"unknown optimizer {self.optimizer!r}")

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


@dataclass
class TrainResult:
    model: EqDeepRx
    metrics: list[dict] = field(default_factory=list)
    checkpoint_path: Optional[Path] = None
    steps_done: int = 0


def step_batch(scenario: Scenario, cfg: TrainConfig, step: int) -> SlotBatch:
    """Fresh training batch for ``step``; depends only on the seed and step index."""
    rng = np.random.default_rng([cfg.seed, step])
    return generate_batch(scenario.draw(cfg.batch_size, rng))


def validation_batches(scenario: Scenario, cfg: TrainConfig) -> list[SlotBatch]:
    rng = np.random.default_rng([cfg.seed, _VAL_STREAM])
    out, left = [], cfg.val_slots
    while left > 0:
        n = min(left, cfg.batch_size)
        out.append(generate_batch(scenario.draw(n, rng)))
        left -= n
    return out


def uncoded_ber(model: EqDeepRx, batches: list[SlotBatch]) -> float:
    errors = total = 0
    for b in batches:
        llr = model.infer_llrs(b.y, b.pattern)[..., :b.modulation_order]
        mask = b.data_mask
        errors += int(np.sum(hard_decision(llr[:, mask]) != b.bits[:, mask]))
        total += b.bits[:, mask].size
    return errors / max(total, 1)


def training_loss(model: EqDeepRx, batch: SlotBatch, cfg: TrainConfig):
    out = model.forward(batch.y, batch.pattern, collect_activations=cfg.mvcl_alpha > 0)
    mv = mvcl_penalty(out.activations, cfg.mvcl_alpha, cfg.mvcl_mean, cfg.mvcl_var)
    snr_lin = 10.0 ** (np.asarray(batch.snr_db, dtype=float) / 10.0)
    return composite_loss(out.llr, batch.bits, out.section_symbols, batch.x, snr_lin, batch.data_mask,
                          cfg.lambda_sym, mv)


def _clip(params, max_norm):
    norm = np.sqrt(sum(float(np.sum(p.grad.astype(np.float64) ** 2)) for p in params if p.grad is not None))
    if norm > max_norm:
        for p in params:
            if p.grad is not None:
                p.grad *= max_norm / norm


def _fmt(v) -> str:
    if v is None or (isinstance(v, float) and np.isnan(v)):
        return ""
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return repr(float(v))


def _write_rows(path: Path, rows: list[dict], append: bool) -> None:
    new = not append or not path.exists()
    with open(path, "a" if not new else "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        if new:
            w.writerow(METRIC_FIELDS)
        for r in rows:
            w.writerow([_fmt(r.get(k)) for k in METRIC_FIELDS])


def read_metrics(path: str | Path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def save_training_checkpoint(path: Path, model: EqDeepRx, opt: Adam, step: int, cfg: TrainConfig,
                             scenario: Scenario) -> None:
    tensors = {**model.state(), **opt.state_tensors()}
    meta = {"schema": TRAIN_SCHEMA, "step": step, "train": cfg.to_dict(), "arch": model.arch.to_dict(),
            "scenario": dataclasses.asdict(scenario)}
    try:
        checkpoint.save(path, tensors, meta)
    except OSError as exc:
        raise TrainingError("checkpoint", f"cannot write {path}: {exc}") from exc


def train_loop(model: EqDeepRx, cfg: TrainConfig, scenario: Scenario | None = None, out_dir: str | Path | None = None,
               resume_from: str | Path | None = None, fixed_batch: SlotBatch | None = None,
               stop_after: int | None = None) -> TrainResult:
    """Train ``model`` in place.

    Each step draws a new batch from ``scenario`` (or reuses ``fixed_batch``),
    minimizes the composite loss plus mVCL with the linearly decaying learning
    rate, and logs metrics every ``log_every`` steps.  With ``out_dir``, metrics go
    to ``metrics.csv`` and checkpoints to ``checkpoint.bin``.  ``resume_from``
    restores parameters, optimizer moments and the step counter; ``stop_after``
    ends the run early (to emulate an interruption).
    """
    scenario = scenario or Scenario()
    params = dict(model.named_parameters())
    opt = Adam(params, kind=cfg.optimizer)
    start = 0
    out = Path(out_dir) if out_dir is not None else None
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
    metrics_path = out / "metrics.csv" if out is not None else None
    ckpt_path = out / "checkpoint.bin" if out is not None else None
    if resume_from is None and metrics_path is not None and metrics_path.exists():
        metrics_path.unlink()  # a fresh run starts a fresh log

    if resume_from is not None:
        try:
            tensors, meta = checkpoint.load(resume_from)
        except (OSError, checkpoint.CheckpointError) as exc:
            raise TrainingError("checkpoint", f"cannot resume from {resume_from}: {exc}") from exc
        if meta.get("schema") != TRAIN_SCHEMA:
            raise TrainingError("checkpoint", f"{resume_from} is not a training checkpoint")
        start = int(meta["step"])
        model.load_state({k: v for k, v in tensors.items() if not k.startswith("opt.")})
        opt.load_state_tensors(tensors, start)
        if metrics_path is not None and metrics_path.exists():
            # drop rows logged after the checkpoint so the log matches an uninterrupted run
            _rewrite_verbatim(metrics_path, [r for r in read_metrics(metrics_path) if int(r["step"]) <= start])

    val = validation_batches(scenario, cfg) if cfg.val_every > 0 and cfg.val_slots > 0 else []
    metrics: list[dict] = []
    end = cfg.steps if stop_after is None else min(cfg.steps, stop_after)
    step = start
    for step in range(start, end):
        batch = fixed_batch if fixed_batch is not None else step_batch(scenario, cfg, step)
        lr = linear_decay(step, cfg.steps, cfg.lr)
        opt.zero_grad()
        try:
            loss = training_loss(model, batch, cfg)
        except StageError as exc:
            raise TrainingError(exc.stage, f"step {step}: {exc}") from exc
        if not np.isfinite(loss.total.data):
            bad = [k for k, v in loss.as_row().items() if not np.isfinite(v)]
            raise TrainingError("loss", f"step {step}: non-finite loss terms {bad}")
        loss.total.backward()
        if cfg.grad_clip is not None:
            _clip(params.values(), cfg.grad_clip)
        for name, p in params.items():
            if p.grad is not None and not np.all(np.isfinite(p.grad)):
                raise TrainingError("gradient", f"step {step}: non-finite gradient for {name}")
        opt.step(lr)

        done = step + 1
        row = None
        if cfg.log_every > 0 and (done % cfg.log_every == 0 or done == cfg.steps):
            row = {"step": done, **loss.as_row(), "val_ber": None, "lr": lr}
        if val and (done % cfg.val_every == 0 or done == cfg.steps):
            row = row or {"step": done, **loss.as_row(), "val_ber": None, "lr": lr}
            row["val_ber"] = uncoded_ber(model, val)
            log.info("step %d loss %.5f val_ber %.5f", done, row["total"], row["val_ber"])
        if row is not None:
            metrics.append(row)
            if metrics_path is not None:
                _write_rows(metrics_path, [row], append=True)
        if ckpt_path is not None and cfg.checkpoint_every > 0 and done % cfg.checkpoint_every == 0:
            save_training_checkpoint(ckpt_path, model, opt, done, cfg, scenario)
    steps_done = end if end > start else start
    if ckpt_path is not None:
        save_training_checkpoint(ckpt_path, model, opt, steps_done, cfg, scenario)
    return TrainResult(model, metrics, ckpt_path, steps_done)


def _rewrite_verbatim(path: Path, rows: list[dict]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(METRIC_FIELDS)
        for r in rows:
            w.writerow([r[k] for k in METRIC_FIELDS])


def load_trained_model(path: str | Path) -> EqDeepRx:
    """Model from either a training or a model checkpoint."""
    from ..neural.config import ArchConfig

    tensors, meta = checkpoint.load(path)
    model = EqDeepRx(ArchConfig.from_dict(meta["arch"]))
    model.load_state({k: v for k, v in tensors.items() if not k.startswith("opt.")})
    return model
