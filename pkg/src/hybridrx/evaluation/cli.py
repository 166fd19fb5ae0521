"""Command-line entry point: ``simulate``, ``train``, ``eval``, ``flops`` and ``se``."""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import sys
from pathlib import Path

import numpy as np

from ..neural.config import PRESETS, ArchConfig, preset
from ..sim.scenario import Scenario
from ..tensor import checkpoint
from .flops import FlopsDims, count_flops
from .se import SeParams, compute_spectral_efficiency
from .sweep import RECEIVERS, SweepSpec, format_csv, run_ber_sweep, sweep_batches

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

SCHEMA_VERSION = 1


class UsageError(ValueError):
    pass


def _load_config(path: str | None) -> dict:
    if path is None:
        return {}
    try:
        with open(path, "rb") as fh:
            return tomllib.load(fh)
    except (OSError, tomllib.TOMLDecodeError) as exc:
        raise UsageError(f"cannot read config {path}: {exc}") from exc


def _scenario(cfg: dict, args) -> Scenario:
    sim = dict(cfg.get("sim", {}))
    names = {f.name for f in dataclasses.fields(Scenario)}
    bad = set(sim) - names
    if bad:
        raise UsageError(f"unknown keys in [sim]: {sorted(bad)}")
    flags = {
        "n_subcarriers": args.subcarriers, "n_rx": args.rx, "modulation_order": args.order,
        "inr_std_db": args.inr_std,
    }
    sim.update({k: v for k, v in flags.items() if v is not None})
    if args.layers is not None:
        sim["n_layers"] = (args.layers,)
    if args.dmrs is not None:
        sim["n_dmrs"] = (args.dmrs,)
    if args.snr is not None:
        sim["snr_db_range"] = (args.snr, args.snr)
        sim["sinr_db_range"] = None
    if args.sinr_range is not None:
        sim["sinr_db_range"] = tuple(args.sinr_range)
    if args.inr is not None:
        sim["inr_mean_db"] = args.inr
    if args.no_interference:
        sim["inr_mean_db"] = None
    if args.doppler is not None:
        sim["doppler_range"] = (args.doppler, args.doppler)
    if args.delay is not None:
        sim["delay_range"] = (args.delay, args.delay)
    for key in ("n_layers", "n_dmrs", "snr_db_range", "sinr_db_range", "doppler_range", "delay_range"):
        if isinstance(sim.get(key), list):
            sim[key] = tuple(sim[key])
    return Scenario(**sim)


def _arch(spec: str | None, cfg: dict) -> ArchConfig:
    if spec is None:
        return ArchConfig.from_dict(cfg["arch"]) if "arch" in cfg else preset("desk")
    if spec in PRESETS:
        return preset(spec)
    if not Path(spec).exists():
        raise UsageError(f"--arch must be a preset {sorted(PRESETS)} or a TOML file, got {spec!r}")
    return ArchConfig.from_toml(spec)


def _summary(command: str, **payload) -> dict:
    return {"schema_version": SCHEMA_VERSION, "command": command, **payload}


# -- commands ---------------------------------------------------------------------

def cmd_simulate(args, cfg) -> dict:
    scenario = _scenario(cfg, args)
    n = args.n_slots or cfg.get("simulate", {}).get("n_slots", 16)
    batches = list(sweep_batches(scenario, n, args.seed, batch_size=n))
    b = batches[0]
    if args.output:
        checkpoint.save(args.output, {"y": b.y, "x": b.x, "bits": b.bits.astype(np.float64), "h": b.h,
                                      "snr_db": b.snr_db, "sinr_db": b.sinr_db},
                        {"schema": "hybridrx.batch/1", "seed": args.seed, "scenario": dataclasses.asdict(scenario)})
    return _summary("simulate", seed=args.seed, n_slots=n, output=args.output,
                    mean_sinr_db=round(float(np.mean(b.sinr_db)), 6),
                    mean_rx_power=round(float(np.mean(np.abs(b.y) ** 2)), 6),
                    dims=list(b.y.shape))


def cmd_train(args, cfg) -> dict:
    from ..neural.model import EqDeepRx
    from ..training.loop import TrainConfig, train_loop

    scenario = _scenario(cfg, args)
    tc = dict(cfg.get("train", {}))
    names = {f.name for f in dataclasses.fields(TrainConfig)}
    bad = set(tc) - names
    if bad:
        raise UsageError(f"unknown keys in [train]: {sorted(bad)}")
    flags = {"steps": args.steps, "batch_size": args.batch_size, "lr": args.lr, "optimizer": args.optimizer,
             "val_every": args.val_every, "val_slots": args.val_slots}
    tc.update({k: v for k, v in flags.items() if v is not None})
    tc["seed"] = args.seed
    train_cfg = TrainConfig(**tc)
    arch = _arch(args.arch, cfg)
    model = EqDeepRx(arch, seed=args.seed)
    result = train_loop(model, train_cfg, scenario, out_dir=args.out_dir, resume_from=args.resume)
    last = result.metrics[-1] if result.metrics else {}
    vals = [r["val_ber"] for r in result.metrics if r.get("val_ber") is not None]
    return _summary("train", seed=args.seed, steps=result.steps_done, checkpoint=str(result.checkpoint_path),
                    final_loss=last.get("total"), final_val_ber=vals[-1] if vals else None)


def cmd_eval(args, cfg) -> dict:
    scenario = _scenario(cfg, args)
    ev = dict(cfg.get("eval", {}))
    edges = None
    if args.bin_edges:
        try:
            edges = [float(v) for v in args.bin_edges.split(",")]
        except ValueError as exc:
            raise UsageError(f"--bin-edges must be comma-separated numbers: {exc}") from exc
    elif "bin_edges" in ev:
        edges = list(ev["bin_edges"])
    spec = SweepSpec(
        receiver=args.receiver or ev.get("receiver", "baseline"),
        scenario=scenario,
        n_slots=args.n_slots or ev.get("n_slots", 2000),
        n_bins=args.n_bins or ev.get("n_bins", 10),
        bin_edges=edges,
        seed=args.seed,
        checkpoint=args.checkpoint or ev.get("checkpoint"),
        output=args.output,
    )
    rows = run_ber_sweep(spec)
    return _summary("eval", seed=args.seed, receiver=spec.receiver, n_slots=spec.n_slots, output=spec.output,
                    csv=format_csv(rows),
                    bins=[{"sinr_bin_center": round(r.center, 4), "uncoded_ber": r.ber, "sample_count": r.count}
                          for r in rows])


def cmd_flops(args, cfg) -> dict:
    arch = _arch(args.arch, cfg)
    fl = dict(cfg.get("flops", {}))
    names = {f.name for f in dataclasses.fields(FlopsDims)}
    bad = set(fl) - names
    if bad:
        raise UsageError(f"unknown keys in [flops]: {sorted(bad)}")
    flags = {"n_subcarriers": args.subcarriers, "n_symbols": args.symbols, "n_rx": args.rx,
             "n_layers": args.layers, "n_dmrs": args.dmrs}
    fl.update({k: v for k, v in flags.items() if v is not None})
    report = count_flops(arch, FlopsDims(**fl), normalize=not args.no_normalize)
    return _summary("flops", report=report.to_dict(), gflops_total=report.total / 1e9)


def cmd_se(args, cfg) -> dict:
    p = SeParams(n_t=args.nt, q_m=args.qm, r=args.r, bler_target=args.bler, rho_re=args.rho, gamma=args.gamma)
    return _summary("se", params=dataclasses.asdict(p), spectral_efficiency=compute_spectral_efficiency(p))


# -- parser -----------------------------------------------------------------------

def _sim_flags(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("simulation")
    g.add_argument("--snr", type=float, help="fixed SNR in dB")
    g.add_argument("--sinr-range", type=float, nargs=2, metavar=("LO", "HI"), help="target SINR range in dB")
    g.add_argument("--inr", type=float, help="mean interference-to-noise ratio in dB")
    g.add_argument("--inr-std", type=float, help="INR spread in dB")
    g.add_argument("--no-interference", action="store_true")
    g.add_argument("--order", type=int, help="bits per QAM symbol (2, 4, 6, 8)")
    g.add_argument("--subcarriers", type=int)
    g.add_argument("--rx", type=int, help="receive antennas")
    g.add_argument("--layers", type=int, help="MIMO layers")
    g.add_argument("--dmrs", type=int, choices=(1, 2), help="DMRS symbols per slot")
    g.add_argument("--doppler", type=float, help="normalized Doppler")
    g.add_argument("--delay", type=float, help="normalized RMS delay spread")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hybridrx", description="MIMO-OFDM hybrid receiver toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="generate slots and report statistics")
    p.add_argument("--config")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--n-slots", type=int)
    p.add_argument("--output", help="write the batch to this container file")
    _sim_flags(p)

    p = sub.add_parser("train", help="train the neural receiver")
    p.add_argument("--config")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--arch", help=f"preset {sorted(PRESETS)} or TOML file")
    p.add_argument("--steps", type=int)
    p.add_argument("--batch-size", type=int)
    p.add_argument("--lr", type=float)
    p.add_argument("--optimizer", choices=("adam", "lamb"))
    p.add_argument("--val-every", type=int)
    p.add_argument("--val-slots", type=int)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--resume", help="training checkpoint to resume from")
    _sim_flags(p)

    p = sub.add_parser("eval", help="BER sweep binned by realized SINR")
    p.add_argument("--config")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--receiver", choices=RECEIVERS)
    p.add_argument("--checkpoint")
    p.add_argument("--n-slots", type=int)
    p.add_argument("--n-bins", type=int)
    p.add_argument("--bin-edges", help="comma-separated SINR bin edges in dB")
    p.add_argument("--output", help="CSV output path")
    _sim_flags(p)

    p = sub.add_parser("flops", help="FLOPs per inference of the neural blocks")
    p.add_argument("--config")
    p.add_argument("--arch", help=f"preset {sorted(PRESETS)} or TOML file")
    p.add_argument("--subcarriers", type=int)
    p.add_argument("--symbols", type=int)
    p.add_argument("--rx", type=int)
    p.add_argument("--layers", type=int)
    p.add_argument("--dmrs", type=int, choices=(1, 2))
    p.add_argument("--no-normalize", action="store_true", help="report totals for all layers and subcarriers")

    p = sub.add_parser("se", help="spectral efficiency")
    p.add_argument("--config")
    p.add_argument("--nt", type=int, required=True)
    p.add_argument("--qm", type=int, required=True)
    p.add_argument("--r", type=float, required=True)
    p.add_argument("--bler", type=float, required=True)
    p.add_argument("--rho", type=float, required=True)
    p.add_argument("--gamma", type=float, required=True)
    return parser


COMMANDS = {"simulate": cmd_simulate, "train": cmd_train, "eval": cmd_eval, "flops": cmd_flops, "se": cmd_se}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)  # exits with status 2 and usage on bad flags
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = _load_config(getattr(args, "config", None))
        summary = COMMANDS[args.command](args, cfg)
    except (UsageError, ValueError, TypeError) as exc:
        parser.print_usage(sys.stderr)
        print(f"{parser.prog} {args.command}: error: {exc}", file=sys.stderr)
        return 2
    json.dump(summary, sys.stdout, indent=2, sort_keys=True)
    sys.stdout.write("\n")
    return 0


if __name__ == "__main__":
    sys.exit(main())
