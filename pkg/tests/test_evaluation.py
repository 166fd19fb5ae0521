import dataclasses
import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hybridrx.evaluation.cli import main
from hybridrx.evaluation.flops import FlopsDims, LayerCost, count_flops, layer_inventory, layer_macs
from hybridrx.evaluation.se import SeParams, compute_spectral_efficiency
from hybridrx.evaluation.sweep import (
    CSV_COLUMNS,
    SlotMetrics,
    SweepSpec,
    bin_by_sinr,
    format_csv,
    make_receiver,
    run_ber_sweep,
    slot_metrics,
    sweep_batches,
)
from hybridrx.neural.config import ArchConfig, preset
from hybridrx.sim.scenario import Scenario

CONFIGS = __import__("pathlib").Path(__file__).resolve().parents[1] / "configs"
SMALL = Scenario(n_subcarriers=24, n_rx=2, n_layers=(1,), modulation_order=2, n_dmrs=(1,))


def run_cli(capsys, *argv):
    code = main([str(a) for a in argv])
    out = capsys.readouterr()
    return code, out.out, out.err


class TestSweep:
    def test_spec_validation(self):
        with pytest.raises(ValueError):
            SweepSpec(n_slots=3, n_bins=5)
        with pytest.raises(ValueError):
            SweepSpec(receiver="nope")
        with pytest.raises(ValueError):
            SweepSpec(bin_edges=[1.0, 1.0])

    def test_deterministic_csv(self, tmp_path):
        spec = SweepSpec(receiver="baseline", scenario=SMALL, n_slots=20, n_bins=3, seed=4)
        a = format_csv(run_ber_sweep(spec))
        b = format_csv(run_ber_sweep(spec))
        assert a == b
        assert a.splitlines()[0] == ",".join(CSV_COLUMNS)
        out = tmp_path / "s.csv"
        run_ber_sweep(dataclasses.replace(spec, output=str(out)))
        assert out.read_text() == a

    def test_equal_population_bins(self):
        rows = run_ber_sweep(SweepSpec(scenario=SMALL, n_slots=40, n_bins=4, seed=0))
        assert sum(r.count for r in rows) == 40
        assert all(r.count == 10 for r in rows)

    def test_empty_bin_row(self):
        m = SlotMetrics(np.array([1.0, 2.0, 9.0]), np.array([1, 0, 2]), np.array([10, 10, 10]))
        rows = bin_by_sinr(m, np.array([0.0, 3.0, 6.0, 10.0]))
        assert [r.count for r in rows] == [2, 0, 1]
        assert rows[1].ber is None and math.isclose(rows[0].ber, 0.05)
        assert format_csv(rows).splitlines()[2] == "4.5000,,0"

    def test_zero_llr_chance_level(self):
        rx = make_receiver("zero-llr")
        m = slot_metrics(rx, sweep_batches(SMALL, 170, seed=2, batch_size=64), seed=2)
        n = m.n_bits.sum()
        assert n >= 1e5
        assert abs(m.bit_errors.sum() / n - 0.5) < 0.01

    def test_high_snr_perfect_csi_qpsk(self):
        sc = Scenario(n_subcarriers=48, n_rx=4, n_layers=(2,), modulation_order=2, n_dmrs=(1,),
                      snr_db_range=(40.0, 40.0), inr_mean_db=None)
        m = slot_metrics(make_receiver("baseline-perfect"), sweep_batches(sc, 401, seed=0, batch_size=64))
        assert m.n_bits.sum() >= 1e6
        assert m.bit_errors.sum() / m.n_bits.sum() < 1e-5

    def test_baseline_ber_monotone_in_sinr(self):
        sc = Scenario(n_subcarriers=24, n_rx=4, n_layers=(2,), modulation_order=4, n_dmrs=(2,),
                      sinr_db_range=(0.0, 20.0), delay_range=(0.002, 0.01))
        rows = run_ber_sweep(SweepSpec(scenario=sc, n_slots=2500, n_bins=5, seed=1, batch_size=64))
        ber = [r.ber for r in rows if r.count >= 500]
        assert len(ber) == 5
        inversions = [(a, b) for a, b in zip(ber, ber[1:]) if b > a]
        assert len(inversions) <= 1 and all(b <= 1.1 * a for a, b in inversions), ber

    def test_neural_receiver_requires_matching_checkpoint(self):
        from hybridrx.neural.model import EqDeepRx

        model = EqDeepRx(preset("desk").replace(denoise={"enabled": False}))
        with pytest.raises(ValueError, match="does not match"):
            make_receiver("eqdeeprx", model=model)
        make_receiver("eqdeeprx-nodenoise", model=model)
        with pytest.raises(ValueError, match="checkpoint"):
            make_receiver("eqdeeprx")


class TestSpectralEfficiency:
    def test_reference_value(self):
        p = SeParams(n_t=4, q_m=6, r=0.46, bler_target=0.1, rho_re=13 / 14, gamma=0.93)
        assert abs(compute_spectral_efficiency(p) - 8.58) < 1e-2

    def test_full_bler_is_zero(self):
        assert compute_spectral_efficiency(SeParams(4, 6, 0.5, 1.0, 1.0, 1.0)) == 0.0

    @settings(max_examples=50)
    @given(st.integers(1, 8), st.sampled_from([2, 4, 6, 8]), st.floats(0.05, 0.95), st.floats(0, 1),
           st.floats(0.1, 1), st.floats(0.1, 1))
    def test_linear(self, n_t, q_m, r, bler, rho, gamma):
        base = compute_spectral_efficiency(SeParams(n_t, q_m, r, bler, rho, gamma))
        assert math.isclose(compute_spectral_efficiency(SeParams(2 * n_t, q_m, r, bler, rho, gamma)), 2 * base,
                            rel_tol=1e-12, abs_tol=1e-15)
        assert math.isclose(compute_spectral_efficiency(SeParams(n_t, 2 * q_m, r, bler, rho, gamma)), 2 * base,
                            rel_tol=1e-12, abs_tol=1e-15)

    @pytest.mark.parametrize("kw", [dict(r=1.0), dict(r=0.0), dict(bler_target=1.5), dict(rho_re=0.0),
                                    dict(gamma=1.2), dict(n_t=0)])
    def test_invalid(self, kw):
        base = dict(n_t=4, q_m=6, r=0.5, bler_target=0.1, rho_re=0.9, gamma=0.9)
        with pytest.raises(ValueError):
            SeParams(**{**base, **kw})


class TestFlops:
    def test_total_is_sum_of_parts(self):
        for name in ("0.25x", "0.5x", "1x", "4x", "desk"):
            r = count_flops(preset(name))
            assert r.total == r.denoise + r.detect + r.demap

    def test_reference_band(self):
        assert 0.37 * 0.75 <= count_flops(preset("1x")).total / 1e9 <= 0.37 * 1.25

    def test_channel_doubling(self):
        def by_kind(arch):
            out = {"depthwise": 0, "pointwise": 0}
            for layer in layer_inventory(arch, FlopsDims()):
                if layer.block == "detect" and layer.kind in out and layer.c_in == layer.c_out:
                    out[layer.kind] += layer_macs(layer)
            return out

        a = by_kind(ArchConfig())
        b = by_kind(ArchConfig().replace(detector={"channels": 128}))
        assert b["pointwise"] == 4 * a["pointwise"]
        assert b["depthwise"] == 2 * a["depthwise"]

    def test_layer_scaling(self):
        f2 = count_flops(preset("1x"), FlopsDims(n_layers=2), normalize=False)
        f4 = count_flops(preset("1x"), FlopsDims(n_layers=4), normalize=False)
        assert f4.detect + f4.demap == 2 * (f2.detect + f2.demap)

    def test_unknown_layer_rejected(self):
        with pytest.raises(ValueError, match="unknown layer"):
            layer_macs(LayerCost("detect", "attention", 1, 1, 1))
        with pytest.raises(ValueError, match="unknown block"):
            count_flops(ArchConfig(), layers=[LayerCost("decoder", "pointwise", 1, 1, 1)])

    def test_nodenoise_has_no_denoise_cost(self):
        r = count_flops(preset("1x").replace(denoise={"enabled": False}))
        assert r.denoise == 0 and r.total == r.detect + r.demap


class TestCli:
    def test_se(self, capsys):
        code, out, _ = run_cli(capsys, "se", "--nt", 4, "--qm", 6, "--r", 0.46, "--bler", 0.1, "--rho", 0.9286,
                               "--gamma", 0.93)
        assert code == 0
        d = json.loads(out)
        assert d["schema_version"] == 1 and abs(d["spectral_efficiency"] - 8.58) < 1e-2

    def test_flops_from_config(self, capsys):
        code, out, _ = run_cli(capsys, "flops", "--arch", CONFIGS / "table1.toml")
        assert code == 0
        rep = json.loads(out)["report"]
        assert rep["total"] == rep["denoise"] + rep["detect"] + rep["demap"]
        _, out2, _ = run_cli(capsys, "flops", "--arch", "1x")
        assert json.loads(out2)["report"] == rep

    def test_eval_deterministic(self, capsys):
        args = ("eval", "--receiver", "baseline", "--snr", 10, "--seed", 1, "--n-slots", 12, "--n-bins", 2,
                "--subcarriers", 24, "--rx", 2, "--layers", 1)
        code, a, _ = run_cli(capsys, *args)
        _, b, _ = run_cli(capsys, *args)
        assert code == 0 and a == b
        assert json.loads(a)["csv"].startswith("sinr_bin_center,uncoded_ber,sample_count")

    def test_simulate_and_train_and_eval_checkpoint(self, capsys, tmp_path):
        code, out, _ = run_cli(capsys, "simulate", "--config", CONFIGS / "tiny.toml", "--seed", 0, "--n-slots", 3,
                               "--output", tmp_path / "b.bin")
        assert code == 0 and json.loads(out)["dims"] == [3, 24, 14, 2]
        code, out, _ = run_cli(capsys, "train", "--config", CONFIGS / "tiny.toml", "--seed", 0,
                               "--out-dir", tmp_path / "run")
        assert code == 0
        summary = json.loads(out)
        assert summary["steps"] == 4 and summary["final_val_ber"] is not None
        code, out, _ = run_cli(capsys, "eval", "--config", CONFIGS / "tiny.toml", "--seed", 0,
                               "--receiver", "eqdeeprx", "--checkpoint", summary["checkpoint"],
                               "--n-slots", 4, "--n-bins", 1)
        assert code == 0 and json.loads(out)["bins"][0]["sample_count"] == 4

    @pytest.mark.parametrize("argv", [
        ["eval", "--seed", "1", "--bogus"],
        ["eval", "--receiver", "baseline"],  # --seed is mandatory
        ["frobnicate"],
        ["se", "--nt", "4"],
    ])
    def test_usage_errors_exit_nonzero(self, argv, capsys):
        with pytest.raises(SystemExit) as exc:
            main(argv)
        assert exc.value.code == 2
        assert "usage" in capsys.readouterr().err

    @pytest.mark.parametrize("argv", [
        ["se", "--nt", "4", "--qm", "6", "--r", "1.5", "--bler", "0.1", "--rho", "0.9", "--gamma", "0.9"],
        ["flops", "--arch", "not-a-preset"],
        ["eval", "--seed", "1", "--n-slots", "2", "--n-bins", "5"],
        ["eval", "--seed", "1", "--bin-edges", "1,x"],
    ])
    def test_invalid_values_exit_nonzero(self, argv, capsys):
        code, _, err = run_cli(capsys, *argv)
        assert code == 2 and "usage" in err and "error" in err

    def test_invalid_config_file(self, tmp_path, capsys):
        bad = tmp_path / "bad.toml"
        bad.write_text("[sim]\nnot_a_field = 3\n")
        code, _, err = run_cli(capsys, "simulate", "--config", bad, "--seed", 0)
        assert code == 2 and "not_a_field" in err
        bad.write_text("this is = = not toml")
        code, _, err = run_cli(capsys, "simulate", "--config", bad, "--seed", 0)
        assert code == 2
