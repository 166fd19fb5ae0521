import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hybridrx.neural.config import ArchConfig, preset
from hybridrx.neural.model import EqDeepRx
from hybridrx.sim.scenario import Scenario
from hybridrx.sim.slot import SlotConfig, generate_batch
from hybridrx.tensor import Tensor, backward
from hybridrx.training import (
    Adam,
    TrainConfig,
    TrainingError,
    composite_loss,
    linear_decay,
    mvcl_penalty,
    read_metrics,
    snr_weight,
    train_loop,
)

from .conftest import central_diff, crandn

TINY = ArchConfig.from_dict({
    "preset": "desk",
    "detector": {"channels": 8, "sections": 2, "kernel_freq": 5, "kernel_time": 5},
    "denoise": {"filters": (8, 2), "subsample": (1, 1), "kernel": 5},
    "demapper": {"filters": (8, 8)},
})
SCENARIO = Scenario(n_subcarriers=24, n_rx=2, n_layers=(1,), modulation_order=2, n_dmrs=(1,),
                    snr_db_range=(5.0, 15.0))


def bits_and_symbols(rng, shape=(2, 6, 14, 2), order=2):
    bits = rng.integers(0, 2, shape + (order,))
    return bits, crandn(rng, *shape)


class TestCompositeLoss:
    def test_perfect_predictions(self, rng):
        bits, x = bits_and_symbols(rng)
        llr = np.where(bits == 0, 30.0, -30.0)
        loss = composite_loss(llr, bits, [x, x], x, 1.0)
        assert loss.bit_loss <= 1e-10
        assert loss.symbol_loss == 0.0

    def test_uniform_llrs_cost_ln2(self, rng):
        bits, x = bits_and_symbols(rng)
        loss = composite_loss(np.zeros(bits.shape), bits, [], x, 1.0)
        assert math.isclose(loss.bit_loss_raw, math.log(2), rel_tol=1e-12)

    def test_unit_snr_weight(self):
        assert snr_weight(1.0) == 1.0

    @settings(max_examples=50, deadline=None)
    @given(st.floats(1e-3, 1e4), st.floats(1e-3, 1e4))
    def test_weight_monotone(self, a, b):
        if a < b:
            assert snr_weight(a) < snr_weight(b)

    def test_non_positive_snr_rejected(self):
        with pytest.raises(ValueError):
            snr_weight(0.0)

    def test_breakdown_consistent(self, rng):
        bits, x = bits_and_symbols(rng)
        llr = rng.standard_normal(bits.shape) * 3
        snr = np.array([2.0, 30.0])
        secs = [x + 0.1 * crandn(rng, *x.shape) for _ in range(3)]
        mask = np.ones((6, 14), bool)
        mask[:, 2] = False
        mv = 0.25
        loss = composite_loss(llr, bits, secs, x, snr, mask, lambda_sym=1e-2, mvcl=mv)
        # independent evaluation of the same quantities
        p1 = 1 / (1 + np.exp(llr))
        ce = -(bits * np.log(p1) + (1 - bits) * np.log(1 - p1))
        ce_q = ce[:, mask].reshape(2, -1).mean(axis=1)
        sym_q = sum((np.abs(s - x) ** 2)[:, mask].reshape(2, -1).sum(axis=1) for s in secs)
        w = np.log2(1 + snr)
        assert math.isclose(float(loss.total.data), np.mean(w * (ce_q + 1e-2 * sym_q)) + mv, rel_tol=1e-10)
        assert math.isclose(loss.bit_loss + loss.symbol_loss + loss.mvcl, float(loss.total.data), rel_tol=1e-12)
        assert min(loss.bit_loss, loss.symbol_loss, loss.mvcl) >= 0

    def test_pilot_res_excluded(self, rng):
        bits, x = bits_and_symbols(rng)
        mask = np.ones((6, 14), bool)
        mask[:, 2] = False
        llr = rng.standard_normal(bits.shape)
        a = composite_loss(llr, bits, [x * 2], x, 3.0, mask)
        llr[:, :, 2] = 100.0
        x2 = x.copy()
        x2[:, :, 2] = 5.0
        b = composite_loss(llr, bits, [x * 2], x2, 3.0, mask)
        assert math.isclose(float(a.total.data), float(b.total.data), rel_tol=1e-13)

    def test_shape_mismatch_rejected(self, rng):
        bits, x = bits_and_symbols(rng)
        with pytest.raises(ValueError):
            composite_loss(np.zeros(bits.shape[:-1] + (1,)), bits, [], x, 1.0)
        with pytest.raises(ValueError):
            composite_loss(np.zeros(bits.shape), bits, [], x[..., :1], 1.0)

    def test_gradient_wrt_llrs(self, rng):
        bits, x = bits_and_symbols(rng, (2, 4, 3, 2), order=4)
        llr = Tensor(rng.standard_normal(bits.shape) * 4, requires_grad=True)
        snr = np.array([0.5, 8.0])
        backward(composite_loss(llr, bits, [], x, snr).total)
        f = lambda: float(composite_loss(llr.data, bits, [], x, snr).total.data)
        for idx in list(np.ndindex(llr.shape))[::7]:
            fd = central_diff(f, llr.data, idx)
            assert abs(llr.grad[idx] - fd) <= 1e-4 * abs(fd) + 1e-12


class TestMvcl:
    def test_standardized_activations(self, rng):
        a = rng.standard_normal((500, 3))
        a = (a - a.mean(0)) / a.std(0)
        assert abs(float(mvcl_penalty([Tensor(a)], alpha=0.1).data)) < 1e-25

    def test_constant_single_channel(self):
        c, alpha = 1.7, 0.3
        val = float(mvcl_penalty([Tensor(np.full((4, 5, 1), c))], alpha=alpha).data)
        assert math.isclose(val, alpha * (c ** 2 + 1), rel_tol=1e-12)

    def test_alpha_zero(self, rng):
        assert float(mvcl_penalty([Tensor(rng.standard_normal((3, 2)))], alpha=0.0).data) == 0.0

    def test_sums_over_layers_and_gradient(self, rng):
        acts = [Tensor(rng.standard_normal((6, 5, 3)) * 2 + 1, requires_grad=True),
                Tensor(rng.standard_normal((4, 2)), requires_grad=True)]
        pen = mvcl_penalty(acts, alpha=0.5, mean_target=0.2, var_target=1.5)
        parts = [float(mvcl_penalty([a], 0.5, 0.2, 1.5).data) for a in acts]
        assert math.isclose(float(pen.data), sum(parts), rel_tol=1e-12)
        backward(pen)
        a = acts[0]
        f = lambda: float(mvcl_penalty([Tensor(a.data)], 0.5, 0.2, 1.5).data)
        for idx in [(0, 0, 0), (3, 2, 1), (5, 4, 2)]:
            fd = central_diff(f, a.data, idx)
            assert abs(a.grad[idx] - fd) <= 1e-4 * abs(fd) + 1e-12

    def test_negative_alpha_rejected(self):
        with pytest.raises(ValueError):
            mvcl_penalty([], alpha=-1.0)


class TestOptimizer:
    def test_linear_decay(self):
        assert linear_decay(0, 100, 1e-3) == 1e-3
        assert math.isclose(linear_decay(50, 100, 1e-3), 5e-4)
        assert linear_decay(100, 100, 1e-3) == 0.0

    @pytest.mark.parametrize("kind", ["adam", "lamb"])
    def test_minimizes_quadratic(self, kind):
        w = Tensor(np.array([3.0, -2.0]), requires_grad=True)
        opt = Adam({"w": w}, kind=kind)
        for step in range(300):
            opt.zero_grad()
            backward((w * w).sum())
            opt.step(0.05)
        assert np.all(np.abs(w.data) < 0.1)

    def test_state_roundtrip(self):
        w = Tensor(np.ones(3), requires_grad=True)
        opt = Adam({"w": w})
        backward((w * w).sum())
        opt.step(0.1)
        state = opt.state_tensors()
        opt2 = Adam({"w": Tensor(np.ones(3), requires_grad=True)})
        opt2.load_state_tensors(state, 1)
        for k, v in opt2.state_tensors().items():
            np.testing.assert_array_equal(v, state[k])


class TestTrainLoop:
    def test_config_validation(self):
        with pytest.raises(ValueError):
            TrainConfig(lambda_sym=-1.0)
        with pytest.raises(ValueError):
            TrainConfig(optimizer="sgd")

    def test_lr_zero_keeps_parameters(self):
        model = EqDeepRx(TINY, seed=0, zero_final=False)
        before = {n: p.data.copy() for n, p in model.named_parameters()}
        train_loop(model, TrainConfig(steps=5, lr=0.0, batch_size=2, val_every=0), SCENARIO)
        for n, p in model.named_parameters():
            assert p.data.tobytes() == before[n].tobytes(), n

    def test_overfit_single_batch(self):
        model = EqDeepRx(TINY, seed=0)
        fixed = generate_batch([SlotConfig(n_subcarriers=24, n_rx=2, n_layers=1, modulation_order=2,
                                           snr_db=10.0, delay_spread_norm=0.01, seed=s) for s in range(2)])
        cfg = TrainConfig(steps=500, lr=3e-3, batch_size=2, val_every=0, log_every=1, mvcl_alpha=0.0)
        res = train_loop(model, cfg, SCENARIO, fixed_batch=fixed)
        losses = np.array([r["total"] for r in res.metrics])
        assert losses.size == 500
        windows = losses.reshape(10, 50).mean(axis=1)
        assert np.all(np.diff(windows) < 0), windows

    def test_resume_reproduces_trajectory(self, tmp_path):
        cfg = TrainConfig(steps=12, lr=2e-3, batch_size=2, val_every=6, val_slots=2, log_every=2,
                          checkpoint_every=4, seed=3)
        full = train_loop(EqDeepRx(TINY, seed=1), cfg, SCENARIO, out_dir=tmp_path / "full")
        part = tmp_path / "part"
        train_loop(EqDeepRx(TINY, seed=1), cfg, SCENARIO, out_dir=part, stop_after=7)
        # the interrupted run saves its state at step 7
        resumed = train_loop(EqDeepRx(TINY, seed=1), cfg, SCENARIO, out_dir=part, resume_from=part / "checkpoint.bin")
        assert (part / "metrics.csv").read_text() == (tmp_path / "full" / "metrics.csv").read_text()
        for (n, a), (_, b) in zip(full.model.named_parameters(), resumed.model.named_parameters()):
            assert a.data.tobytes() == b.data.tobytes(), n
        rows = read_metrics(part / "metrics.csv")
        assert [int(r["step"]) for r in rows] == [2, 4, 6, 8, 10, 12]
        assert rows[2]["val_ber"] != "" and rows[0]["val_ber"] == ""

    def test_deterministic_logs(self, tmp_path):
        cfg = TrainConfig(steps=4, lr=1e-3, batch_size=2, val_every=2, val_slots=2, log_every=1, seed=9)
        for d in ("a", "b"):
            train_loop(EqDeepRx(TINY, seed=2), cfg, SCENARIO, out_dir=tmp_path / d)
        assert (tmp_path / "a/metrics.csv").read_bytes() == (tmp_path / "b/metrics.csv").read_bytes()

    def test_non_finite_halts_with_stage(self):
        model = EqDeepRx(TINY, seed=0)
        next(p for n, p in model.named_parameters() if n.startswith("detector")).data[...] = np.nan
        with pytest.raises(TrainingError) as exc:
            train_loop(model, TrainConfig(steps=3, batch_size=2, val_every=0), SCENARIO)
        assert exc.value.stage == "detector"

    def test_bad_resume_path(self, tmp_path):
        with pytest.raises(TrainingError) as exc:
            train_loop(EqDeepRx(TINY), TrainConfig(steps=1, batch_size=1, val_every=0), SCENARIO,
                       resume_from=tmp_path / "missing.bin")
        assert exc.value.stage == "checkpoint"
