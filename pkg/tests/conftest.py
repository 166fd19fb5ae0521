import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def crandn(rng, *shape):
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2.0)


def central_diff(f, x: np.ndarray, idx, h: float = 1e-5) -> float:
    """Central finite difference of scalar ``f`` w.r.t. real entry ``x[idx]`` (modified in place)."""
    old = x[idx]
    x[idx] = old + h
    fp = f()
    x[idx] = old - h
    fm = f()
    x[idx] = old
    return (fp - fm) / (2 * h)


@pytest.fixture(scope="session")
def gain_result(tmp_path_factory):
    """Trained desk models plus per-bin BER of baseline and neural receivers (expensive, run once)."""
    from hybridrx.evaluation.experiment import GainExperiment, run_gain_experiment
    import time

    t0 = time.time()
    res = run_gain_experiment(GainExperiment(out_dir=str(tmp_path_factory.mktemp("gain"))))
    res.seconds["wall"] = time.time() - t0
    return res
