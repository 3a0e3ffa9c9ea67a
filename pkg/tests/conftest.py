import numpy as np
import pytest

from ehfusion.signal_model import SignalPrior, build_subspace, build_topology, make_signal_prior


def scalar_prior(cov=1.0, noise_var=1.0, amplitude=1.0):
    return SignalPrior(basis=np.ones((1, 1)), mean=np.zeros(1), covariance=np.array([[cov]]),
                       noise_var=np.array([noise_var]), amplitude=amplitude)


def random_prior(n, r, seed, noise_var=1e-2, worst_db=-2.0):
    topo = build_topology(n, 100.0, 0.25, seed)
    return make_signal_prior(build_subspace(topo, r), worst_db, noise_var, 1.0, seed + 1)


@pytest.fixture
def prior42():
    return random_prior(4, 2, 7)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import VERDICTS
    except ImportError:
        return
    if not VERDICTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(VERDICTS):
        ok, detail = VERDICTS[n]
        terminalreporter.write_line(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
