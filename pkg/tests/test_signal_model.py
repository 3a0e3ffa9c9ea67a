import numpy as np
import pytest

from ehfusion.errors import InvalidArgument
from ehfusion.signal_model import (
    SignalPrior,
    build_subspace,
    build_topology,
    make_signal_prior,
    sample_slot,
)


def test_two_nodes_single_edge():
    topo = build_topology(2, 5.0, 0.25, 0)
    off = topo.adjacency[~np.eye(2, dtype=bool)]
    assert np.all(off > 0) and off[0] == off[1]
    np.testing.assert_allclose(topo.laplacian.sum(axis=1), 0.0, atol=1e-15)


def test_topology_full_config_shape_and_disk():
    topo = build_topology(50, 100.0, 0.25, 3)
    assert topo.positions.shape == (50, 2)
    assert np.all(np.linalg.norm(topo.positions, axis=1) <= 100.0)
    np.testing.assert_array_equal(topo.adjacency, topo.adjacency.T)
    assert np.all(np.diag(topo.adjacency) == 0)


def test_topology_kernel_uses_diameter_normalisation():
    topo = build_topology(3, 10.0, 0.5, 1)
    d = np.linalg.norm(topo.positions[0] - topo.positions[1]) / 20.0
    assert topo.adjacency[0, 1] == pytest.approx(np.exp(-d**2 / 1.0), rel=1e-12)


def test_topology_deterministic():
    a, b = build_topology(20, 100.0, 0.25, 9), build_topology(20, 100.0, 0.25, 9)
    np.testing.assert_array_equal(a.laplacian, b.laplacian)
    np.testing.assert_array_equal(a.positions, b.positions)


@pytest.mark.parametrize("args", [(0, 1.0, 1.0), (5, 0.0, 1.0), (5, 1.0, -1.0), (2.5, 1.0, 1.0)])
def test_topology_rejects_bad_args(args):
    with pytest.raises(InvalidArgument):
        build_topology(*args, seed=0)


def test_subspace_r1_is_constant():
    u = build_subspace(build_topology(12, 100.0, 0.25, 4), 1)
    np.testing.assert_allclose(u[:, 0], 1 / np.sqrt(12), atol=1e-10)


@pytest.mark.parametrize("n,r", [(50, 6), (10, 10)])
def test_subspace_orthonormal(n, r):
    u = build_subspace(build_topology(n, 100.0, 0.25, 2), r)
    np.testing.assert_allclose(u.T @ u, np.eye(r), atol=1e-10)


def test_subspace_rejects_r_above_n():
    with pytest.raises(InvalidArgument):
        build_subspace(build_topology(4, 1.0, 0.25, 0), 5)


@pytest.mark.parametrize("db,trace", [(-2.0, 0.630957344480193), (0.0, 1.0)])
def test_prior_trace(db, trace):
    u = build_subspace(build_topology(10, 100.0, 0.25, 0), 3)
    prior = make_signal_prior(u, db, 1e-4, 1.0, 5)
    assert prior.worst_bmse == pytest.approx(trace, rel=1e-12)
    np.testing.assert_array_equal(prior.covariance, prior.covariance.T)
    assert np.all(np.linalg.eigvalsh(prior.covariance) > 0)
    np.testing.assert_allclose(prior.precision @ prior.covariance, np.eye(3), atol=1e-10)


def test_sample_noiseless_readings_equal_field(rng):
    u = build_subspace(build_topology(6, 100.0, 0.25, 0), 2)
    prior = SignalPrior(basis=u, mean=np.zeros(2), covariance=0.01 * np.eye(2),
                        noise_var=np.zeros(6), amplitude=10.0)
    sig = sample_slot(prior, rng)
    np.testing.assert_array_equal(sig.y, sig.x)
    np.testing.assert_allclose(sig.x, u @ sig.s)


def test_sample_readings_clipped(rng):
    prior = SignalPrior(basis=np.ones((3, 1)), mean=np.zeros(1), covariance=np.array([[100.0]]),
                        noise_var=np.full(3, 1.0), amplitude=1.0)
    ys = np.array([sample_slot(prior, rng).y for _ in range(200)])
    assert np.all(np.abs(ys) <= 1.0) and np.any(np.abs(ys) == 1.0)


def test_sample_covariance_of_s(rng):
    u = build_subspace(build_topology(10, 100.0, 0.25, 0), 3)
    prior = make_signal_prior(u, -2.0, 1e-4, 1.0, 1)
    s = np.array([sample_slot(prior, rng).s for _ in range(100_000)])
    emp = np.cov(s.T)
    err = np.linalg.norm(emp - prior.covariance) / np.linalg.norm(prior.covariance)
    assert err < 0.05


def test_sample_covariance_of_x_identity_prior(rng):
    u = build_subspace(build_topology(5, 100.0, 0.25, 0), 2)
    prior = SignalPrior(basis=u, mean=np.zeros(2), covariance=np.eye(2),
                        noise_var=np.zeros(5), amplitude=1e6)
    x = np.array([sample_slot(prior, rng).x for _ in range(50_000)])
    np.testing.assert_allclose(np.cov(x.T), u @ u.T, atol=0.03)
