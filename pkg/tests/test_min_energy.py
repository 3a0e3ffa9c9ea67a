import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ehfusion.errors import InvalidArgument
from ehfusion.fusion import BmseContext, bmse, bmse_gradient
from ehfusion.min_energy import (
    Alg23Config,
    DescentParams,
    alg23_slot,
    alg2_energy_solve,
    alg3_energy_rule,
    energy_bounds,
    z_update,
)
from ehfusion.radio_energy import NodeEnergyState

from conftest import random_prior


def test_z_update_examples():
    assert z_update(3.0, 2.0, 0.1, 0.1) == 3.0
    assert z_update(1.0, 0.5, 1.0, 5.0) == 0.0
    assert z_update(2.0, 1.0, 1.5, 1.0) == pytest.approx(2.5)


@settings(max_examples=50, deadline=None)
@given(z=st.floats(0, 1e6), mu=st.floats(1e-6, 1e4), b=st.floats(0, 10), g=st.floats(1e-6, 10))
def test_z_nonnegative(z, mu, b, g):
    out = z_update(z, mu, b, g)
    assert out >= 0 and out == max(z + mu * (b - g), 0.0)


def test_config_validation():
    with pytest.raises(InvalidArgument):
        Alg23Config(v=1.0, gamma=0.0, mu=1.0)
    with pytest.raises(InvalidArgument):
        Alg23Config(v=1.0, gamma=0.1, mu=-1.0)
    with pytest.raises(InvalidArgument):
        Alg23Config(v=1.0, gamma=0.1, mu=1.0, solver="magic")


def test_alg3_rule_examples():
    kw = dict(battery=np.full(3, 5.0), e_max=np.full(3, 2.0), e_o=np.full(3, 0.1))
    # Z = 0: transmit iff queue >= V
    np.testing.assert_array_equal(
        alg3_energy_rule(np.array([1.0, 0.99, 2.0]), 1.0, 0.0, np.full(3, -1.0), **kw), [2, 0, 2])
    # idle last slot -> zero gradient -> idle below V
    assert alg3_energy_rule(np.array([0.5]), 1.0, 10.0, np.array([0.0]), np.array([5.0]),
                            np.array([2.0]), np.array([0.1]))[0] == 0.0
    # tie transmits at min(e_max, B - e_o)
    out = alg3_energy_rule(np.array([0.0]), 1.0, 2.0, np.array([-0.5]), np.array([1.0]),
                           np.array([2.0]), np.array([0.1]))
    assert out[0] == pytest.approx(0.9)


def test_alg3_rule_clamps_unaffordable():
    out = alg3_energy_rule(np.array([5.0]), 1.0, 0.0, np.array([0.0]), np.array([0.05]),
                           np.array([2.0]), np.array([0.1]))
    assert out[0] == 0.0


def _state(battery, offset, e_max, e_o=0.05):
    battery = np.asarray(battery, float)
    return NodeEnergyState(battery=battery, offset=np.full(battery.shape, offset),
                           overhead=np.full(battery.shape, e_o),
                           e_max=np.broadcast_to(np.asarray(e_max, float), battery.shape).copy())


def test_alg2_linear_cases():
    prior = random_prior(4, 2, 3)
    cost = np.full(4, 0.05)
    st_low = _state([10.0, 11.0, 12.0, 10.5], 10.0, 1.0)
    e = alg2_energy_solve(st_low, 0.0, 5.0, prior, cost, np.full(4, 0.5))
    np.testing.assert_array_equal(e, 0.0)
    st_high = _state([20.0, 21.0, 10.8, 22.0], 10.0, 1.0)
    e = alg2_energy_solve(st_high, 0.0, 0.5, prior, cost, np.zeros(4))
    np.testing.assert_allclose(e, energy_bounds(st_high))


def _objective(state, z, v, prior, cost, e):
    return float(np.sum((v - state.virtual_queue) * e)) + z * bmse(BmseContext(prior, cost, e))


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 10_000))
def test_alg2_never_worse_than_warm_start(seed):
    rng = np.random.default_rng(seed)
    prior = random_prior(5, 2, seed % 20)
    e_max = rng.uniform(0.5, 2.0, 5)
    state = _state(rng.uniform(0.0, 4.0, 5) + 10.0, 11.0, e_max)
    cost = 10 ** rng.uniform(-3, 0, 5)
    z, v = 10 ** rng.uniform(-1, 2), rng.uniform(0.1, 3)
    warm = rng.uniform(0, 1, 5) * e_max
    e = alg2_energy_solve(state, z, v, prior, cost, warm,
                          DescentParams(max_iters=5, multistart=False, polish_sweeps=0))
    upper = energy_bounds(state)
    assert np.all(e >= 0) and np.all(e <= upper)
    f_warm = _objective(state, z, v, prior, cost, np.clip(warm, 0, upper))
    assert _objective(state, z, v, prior, cost, e) <= f_warm + 1e-12 * max(1, abs(f_warm))


def test_alg23_slot_harvest_and_queue():
    prior = random_prior(3, 1, 0)
    state = _state([1.0, 2.0, 3.0], np.inf, 0.5)
    cfg = Alg23Config(v=1.0, gamma=0.1, mu=2.0)
    dec, z_next, b = alg23_slot(state, np.full(3, 0.7), 1.0, prior, np.full(3, 0.01),
                                np.zeros(3), np.zeros(3), cfg, 4)
    np.testing.assert_array_equal(dec.harvest, 0.7)
    assert b == pytest.approx(bmse(BmseContext(prior, np.full(3, 0.01), dec.energy)))
    assert z_next == pytest.approx(max(1.0 + 2.0 * (b - 0.1), 0.0))
