"""Drift-plus-penalty controller that minimises the time-average BMSE.

Each slot a node harvests everything while its battery is at or below the
offset theta_i, and transmits at full power e_i^max while its virtual queue
B_i - theta_i is at least V times the BMSE gradient at last slot's energies.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgument
from .fusion import g_i_max, g_i_max_safe
from .radio_energy import ControlDecision, NodeEnergyState, bits_for_energy
from .signal_model import SignalPrior

GRADIENT_BOUNDS = {"closed_form": g_i_max, "safe": g_i_max_safe}


@dataclass(frozen=True)
class Alg1Config:
    v: float
    theta: np.ndarray
    initial_battery: np.ndarray
    initial_energy: np.ndarray  # e(-1)
    theorem_mode: bool = True

    def __post_init__(self):
        if not self.v > 0:
            raise InvalidArgument("V must be positive")


def theta_from_theorem(v, g_max, e_max, e_o):
    """Battery offset V G + 2 e_max + 2 e_o that keeps batteries off the floor."""
    return v * np.asarray(g_max) + 2.0 * np.asarray(e_max) + 2.0 * np.asarray(e_o)


def gradient_bounds(prior: SignalPrior, e_max, kind="closed_form") -> np.ndarray:
    try:
        fn = GRADIENT_BOUNDS[kind]
    except KeyError:
        raise InvalidArgument(f"unknown gradient bound {kind!r}") from None
    return np.array([fn(prior, i, e) for i, e in enumerate(np.asarray(e_max))])


def harvest_decision(battery, theta, arrivals):
    """Take all arriving energy iff B <= theta."""
    return np.where(np.asarray(battery) <= theta, arrivals, 0.0)


def transmit_decision(queue, v, grad, e_max):
    """Full power iff B - theta >= V * dBMSE/de (ties transmit)."""
    return np.where(np.asarray(queue) >= v * np.asarray(grad), e_max, 0.0)


def alg1_slot(state: NodeEnergyState, grad, arrivals, v, cost, max_bits) -> ControlDecision:
    """One slot of decisions; ``grad`` is the BMSE gradient at e(t-1)."""
    harvest = harvest_decision(state.battery, state.offset, arrivals)
    energy = transmit_decision(state.virtual_queue, v, grad, state.e_max)
    return ControlDecision(energy=energy, harvest=harvest,
                           bits=bits_for_energy(energy, cost, max_bits))


def lyapunov_diagnostic(queue) -> float:
    q = np.asarray(queue, dtype=float)
    return 0.5 * float(q @ q)


def theorem_battery_bounds(state: NodeEnergyState, r_max):
    """(lower, upper) per node: e_max + e_o <= B <= theta + R_max - e_o."""
    return state.e_max + state.overhead, state.offset + r_max - state.overhead
