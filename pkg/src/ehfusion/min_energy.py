"""Drift-plus-penalty controllers that minimise network energy under a BMSE target.

A virtual queue Z(t) accumulates the excess of the slot BMSE over the
target gamma. The exact variant ("descent") minimises
sum_i (V - Btilde_i) e_i + Z BMSE(e) over the feasible box each slot; the
"closed_form" variant linearises the BMSE around last slot's energies and
thresholds each node independently.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgument
from .fusion import BmseContext, bmse, bmse_and_gradient
from .min_bmse import harvest_decision
from .radio_energy import ControlDecision, NodeEnergyState, bits_for_energy
from .signal_model import SignalPrior

log = logging.getLogger(__name__)

SOLVERS = ("descent", "closed_form")


@dataclass(frozen=True)
class DescentParams:
    max_iters: int = 50
    step: float | None = None  # default 0.1 * min(e_max)
    tolerance: float = 1e-8
    backtrack: float = 0.5
    armijo: float = 1e-4
    rel_decrease: float = 1e-12
    polish_sweeps: int = 3
    multistart: bool = True


@dataclass(frozen=True)
class Alg23Config:
    v: float
    gamma: float
    mu: float
    solver: str = "closed_form"
    descent: DescentParams = DescentParams()

    def __post_init__(self):
        if not self.gamma > 0:
            raise InvalidArgument("BMSE target gamma must be positive")
        if not self.mu > 0:
            raise InvalidArgument("queue step mu must be positive")
        if self.solver not in SOLVERS:
            raise InvalidArgument(f"solver must be one of {SOLVERS}")


def z_update(z, mu, bmse_t, gamma) -> float:
    """Z <- max(Z + mu (BMSE - gamma), 0)."""
    return max(z + mu * (bmse_t - gamma), 0.0)


def energy_bounds(state: NodeEnergyState) -> np.ndarray:
    """Per-node cap min(e_max, B - e_o), floored at 0."""
    return np.maximum(np.minimum(state.e_max, state.battery - state.overhead), 0.0)


def alg3_energy_rule(queue, v, z, grad, battery, e_max, e_o):
    """Spend min(e_max, B - e_o) iff Btilde >= V + Z dBMSE/de (ties transmit)."""
    cap = np.minimum(e_max, np.asarray(battery) - e_o)
    if np.any(cap < 0):
        log.debug("nodes %s cannot cover their overhead; held silent", np.flatnonzero(cap < 0))
    cap = np.maximum(cap, 0.0)
    return np.where(np.asarray(queue) >= v + z * np.asarray(grad), cap, 0.0)


_UNIT_GRID = np.linspace(0.0, 1.0, 33)
_ZOOM = np.linspace(-1.0, 1.0, 17)


class _SlotObjective:
    """sum_i lin_i e_i + Z BMSE(e) for one slot, with its gradient.

    Evaluated many times per slot, so it works on raw arrays and batches
    where it can.
    """

    def __init__(self, prior: SignalPrior, cost, lin, z):
        self.basis = prior.basis
        self.basis_t = prior.basis.T
        self.precision = prior.precision
        self.var = prior.noise_var
        self.a2c2 = prior.amplitude**2 * np.asarray(cost, dtype=float) ** 2
        self.lin = np.asarray(lin, dtype=float)
        self.z = float(z)

    def weights(self, e):
        e2 = e * e
        return e2 / (e2 * self.var + self.a2c2)

    def inverse(self, e):
        return np.linalg.inv(self.precision + (self.basis_t * self.weights(e)) @ self.basis)

    def value(self, e):
        return float(self.lin @ e) + self.z * float(np.trace(self.inverse(e)))

    def values(self, es):
        """Objective at each row of ``es``."""
        w = self.weights(es)
        info = self.precision + np.einsum("kn,nr,ns->krs", w, self.basis, self.basis)
        tr = np.trace(np.linalg.inv(info), axis1=1, axis2=2)
        return es @ self.lin + self.z * tr

    def value_and_grad(self, e):
        e2 = e * e
        denom = e2 * self.var + self.a2c2
        inv = np.linalg.inv(self.precision + (self.basis_t * (e2 / denom)) @ self.basis)
        proj = self.basis @ inv
        h = 2.0 * e * self.a2c2 / denom**2
        grad = -h * np.einsum("ij,ij->i", proj, proj)
        return float(self.lin @ e) + self.z * float(np.trace(inv)), self.lin + self.z * grad

    def coordinate_moves(self, e, upper):
        """Best value of every coordinate alone, others fixed.

        Removing node i from the current inverse (Sherman-Morrison) gives
        a = u^T M^-1 u and b = |M^-1 u|^2 for all i at once; along
        coordinate i the BMSE is then Tr(M^-1) - w b / (1 + w a) with
        w(x) = x^2 / (x^2 sigma^2 + A^2 c^2). Returns (x_best, gain), where
        gain is the objective decrease of moving coordinate i to x_best.
        """
        inv = self.inverse(e)
        proj = self.basis @ inv
        a_cur = np.einsum("ij,ij->i", proj, self.basis)
        b_cur = np.einsum("ij,ij->i", proj, proj)
        w_cur = self.weights(e)
        shrink = 1.0 - w_cur * a_cur
        a = a_cur / shrink
        b = b_cur / shrink**2
        var, ac, lin, zb = self.var[:, None], self.a2c2[:, None], self.lin[:, None], (self.z * b)[:, None]
        a = a[:, None]

        def phi(x):
            x2 = x * x
            w = x2 / (x2 * var + ac)
            return lin * x - zb * w / (1.0 + w * a)

        up = upper[:, None]
        rows = np.arange(e.size)
        grid = up * _UNIT_GRID
        best = grid[rows, np.argmin(phi(grid), axis=1)][:, None]
        span = up / (_UNIT_GRID.size - 1)
        for _ in range(3):
            grid = np.clip(best + span * _ZOOM, 0.0, up)
            best = grid[rows, np.argmin(phi(grid), axis=1)][:, None]
            span = span / 8.0
        cands = np.hstack([np.zeros_like(up), up, best])
        vals = phi(cands)
        k = np.argmin(vals, axis=1)
        x_best = cands[rows, k]
        gain = phi(e[:, None])[:, 0] - vals[rows, k]
        return x_best, gain




def _projected_descent(obj: _SlotObjective, start, upper, params: DescentParams, step0):
    """Projected gradient descent with an Armijo line search.

    Trial steps start from the Barzilai-Borwein estimate; the backtracking
    candidates t, t/2, ... are evaluated in one batch.
    """
    e = np.clip(start, 0.0, upper)
    f, g = obj.value_and_grad(e)
    step = step0
    steps = params.backtrack ** np.arange(8)
    for _ in range(params.max_iters):
        if np.linalg.norm(np.clip(e - g, 0.0, upper) - e) < params.tolerance:
            break
        cands = np.clip(e - (step * steps)[:, None] * g, 0.0, upper)
        fc = obj.values(cands)
        ok = np.flatnonzero(fc <= f + params.armijo * ((cands - e) @ g))
        if ok.size == 0 or not fc[ok[0]] < f:
            break
        e_new = cands[ok[0]]
        f_old = f
        f, g_new = obj.value_and_grad(e_new)
        if f_old - f <= params.rel_decrease * max(abs(f_old), 1e-300):
            e, g = e_new, g_new
            break
        ds, dg = e_new - e, g_new - g
        curv = float(ds @ dg)
        step = float(ds @ ds) / curv if curv > 0 else 2.0 * step * steps[ok[0]]
        step = min(max(step, 1e-10 * step0), 1e10 * step0)
        e, g = e_new, g_new
    return e, f


def _coordinate_polish(obj: _SlotObjective, e, f, upper, params: DescentParams, sweeps=None):
    """Greedy exact coordinate descent: move the single most improving coordinate."""
    sweeps = params.polish_sweeps if sweeps is None else sweeps
    for _ in range(sweeps * e.size):
        x_best, gain = obj.coordinate_moves(e, upper)
        i = int(np.argmax(gain))
        if not gain[i] > 1e-14 * max(1.0, abs(f)):
            break
        trial = e.copy()
        trial[i] = x_best[i]
        ft = obj.value(trial)
        if not ft < f:
            break
        e, f = trial, ft
    return e, f


def alg2_energy_solve(state: NodeEnergyState, z, v, prior: SignalPrior, cost, warm,
                      params: DescentParams = DescentParams()) -> np.ndarray:
    """Best-effort minimiser of sum_i (V - Btilde_i) e_i + Z BMSE(e) on the feasible box.

    Projected gradient descent with Armijo backtracking from the warm start;
    with ``multistart`` a greedy coordinate build-up from e = 0 competes with
    it, and the better point gets exact coordinate-wise sweeps. The
    coordinate moves matter: the BMSE gradient vanishes at e_i = 0, so plain
    descent can never switch on an idle node. The result is never worse than the projected warm start.
    """
    upper = energy_bounds(state)
    scale = np.asarray(state.e_max, dtype=float)
    step0 = params.step if params.step is not None else 0.1 * float(np.min(scale))
    # BMSE depends on e only through e / c, so x = e / e_max with c / e_max
    # is the same problem in units where one step size suits every node
    scaled = _SlotObjective(prior, np.asarray(cost) / scale, (v - state.virtual_queue) * scale, z)
    scaled_upper = upper / scale
    step_scaled = step0 / float(np.min(scale))

    warm = np.clip(np.asarray(warm, dtype=float), 0.0, upper) / scale
    best_e, best_f = warm, scaled.value(warm)
    e, f = _projected_descent(scaled, warm, scaled_upper, params, step_scaled)
    if f < best_f:
        best_e, best_f = e, f
    if params.multistart:
        # greedy build-up from the empty set reaches minima that need a swap
        zero = np.zeros_like(warm)
        e, f = _coordinate_polish(scaled, zero, scaled.value(zero), scaled_upper, params, 1)
        if f < best_f:
            best_e, best_f = e, f
    best_e, best_f = _coordinate_polish(scaled, best_e, best_f, scaled_upper, params)
    return np.clip(best_e * scale, 0.0, upper)


def alg23_slot(state: NodeEnergyState, arrivals, z, prior: SignalPrior, cost, grad_prev,
               e_prev, config: Alg23Config, max_bits):
    """Decide this slot's energies, then advance Z with the realised BMSE.

    Returns ``(decision, z_next, bmse_t)``. ``grad_prev`` is the BMSE
    gradient at e(t-1) under this slot's channel; only the closed form uses it.
    """
    harvest = harvest_decision(state.battery, state.offset, arrivals)
    if config.solver == "descent":
        energy = alg2_energy_solve(state, z, config.v, prior, cost, e_prev, config.descent)
    else:
        energy = alg3_energy_rule(state.virtual_queue, config.v, z, grad_prev, state.battery,
                                  state.e_max, state.overhead)
    bmse_t = bmse(BmseContext(prior, cost, energy))
    decision = ControlDecision(energy=energy, harvest=harvest,
                               bits=bits_for_energy(energy, cost, max_bits))
    return decision, z_update(z, config.mu, bmse_t, config.gamma), bmse_t
