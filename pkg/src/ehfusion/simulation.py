"""Slot loop, Monte Carlo replication and metric aggregation.

Controller-facing energies are expressed in units of the mean energy cap
(mean over nodes of e_i^max, in joules). In those units R_max, theta,
vartheta, V and mu take readable values whatever the absolute radio
constants are; the traces convert back to joules.

Slot order: draw channels, arrivals and the signal; decide (e, r); quantize
and fuse; record; update batteries and queues.
"""
from __future__ import annotations

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields, replace

import numpy as np

from . import min_bmse, min_energy
from .errors import InvalidArgument
from .fusion import BmseContext, FusionInput, bmse, bmse_and_gradient, bmse_bits, lmmse_estimate
from .quantizer import quantize_many
from .radio_energy import (
    ArrivalProcess,
    NodeEnergyState,
    RadioParams,
    battery_step,
    calibrate_e_max,
    cost_from_gain,
    path_gain,
    sample_arrivals,
)
from .signal_model import (
    NetworkTopology,
    SignalPrior,
    build_subspace,
    build_topology,
    make_signal_prior,
    sample_slot,
)

log = logging.getLogger(__name__)

ALGORITHMS = ("alg1", "alg2", "alg3")
THETA_MODES = ("theorem", "free")


@dataclass(frozen=True)
class ExperimentConfig:
    # network
    n: int = 50
    radius_m: float = 100.0
    kernel_variance: float = 0.25
    subspace_dim: int = 6
    # signal
    worst_bmse_db: float = -2.0
    noise_var: float = 1e-4
    amplitude: float = 1.0
    # radio
    noise_psd: float = 4e-21
    noise_figure: float = 10.0
    system_const: float = 1e-3
    slot_s: float = 1e-3
    ber: float = 1e-4
    carrier_hz: float = 10e6
    max_bits: int = 4
    percentile: float = 0.05
    fading: bool = True
    # energy, in units of the mean e_max
    arrival: str = "uniform"
    r_max: float = 2.0
    window_s: float = 1.0
    overhead_frac: float = 0.05
    b0_frac: float = 1.0
    # control
    algorithm: str = "alg1"
    v: float = 1.0
    theta_mode: str = "theorem"
    gradient_bound: str = "safe"
    theta: float = 10.0
    gamma_db: float = -15.0
    mu: float = 1.0
    vartheta: float = 20.0
    z0_max: float = 1.0
    descent_max_iters: int = 50
    descent_tol: float = 1e-8
    descent_multistart: bool = True
    # simulation
    horizon: int = 10_000
    burn_in: int = 9_000
    trials: int = 1
    seed: int = 0
    topology_seed: int = -1  # -1: reuse ``seed``

    def __post_init__(self):
        self.validate()

    def validate(self):
        def need(cond, key, why):
            if not cond:
                raise InvalidArgument(f"{key}: {why}")

        need(self.n >= 2, "n", "at least two nodes")
        need(1 <= self.subspace_dim <= self.n, "subspace_dim", "must lie in [1, n]")
        for key in ("radius_m", "kernel_variance", "noise_var", "amplitude", "window_s",
                    "v", "mu", "noise_psd", "noise_figure", "system_const", "slot_s",
                    "carrier_hz", "z0_max"):
            need(getattr(self, key) > 0, key, "must be positive")
        need(0 < self.ber < 1, "ber", "must lie in (0, 1)")
        need(0 < self.percentile < 1, "percentile", "must lie in (0, 1)")
        need(self.max_bits >= 1, "max_bits", "must be >= 1")
        need(self.r_max >= 0, "r_max", "must be non-negative")
        need(self.overhead_frac >= 0, "overhead_frac", "must be non-negative")
        need(self.b0_frac >= 0, "b0_frac", "must be non-negative")
        need(self.arrival in ("uniform", "on_off"), "arrival", "uniform or on_off")
        need(self.algorithm in ALGORITHMS, "algorithm", f"one of {ALGORITHMS}")
        need(self.theta_mode in THETA_MODES, "theta_mode", f"one of {THETA_MODES}")
        need(self.gradient_bound in min_bmse.GRADIENT_BOUNDS, "gradient_bound",
             f"one of {tuple(min_bmse.GRADIENT_BOUNDS)}")
        need(self.theta > 0, "theta", "must be positive")
        need(self.vartheta > 0, "vartheta", "must be positive")
        need(self.descent_max_iters >= 1, "descent_max_iters", "must be >= 1")
        need(self.descent_tol > 0, "descent_tol", "must be positive")
        need(self.horizon >= 0, "horizon", "must be non-negative")
        need(0 <= self.burn_in and (self.burn_in < self.horizon or self.horizon == 0),
             "burn_in", "must satisfy 0 <= burn_in < horizon")
        need(self.trials >= 1, "trials", "must be >= 1")

    @property
    def gamma(self) -> float:
        return 10.0 ** (self.gamma_db / 10.0)

    def radio(self) -> RadioParams:
        return RadioParams(noise_psd=self.noise_psd, noise_figure=self.noise_figure,
                           system_const=self.system_const, slot_s=self.slot_s, ber=self.ber,
                           carrier_hz=self.carrier_hz, max_bits=self.max_bits)

    def with_updates(self, **kw) -> "ExperimentConfig":
        return replace(self, **kw)

    @classmethod
    def field_names(cls):
        return [f.name for f in fields(cls)]


@dataclass(frozen=True)
class Setup:
    """Everything fixed across the trials of one experiment."""

    topology: NetworkTopology
    prior: SignalPrior
    radio: RadioParams
    gain_mean: np.ndarray  # path gain, fading excluded
    e_max_j: np.ndarray
    unit_j: float  # mean e_max, the controller energy unit

    @property
    def e_max(self) -> np.ndarray:
        return self.e_max_j / self.unit_j


def build_setup(config: ExperimentConfig) -> Setup:
    seed = config.seed if config.topology_seed < 0 else config.topology_seed
    topo_ss, prior_ss = np.random.SeedSequence(seed).spawn(2)
    topology = build_topology(config.n, config.radius_m, config.kernel_variance,
                              np.random.default_rng(topo_ss))
    basis = build_subspace(topology, config.subspace_dim)
    prior = make_signal_prior(basis, config.worst_bmse_db, config.noise_var, config.amplitude,
                              np.random.default_rng(prior_ss))
    radio = config.radio()
    e_max = calibrate_e_max(radio, topology, config.percentile, config.max_bits,
                            fading=config.fading)
    return Setup(topology=topology, prior=prior, radio=radio,
                 gain_mean=path_gain(topology, radio), e_max_j=e_max,
                 unit_j=float(np.mean(e_max)))


def benchmark_bmse_opt(prior: SignalPrior, max_bits) -> float:
    """BMSE with every node sending ``max_bits`` bits (``np.inf`` = noise-only floor).

    Equals the relaxed BMSE at e = e_max under the calibration channel.
    """
    if np.isinf(max_bits):
        return float(np.trace(np.linalg.inv(
            prior.precision + (prior.basis.T / prior.noise_var) @ prior.basis)))
    return bmse_bits(prior, np.full(prior.node_count, int(max_bits)))


@dataclass
class MetricsTrace:
    bmse_model: np.ndarray
    err_empirical: np.ndarray
    active_count: np.ndarray
    energy_sum_j: np.ndarray
    battery_mean_j: np.ndarray
    z_queue: np.ndarray
    lyapunov: np.ndarray
    battery_min_j: np.ndarray
    battery_max_j: np.ndarray
    offset_j: np.ndarray
    overhead_j: np.ndarray
    e_max_j: np.ndarray
    r_max_j: float
    burn_in: int
    node_battery_j: np.ndarray | None = None  # (horizon + 1, N)
    node_energy_j: np.ndarray | None = None
    node_harvest_j: np.ndarray | None = None
    node_arrival_j: np.ndarray | None = None

    COLUMNS = ("slot", "bmse_model", "err_empirical", "active_count", "energy_sum_j",
               "battery_mean_j", "z_queue", "lyapunov")

    def __len__(self):
        return self.bmse_model.size

    def columns(self) -> dict:
        return {"slot": np.arange(len(self)), **{c: getattr(self, c) for c in self.COLUMNS[1:]}}

    def aggregates(self) -> dict:
        """Time means over the slots after burn-in."""
        window = slice(self.burn_in, None)
        return {
            "bmse": float(np.mean(self.bmse_model[window])),
            "err": float(np.mean(self.err_empirical[window])),
            "active": float(np.mean(self.active_count[window])),
            "energy_j": float(np.mean(self.energy_sum_j[window])),
            "battery_j": float(np.mean(self.battery_mean_j[window])),
        }


def trial_seeds(master_seed, n_trials):
    """Per-trial seeds; the first k are the same for any n_trials >= k."""
    return [np.random.SeedSequence(master_seed, spawn_key=(i,)) for i in range(n_trials)]


def run_trial(config: ExperimentConfig, trial_seed, setup: Setup | None = None,
              record_nodes=False) -> MetricsTrace:
    """Run one trial of ``config.horizon`` slots; deterministic in ``trial_seed``.

    Raises ``InvariantViolation`` (with slot and node) if a battery would
    spend energy it does not hold.
    """
    setup = setup if setup is not None else build_setup(config)
    prior, unit = setup.prior, setup.unit_j
    n, horizon = config.n, config.horizon
    ss = trial_seed if isinstance(trial_seed, np.random.SeedSequence) else np.random.SeedSequence(trial_seed)
    init_rng, chan_rng, arr_rng, sig_rng, q_rng = (np.random.default_rng(s) for s in ss.spawn(5))

    e_max = setup.e_max
    overhead = config.overhead_frac * e_max
    cost_const = setup.radio.cost_constant / unit
    arrivals = ArrivalProcess(kind=config.arrival, r_max=config.r_max, window_s=config.window_s)

    alg1 = config.algorithm == "alg1"
    if alg1:
        if config.theta_mode == "theorem":
            g_max = min_bmse.gradient_bounds(prior, e_max, config.gradient_bound)
            offset = min_bmse.theta_from_theorem(config.v, g_max, e_max, overhead)
        else:
            offset = np.full(n, config.theta)
        battery0 = np.maximum(config.b0_frac * offset, e_max + 2.0 * overhead)
        z = 0.0
        ctl1 = min_bmse.Alg1Config(v=config.v, theta=offset, initial_battery=battery0,
                                   initial_energy=np.zeros(n), theorem_mode=config.theta_mode == "theorem")
    else:
        offset = np.full(n, config.vartheta)
        battery0 = config.b0_frac * offset
        z = config.z0_max * (1.0 - init_rng.uniform())  # (0, z0_max]
        ctl23 = min_energy.Alg23Config(
            v=config.v, gamma=config.gamma, mu=config.mu,
            solver="descent" if config.algorithm == "alg2" else "closed_form",
            descent=min_energy.DescentParams(max_iters=config.descent_max_iters,
                                             tolerance=config.descent_tol,
                                             multistart=config.descent_multistart))
    e_prev = init_rng.uniform(0.0, 1.0, size=n) * e_max
    state = NodeEnergyState(battery=battery0.astype(float), offset=offset, overhead=overhead,
                            e_max=e_max)

    out = {c: np.zeros(horizon) for c in MetricsTrace.COLUMNS[1:]}
    b_min = state.battery.copy()
    b_max = state.battery.copy()
    nodes = None
    if record_nodes:
        nodes = {k: np.zeros((horizon, n)) for k in ("energy", "harvest", "arrival")}
        nodes["battery"] = np.zeros((horizon + 1, n))
        nodes["battery"][0] = state.battery

    for t in range(horizon):
        fading = chan_rng.exponential(1.0, size=n) if config.fading else np.ones(n)
        cost = cost_const / (setup.gain_mean * fading)
        arrived = sample_arrivals(arrivals, t, config.slot_s, n, arr_rng)
        sig = sample_slot(prior, sig_rng)
        _, grad = bmse_and_gradient(BmseContext(prior, cost, e_prev))

        if alg1:
            decision = min_bmse.alg1_slot(state, grad, arrived, ctl1.v, cost, config.max_bits)
            bmse_t = bmse(BmseContext(prior, cost, decision.energy))
            z_next = 0.0
            lyap = min_bmse.lyapunov_diagnostic(state.virtual_queue)
        else:
            decision, z_next, bmse_t = min_energy.alg23_slot(
                state, arrived, z, prior, cost, grad, e_prev, ctl23, config.max_bits)
            lyap = 0.5 * z * z + min_bmse.lyapunov_diagnostic(state.virtual_queue)

        active = decision.sampling_set
        if active.size:
            msgs = np.zeros(n)
            msgs[active] = quantize_many(sig.y[active], decision.bits[active], prior.amplitude, q_rng)
            s_hat = lmmse_estimate(prior, FusionInput(messages=msgs, bits=decision.bits))
        else:
            s_hat = prior.mean
        diff = s_hat - sig.s

        out["bmse_model"][t] = bmse_t
        out["err_empirical"][t] = float(diff @ diff)
        out["active_count"][t] = active.size
        out["energy_sum_j"][t] = float(decision.energy.sum()) * unit
        out["battery_mean_j"][t] = float(state.battery.mean()) * unit
        out["z_queue"][t] = z if not alg1 else np.nan
        out["lyapunov"][t] = lyap * unit * unit

        state = battery_step(state, decision.energy, decision.harvest, slot=t)
        np.minimum(b_min, state.battery, out=b_min)
        np.maximum(b_max, state.battery, out=b_max)
        if nodes is not None:
            nodes["energy"][t] = decision.energy
            nodes["harvest"][t] = decision.harvest
            nodes["arrival"][t] = arrived
            nodes["battery"][t + 1] = state.battery
        e_prev = decision.energy
        z = z_next

    return MetricsTrace(
        **out,
        battery_min_j=b_min * unit,
        battery_max_j=b_max * unit,
        offset_j=offset * unit,
        overhead_j=overhead * unit,
        e_max_j=setup.e_max_j,
        r_max_j=config.r_max * unit,
        burn_in=config.burn_in,
        **({f"node_{k}_j": v * unit for k, v in nodes.items()} if nodes else {}),
    )


@dataclass
class MonteCarloResult:
    traces: list
    mean: dict = field(default_factory=dict)
    std: dict = field(default_factory=dict)


def _trial_job(args):
    config, seed, setup = args
    return run_trial(config, seed, setup)


def run_monte_carlo(config: ExperimentConfig, n_trials=None, workers=1,
                    setup: Setup | None = None) -> MonteCarloResult:
    """Run independent trials and report mean and std of each aggregate."""
    n_trials = config.trials if n_trials is None else n_trials
    if n_trials < 1:
        raise InvalidArgument("n_trials must be >= 1")
    setup = setup if setup is not None else build_setup(config)
    jobs = [(config, s, setup) for s in trial_seeds(config.seed, n_trials)]
    if workers > 1 and n_trials > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            traces = list(pool.map(_trial_job, jobs))
    else:
        traces = [_trial_job(j) for j in jobs]
    table = [t.aggregates() for t in traces]
    keys = table[0].keys()
    return MonteCarloResult(
        traces=traces,
        mean={k: float(np.mean([row[k] for row in table])) for k in keys},
        std={k: float(np.std([row[k] for row in table])) for k in keys},
    )
