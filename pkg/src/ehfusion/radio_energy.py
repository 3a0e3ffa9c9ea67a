"""Radio cost model, channel draws, energy arrivals and battery bookkeeping."""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .errors import InvalidArgument, InvariantViolation
from .signal_model import NetworkTopology

SPEED_OF_LIGHT = 299_792_458.0
MIN_DISTANCE_M = 1.0


@dataclass(frozen=True)
class RadioParams:
    noise_psd: float = 4e-21  # W/Hz, thermal floor at -174 dBm/Hz
    noise_figure: float = 10.0
    system_const: float = 1e-3
    slot_s: float = 1e-3
    ber: float = 1e-4
    carrier_hz: float = 10e6
    max_bits: int = 4

    def __post_init__(self):
        for name in ("noise_psd", "noise_figure", "system_const", "slot_s", "carrier_hz"):
            if not getattr(self, name) > 0:
                raise InvalidArgument(f"{name} must be positive")
        if np.any(np.asarray(self.ber) <= 0) or np.any(np.asarray(self.ber) >= 1):
            raise InvalidArgument("ber must lie in (0, 1)")
        if int(self.max_bits) != self.max_bits or self.max_bits < 1:
            raise InvalidArgument("max_bits must be a positive integer")

    @property
    def cost_constant(self):
        """2 N_f N_0 G_d T ln(2/BER): multiply by 1/h^2 to get c_i."""
        return (2.0 * self.noise_figure * self.noise_psd * self.system_const * self.slot_s
                * np.log(2.0 / np.asarray(self.ber)))

    @property
    def wavelength_m(self) -> float:
        return SPEED_OF_LIGHT / self.carrier_hz


@dataclass(frozen=True)
class ChannelDraw:
    gain: np.ndarray  # h_i^2
    cost: np.ndarray  # c_i


@dataclass(frozen=True)
class ArrivalProcess:
    kind: str = "uniform"
    r_max: float = 1.0
    window_s: float = 1.0

    def __post_init__(self):
        if self.kind not in ("uniform", "on_off"):
            raise InvalidArgument(f"unknown arrival kind {self.kind!r}")
        if self.r_max < 0:
            raise InvalidArgument("r_max must be non-negative")
        if not self.window_s > 0:
            raise InvalidArgument("window_s must be positive")


@dataclass(frozen=True)
class NodeEnergyState:
    """Batteries of all nodes plus the constants that shape their control.

    ``offset`` is the operating point the controller steers the battery to.
    """

    battery: np.ndarray
    offset: np.ndarray
    overhead: np.ndarray
    e_max: np.ndarray

    @property
    def virtual_queue(self) -> np.ndarray:
        return self.battery - self.offset


@dataclass(frozen=True)
class ControlDecision:
    energy: np.ndarray
    harvest: np.ndarray
    bits: np.ndarray

    @property
    def sampling_set(self) -> np.ndarray:
        return np.flatnonzero((self.energy > 0) & (self.bits >= 1))


def fc_distance(topology: NetworkTopology, fc_position=(0.0, 0.0)) -> np.ndarray:
    d = np.linalg.norm(topology.positions - np.asarray(fc_position, dtype=float), axis=1)
    return np.maximum(d, MIN_DISTANCE_M)


def path_gain(topology: NetworkTopology, params: RadioParams, fc_position=(0.0, 0.0)):
    """Free-space power gain (lambda / (4 pi d))^2 to the fusion center."""
    d = fc_distance(topology, fc_position)
    return (params.wavelength_m / (4.0 * np.pi * d)) ** 2


def cost_from_gain(gain, params: RadioParams):
    return params.cost_constant / np.asarray(gain, dtype=float)


def sample_channel(topology, params, rng, fc_position=(0.0, 0.0), fading=True) -> ChannelDraw:
    """Path loss times unit-mean exponential (Rayleigh power) fading."""
    gain = path_gain(topology, params, fc_position)
    if fading:
        gain = gain * rng.exponential(1.0, size=gain.shape)
    return ChannelDraw(gain=gain, cost=cost_from_gain(gain, params))


def energy_for_bits(bits, cost):
    """QAM energy c (2**b - 1) for sending b bits."""
    return np.asarray(cost) * (2.0 ** np.asarray(bits, dtype=float) - 1.0)


def bits_for_energy(energy, cost, max_bits):
    """Largest b <= max_bits whose QAM energy fits in ``energy`` (0 = silent).

    A relative slack of 1e-12 absorbs round-off so that c (2**b - 1) maps
    back to b.
    """
    energy = np.asarray(energy, dtype=float)
    ratio = energy / np.asarray(cost, dtype=float)
    bits = np.floor(np.log2(1.0 + ratio * (1.0 + 1e-12)))
    return np.clip(bits, 0, max_bits).astype(int)


def fading_quantile(percentile) -> float:
    """Quantile of the unit-mean exponential power fading."""
    if not 0 < percentile < 1:
        raise InvalidArgument("percentile must lie in (0, 1)")
    return -np.log1p(-percentile)


def calibrate_e_max(params, topology, percentile=0.05, max_bits=None, mc_draws=None,
                    rng=None, fc_position=(0.0, 0.0), fading=True) -> np.ndarray:
    """Per-node energy cap: cost of ``max_bits`` bits at the given channel percentile.

    Uses the closed-form exponential quantile unless ``mc_draws`` is given,
    in which case the quantile is estimated from that many fading samples.
    """
    max_bits = params.max_bits if max_bits is None else max_bits
    if not fading:
        factor = 1.0
    elif mc_draws is None:
        factor = fading_quantile(percentile)
    else:
        if mc_draws < 1000:
            raise InvalidArgument("mc_draws must be at least 1000")
        rng = np.random.default_rng(rng)
        factor = float(np.quantile(rng.exponential(1.0, size=int(mc_draws)), percentile))
    gain = path_gain(topology, params, fc_position) * factor
    return energy_for_bits(max_bits, cost_from_gain(gain, params))


def sample_arrivals(proc: ArrivalProcess, t, slot_s, n, rng) -> np.ndarray:
    """Harvestable energy R_i(t) for all nodes in slot ``t``.

    ``on_off`` harvests during the first half of every ``window_s`` window.
    The uniform draws are consumed in every slot so that the random stream
    does not depend on the schedule.
    """
    draws = rng.uniform(0.0, proc.r_max, size=n) if proc.r_max > 0 else np.zeros(n)
    if proc.kind == "on_off" and not is_on(proc, t, slot_s):
        return np.zeros(n)
    return draws


def is_on(proc: ArrivalProcess, t, slot_s) -> bool:
    period = max(int(round(proc.window_s / slot_s)), 1)
    return (t % period) < period - period // 2


def battery_step(state: NodeEnergyState, energy, harvest, *, slot=None) -> NodeEnergyState:
    """B <- B - e - e_o + r, after checking energy causality e <= B - e_o.

    Causality binds only on transmitting nodes; an idle node that cannot
    cover its overhead is drained to zero.
    """
    energy = np.asarray(energy, dtype=float)
    harvest = np.asarray(harvest, dtype=float)
    if np.any(energy < 0) or np.any(harvest < 0):
        raise InvalidArgument("energies must be non-negative")
    # tolerance covers e = B - e_o computed in floating point
    slack = 1e-12 * np.maximum(np.abs(state.battery), state.e_max)
    bad = np.flatnonzero((energy > 0) & (energy > state.battery - state.overhead + slack))
    if bad.size:
        i = int(bad[0])
        raise InvariantViolation(
            f"energy causality violated at node {i}: e={energy[i]:.6g} > "
            f"B - e_o = {state.battery[i] - state.overhead[i]:.6g}",
            slot=slot, node=i)
    battery = np.maximum(state.battery - energy - state.overhead + harvest, 0.0)
    return replace(state, battery=battery)
