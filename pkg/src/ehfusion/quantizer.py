"""Probabilistic (unbiased) uniform quantization onto a 2**b-level grid over [-A, A]."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgument

# fraction of a step below which a reading counts as sitting on a grid point
_GRID_SNAP = 1e-12


@dataclass(frozen=True)
class QuantizedMessage:
    value: float
    bits: int
    node_index: int = -1


def _check_bits(b):
    b = np.asarray(b)
    if np.any(b < 1):
        raise InvalidArgument(f"quantizer needs at least one bit, got {b!r}")


def step_size(amplitude, bits):
    """Grid spacing 2A / (2**b - 1)."""
    _check_bits(bits)
    return 2.0 * amplitude / (2.0 ** np.asarray(bits, dtype=float) - 1.0)


def quant_noise_variance(amplitude, bits):
    """Model variance A^2 / (2**b - 1)^2 of the quantization noise.

    This is the worst case over readings (alpha = 1/2); the realized variance
    alpha (1 - alpha) Delta^2 is never larger.
    """
    _check_bits(bits)
    return amplitude**2 / (2.0 ** np.asarray(bits, dtype=float) - 1.0) ** 2


def quantize_many(y, bits, amplitude, rng):
    """Vectorised quantizer: every ``y[i]`` with ``bits[i]`` bits.

    Rounds to one of the two neighbouring grid points, choosing the upper one
    with probability equal to the fractional position, so E[m] = y.
    """
    y = np.asarray(y, dtype=float)
    bits = np.broadcast_to(np.asarray(bits), y.shape)
    _check_bits(bits)
    if np.any(np.abs(y) > amplitude):
        raise InvalidArgument("readings must lie in [-A, A]; clamp before quantizing")
    levels = 2.0 ** bits.astype(float)
    delta = 2.0 * amplitude / (levels - 1.0)
    pos = (y + amplitude) / delta
    low = np.floor(pos)
    frac = pos - low
    snap = frac > 1.0 - _GRID_SNAP
    low = np.where(snap, low + 1.0, low)
    frac = np.where(snap, 0.0, frac)
    # the top grid point belongs to the last interval
    top = low >= levels - 1.0
    low = np.where(top, levels - 2.0, low)
    frac = np.where(top, 1.0, frac)
    up = rng.uniform(size=y.shape) < frac
    return -amplitude + (low + up) * delta


def quantize(y, bits, amplitude, rng, node_index=-1) -> QuantizedMessage:
    if not -amplitude <= y <= amplitude:
        raise InvalidArgument(f"reading {y!r} outside [-{amplitude}, {amplitude}]")
    value = quantize_many(np.array([y]), np.array([bits]), amplitude, rng)[0]
    return QuantizedMessage(value=float(value), bits=int(bits), node_index=node_index)
