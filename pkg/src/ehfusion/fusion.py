"""LMMSE fusion and the BMSE as a function of bits or transmit energies."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import linalg

from .errors import InvalidArgument
from .quantizer import quant_noise_variance
from .signal_model import SignalPrior

_EIG_FLOOR = 1e-12


@dataclass(frozen=True)
class FusionInput:
    """Messages reaching the fusion center in one slot.

    ``messages[i]`` is ignored for nodes with ``bits[i] == 0``.
    """

    messages: np.ndarray
    bits: np.ndarray

    @property
    def active_set(self) -> np.ndarray:
        return np.flatnonzero(np.asarray(self.bits) >= 1)


@dataclass(frozen=True)
class BmseContext:
    prior: SignalPrior
    cost: np.ndarray  # c_i(t), energy per (2**b - 1)
    energy: np.ndarray  # e_i(t)


def spd_solve(mat, rhs):
    """Solve ``mat @ x = rhs`` for symmetric positive-definite ``mat``.

    Falls back to an eigen-decomposition with eigenvalues floored at 1e-12 if
    the Cholesky factorisation fails in finite precision.
    """
    try:
        return linalg.cho_solve(linalg.cho_factor(mat, lower=True, check_finite=False), rhs,
                                check_finite=False)
    except linalg.LinAlgError:
        vals, vecs = np.linalg.eigh(0.5 * (mat + mat.T))
        vals = np.maximum(vals, _EIG_FLOOR)
        return vecs @ ((vecs.T @ rhs).T / vals).T


def noise_covariance_diag(prior: SignalPrior, bits) -> np.ndarray:
    """Diagonal of C_w: sigma_i^2 + A^2/(2**b_i - 1)^2, or +inf for idle nodes."""
    bits = np.asarray(bits)
    out = np.full(bits.shape, np.inf)
    on = bits >= 1
    out[on] = prior.noise_var[on] + quant_noise_variance(prior.amplitude, bits[on])
    return out


def information_matrix(prior: SignalPrior, weights) -> np.ndarray:
    """C_s^{-1} + sum_i weights_i u_i u_i^T."""
    u = prior.basis
    return prior.precision + (u.T * weights) @ u


def error_covariance(prior: SignalPrior, bits) -> np.ndarray:
    """C_eps = (C_s^{-1} + U^T C_w^{-1} U)^{-1} for the given bit allocation."""
    weights = 1.0 / noise_covariance_diag(prior, bits)
    info = information_matrix(prior, weights)
    return spd_solve(info, np.eye(prior.subspace_dim))


def bmse_bits(prior: SignalPrior, bits) -> float:
    return float(np.trace(error_covariance(prior, bits)))


def lmmse_estimate(prior: SignalPrior, fusion_input: FusionInput) -> np.ndarray:
    """LMMSE estimate of s from the messages of the active nodes.

    Idle nodes are dropped, which is what zeroing their row of C_w^{-1}
    amounts to. With nobody active the prior mean is returned.
    """
    active = fusion_input.active_set
    if active.size == 0:
        return prior.mean.copy()
    u = prior.basis[active]
    var = noise_covariance_diag(prior, np.asarray(fusion_input.bits))[active]
    resid = np.asarray(fusion_input.messages, dtype=float)[active] - u @ prior.mean
    info = prior.precision + (u.T / var) @ u
    return prior.mean + spd_solve(info, u.T @ (resid / var))


def _energy_weights(prior, cost, energy):
    # e^2 / (e^2 sigma^2 + A^2 c^2); exactly 0 for idle nodes
    e2 = np.asarray(energy, dtype=float) ** 2
    a2c2 = prior.amplitude**2 * np.asarray(cost, dtype=float) ** 2
    denom = e2 * prior.noise_var + a2c2
    return np.divide(e2, denom, out=np.zeros_like(e2), where=e2 > 0), e2, a2c2, denom


def bmse(ctx: BmseContext) -> float:
    """BMSE of the relaxed problem, as a function of the transmit energies."""
    weights, *_ = _energy_weights(ctx.prior, ctx.cost, ctx.energy)
    info = information_matrix(ctx.prior, weights)
    return float(np.trace(spd_solve(info, np.eye(ctx.prior.subspace_dim))))


def bmse_and_gradient(ctx: BmseContext):
    """Return ``(bmse, gradient)``; the gradient w.r.t. energies is <= 0.

    Component i is -h_i u_i^T L^{-2} u_i with
    h_i = 2 e_i A^2 c_i^2 / (e_i^2 sigma_i^2 + A^2 c_i^2)^2, which is exactly
    0 for idle nodes.
    """
    prior = ctx.prior
    weights, e2, a2c2, denom = _energy_weights(prior, ctx.cost, ctx.energy)
    info = information_matrix(prior, weights)
    inv = spd_solve(info, np.eye(prior.subspace_dim))
    energy = np.asarray(ctx.energy, dtype=float)
    h = np.divide(2.0 * energy * a2c2, denom**2, out=np.zeros_like(e2), where=e2 > 0)
    proj = prior.basis @ inv
    grad = -h * np.einsum("ij,ij->i", proj, proj)
    return float(np.trace(inv)), grad


def bmse_gradient(ctx: BmseContext) -> np.ndarray:
    return bmse_and_gradient(ctx)[1]


def g_i_max(prior: SignalPrior, i, e_i_max) -> float:
    """Gradient-magnitude constant used to size the battery offset.

    (1 / (2 e_max sigma_i^2)) u_i^T (C_s^{-1} + u_i u_i^T / sigma_i^2)^{-2} u_i.

    Note: this is not a true supremum of |dBMSE/de_i|; the factor it uses
    for the matrix term corresponds to a noiseless channel while the scalar
    factor is maximised at a different channel. See ``g_i_max_safe``.
    """
    if not e_i_max > 0:
        raise InvalidArgument(f"e_i_max must be positive, got {e_i_max!r}")
    var = float(prior.noise_var[i])
    if var <= 0:
        raise InvalidArgument("the bound is undefined for noiseless nodes")
    u = prior.basis[i]
    info = prior.precision + np.outer(u, u) / var
    v = spd_solve(info, u)
    return float(v @ v) / (2.0 * e_i_max * var)


def g_i_max_safe(prior: SignalPrior, i, e_i_max) -> float:
    """A provable bound on |dBMSE/de_i| at e_i = e_i_max, any channel, any other node.

    With M the information from the prior and the other nodes (M >= C_s^{-1}),
    Sherman-Morrison gives u^T L^{-2} u = |M^{-1} u|^2 / (1 + k a)^2 with
    a = u^T M^{-1} u, and |M^{-1} u|^2 <= lambda_max(C_s) a. Maximising
    h(c) a / (1 + k(c) a)^2 over a and c is bounded by lambda_max(C_s) / (2 e_max).
    """
    if not e_i_max > 0:
        raise InvalidArgument(f"e_i_max must be positive, got {e_i_max!r}")
    lam = float(np.linalg.eigvalsh(prior.covariance)[-1])
    return lam / (2.0 * e_i_max)
