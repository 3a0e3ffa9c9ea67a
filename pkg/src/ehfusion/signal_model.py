"""Network geometry, graph-Laplacian signal subspace and Gaussian signal prior."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import linalg

from .errors import InvalidArgument


@dataclass(frozen=True)
class NetworkTopology:
    positions: np.ndarray  # (N, 2) metres, disk centred at the origin
    adjacency: np.ndarray
    laplacian: np.ndarray
    radius_m: float

    @property
    def node_count(self) -> int:
        return self.positions.shape[0]


@dataclass(frozen=True)
class SignalPrior:
    basis: np.ndarray  # U, (N, r)
    mean: np.ndarray  # mu_s, (r,)
    covariance: np.ndarray  # C_s, (r, r)
    noise_var: np.ndarray  # sigma_i^2, (N,)
    amplitude: float
    precision: np.ndarray = field(init=False, repr=False)
    cov_factor: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        cov = np.asarray(self.covariance, dtype=float)
        object.__setattr__(self, "cov_factor", np.linalg.cholesky(cov))
        cho = linalg.cho_factor(cov, lower=True)
        prec = linalg.cho_solve(cho, np.eye(cov.shape[0]))
        object.__setattr__(self, "precision", 0.5 * (prec + prec.T))

    @property
    def node_count(self) -> int:
        return self.basis.shape[0]

    @property
    def subspace_dim(self) -> int:
        return self.basis.shape[1]

    @property
    def worst_bmse(self) -> float:
        """Prior-only error, Tr{C_s}: what the fusion center gets with no data."""
        return float(np.trace(self.covariance))


@dataclass(frozen=True)
class SlotSignal:
    s: np.ndarray
    x: np.ndarray
    y: np.ndarray


def _rng(seed):
    return seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)


def build_topology(n, radius_m, kernel_variance, seed=None) -> NetworkTopology:
    """Drop ``n`` nodes uniformly on a disk and connect them with a Gaussian kernel.

    Pairwise distances are divided by the disk diameter before the kernel
    ``exp(-d^2 / (2 * kernel_variance))`` is applied.
    """
    if int(n) != n or n < 2:
        raise InvalidArgument(f"node count must be an integer >= 2, got {n!r}")
    if not radius_m > 0:
        raise InvalidArgument(f"radius_m must be positive, got {radius_m!r}")
    if not kernel_variance > 0:
        raise InvalidArgument(f"kernel_variance must be positive, got {kernel_variance!r}")
    rng = _rng(seed)
    n = int(n)
    rad = radius_m * np.sqrt(rng.uniform(size=n))
    ang = rng.uniform(0.0, 2.0 * np.pi, size=n)
    pos = np.column_stack([rad * np.cos(ang), rad * np.sin(ang)])

    dist = np.linalg.norm(pos[:, None, :] - pos[None, :, :], axis=-1) / (2.0 * radius_m)
    adj = np.exp(-dist**2 / (2.0 * kernel_variance))
    np.fill_diagonal(adj, 0.0)
    adj = 0.5 * (adj + adj.T)
    lap = np.diag(adj.sum(axis=1)) - adj
    return NetworkTopology(positions=pos, adjacency=adj, laplacian=lap, radius_m=float(radius_m))


def build_subspace(topology: NetworkTopology, r) -> np.ndarray:
    """Return the ``r`` Laplacian eigenvectors with the smallest eigenvalues.

    Columns are orthonormal, ordered by ascending eigenvalue, and signed so
    that the first non-negligible entry of each column is positive.
    """
    n = topology.node_count
    if int(r) != r or r < 1 or r > n:
        raise InvalidArgument(f"subspace dimension must be in [1, {n}], got {r!r}")
    _, vecs = np.linalg.eigh(topology.laplacian)
    basis = vecs[:, : int(r)].copy()
    for k in range(basis.shape[1]):
        col = basis[:, k]
        lead = np.flatnonzero(np.abs(col) > 1e-12)[0]
        if col[lead] < 0:
            basis[:, k] = -col
    return basis


def random_orthogonal(r, rng) -> np.ndarray:
    q, upper = np.linalg.qr(rng.standard_normal((r, r)))
    return q * np.sign(np.diag(upper))


def make_signal_prior(basis, worst_bmse_db, noise_var, amplitude, seed=None) -> SignalPrior:
    """Zero-mean prior with a random covariance whose trace is ``10**(worst_bmse_db/10)``."""
    if not noise_var > 0:
        raise InvalidArgument(f"noise_var must be positive, got {noise_var!r}")
    if not amplitude > 0:
        raise InvalidArgument(f"amplitude must be positive, got {amplitude!r}")
    basis = np.asarray(basis, dtype=float)
    rng = _rng(seed)
    r = basis.shape[1]
    q = random_orthogonal(r, rng)
    weights = 1.0 - rng.uniform(size=r)  # (0, 1]
    weights *= 10.0 ** (worst_bmse_db / 10.0) / weights.sum()
    cov = (q * weights) @ q.T
    cov = 0.5 * (cov + cov.T)
    return SignalPrior(
        basis=basis,
        mean=np.zeros(r),
        covariance=cov,
        noise_var=np.full(basis.shape[0], float(noise_var)),
        amplitude=float(amplitude),
    )


def sample_slot(prior: SignalPrior, rng) -> SlotSignal:
    """Draw one slot: latent s, field x = U s, and clamped noisy readings y."""
    r = prior.subspace_dim
    s = prior.mean + prior.cov_factor @ rng.standard_normal(r)
    x = prior.basis @ s
    noise = np.sqrt(prior.noise_var) * rng.standard_normal(prior.node_count)
    y = np.clip(x + noise, -prior.amplitude, prior.amplitude)
    return SlotSignal(s=s, x=x, y=y)
