"""Karhunen–Loève sampling and Gaussian moment estimates.

Paths are synthesised as ``U = sum_n sqrt(lambda_n) xi_n phi_n`` from a
truncated ``alpha = 0`` decomposition. The standard normals ``xi`` of path
``i`` come from a generator seeded by ``SeedSequence(seed, spawn_key=(i,))``,
so any path can be regenerated on its own and the batch does not depend on
how the work is split across threads.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.special import gammaln

from .errors import ConfigurationError
from .finitediff import delta_alpha_batch
from .grid import GridFunction, enumerate_multi_indices
from .spectral import SpectralDecomposition

__all__ = [
    "c_p",
    "c_p_asymptotic_ratio",
    "PathBatch",
    "MomentEstimate",
    "path_normals",
    "sample_paths",
    "empirical_sobolev_moment",
    "path_sobolev_powers",
]


def c_p(p: float) -> float:
    """``E|X|^p`` for a standard normal X, i.e. ``2^(p/2) Gamma((p+1)/2) / sqrt(pi)``."""
    p = float(p)
    if not p > 0:
        raise ConfigurationError(f"p must be positive, got {p}")
    if p.is_integer() and p % 2 == 0 and p <= 300:
        # even moments are the double factorials (p-1)!!
        return float(math.prod(range(1, int(p), 2)))
    return math.exp(0.5 * p * math.log(2.0) + gammaln(0.5 * (p + 1)) - 0.5 * math.log(math.pi))


def c_p_asymptotic_ratio(p: float) -> float:
    """``C_p^(-2/p) / (e / (p - 1))``, which tends to 1 as p grows."""
    p = float(p)
    if not p > 1:
        raise ConfigurationError(f"p must exceed 1, got {p}")
    log_cp = 0.5 * p * math.log(2.0) + gammaln(0.5 * (p + 1)) - 0.5 * math.log(math.pi)
    return math.exp(-2.0 / p * log_cp + math.log(p - 1.0) - 1.0)


def path_normals(seed: int, path: int, n_modes: int) -> np.ndarray:
    """The standard normals driving path number `path` of a batch."""
    ss = np.random.SeedSequence(int(seed), spawn_key=(int(path),))
    return np.random.Generator(np.random.PCG64(ss)).standard_normal(n_modes)


@dataclass(frozen=True, eq=False)
class PathBatch:
    decomposition: SpectralDecomposition
    paths: np.ndarray = field(repr=False)  # shape (n_paths, grid.size)
    seed: int
    truncation: int

    @property
    def grid(self):
        return self.decomposition.grid

    @property
    def n_paths(self) -> int:
        return self.paths.shape[0]

    def path(self, i: int) -> GridFunction:
        return GridFunction(self.grid, self.paths[i])


@dataclass(frozen=True)
class MomentEstimate:
    mean: float
    std_error: float
    n_paths: int
    p: float
    m: int

    def z_score(self, target: float) -> float:
        if self.std_error == 0:
            return 0.0 if self.mean == target else math.copysign(math.inf, self.mean - target)
        return (self.mean - target) / self.std_error

    def to_dict(self) -> dict:
        return {"mean": self.mean, "std_error": self.std_error, "n_paths": self.n_paths,
                "p": self.p, "m": self.m}


_BLOCK = 256


def sample_paths(dec: SpectralDecomposition, n_paths: int, seed: int = 42,
                 truncation: int | None = None, threads: int = 1) -> PathBatch:
    """Draw `n_paths` KL paths from the first `truncation` modes of `dec`."""
    if dec.alpha.order != 0:
        raise ConfigurationError("sampling needs the alpha = 0 decomposition")
    N = dec.truncation if truncation is None else int(truncation)
    if not 0 <= N <= dec.truncation:
        raise ConfigurationError(f"truncation {N} exceeds the {dec.truncation} retained modes")
    if n_paths < 1:
        raise ConfigurationError("n_paths must be >= 1")
    basis = dec.modes[:, :N] * np.sqrt(dec.eigenvalues[:N])

    def chunk(rng):
        xi = np.stack([path_normals(seed, i, N) for i in rng]) if len(rng) else np.zeros((0, N))
        return xi @ basis.T

    # fixed blocks, so BLAS sees the same shapes whatever the thread count
    threads = max(1, int(threads))
    ranges = [range(a, min(a + _BLOCK, n_paths)) for a in range(0, n_paths, _BLOCK)]
    if threads == 1:
        parts = [chunk(r) for r in ranges]
    else:
        with ThreadPoolExecutor(threads) as pool:
            parts = list(pool.map(chunk, ranges))
    paths = np.concatenate(parts, axis=0) if N else np.zeros((n_paths, dec.grid.size))
    return PathBatch(dec, paths, int(seed), N)


def path_sobolev_powers(batch: PathBatch, m: int, p: float) -> np.ndarray:
    """Per path, ``sum_{|alpha| <= m} ||delta_h^alpha U||_p^p`` over the grid interior."""
    grid = batch.grid
    mask = grid.interior_mask
    w = grid.weights[mask]
    total = np.zeros(batch.n_paths)
    for alpha in enumerate_multi_indices(grid.dim, m):
        vals = batch.paths if alpha.order == 0 else delta_alpha_batch(grid, batch.paths, alpha)
        total += np.abs(vals[:, mask]) ** p @ w
    return total


def empirical_sobolev_moment(batch: PathBatch, m: int, p: float) -> MomentEstimate:
    """Monte Carlo mean of ``||U||_{W^{m,p}(interior)}^p`` with its standard error."""
    if batch.n_paths < 2:
        raise ConfigurationError("need at least two paths for a standard error")
    p = float(p)
    if not p >= 1:
        raise ConfigurationError(f"p must be >= 1, got {p}")
    vals = path_sobolev_powers(batch, m, p)
    return MomentEstimate(float(vals.mean()), float(vals.std(ddof=1) / math.sqrt(vals.size)),
                          batch.n_paths, p, int(m))
