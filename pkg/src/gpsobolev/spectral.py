"""Nyström eigendecomposition of the operators ``E_k^alpha`` and trace computations.

``E_k^alpha f = int d^{alpha,alpha} k(., y) f(y) dy`` is discretised on a
quadrature grid as the symmetric matrix ``M = W^(1/2) K_alpha W^(1/2)``.
Its eigenvectors, rescaled by ``W^(-1/2)``, are weight-orthonormal grid
eigenfunctions.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, MarginTooSmall, NotPositiveDefinite, NumericError, \
    UnsupportedDerivative
from .finitediff import classify_ratio_sequence, delta_alpha_batch, fd_cross_diagonal, fd_cross_matrix
from .grid import Grid, GridFunction, MultiIndex, enumerate_multi_indices
from .kernels import TOL_PSD, Kernel

__all__ = [
    "SpectralDecomposition",
    "TraceEstimate",
    "NuclearReport",
    "resolve_source",
    "operator_matrix",
    "diagonal_values",
    "nystrom_decompose",
    "operator_spectrum",
    "trace_diagonal",
    "sigma_power_integral",
    "trace_refinement",
    "differentiated_mercer_trace",
    "rkhs_imbedding_trace",
    "nuclear_bound_report",
    "DEFAULT_MASS",
    "DEFAULT_MAX_MODES",
]

DEFAULT_MASS = 0.9999
DEFAULT_MAX_MODES = 500
SOURCES = ("analytic", "finite_difference")

CONVERGENT, DIVERGENT, INCONCLUSIVE = "CONVERGENT", "DIVERGENT", "INCONCLUSIVE"
_LABELS = {"bounded": CONVERGENT, "diverging": DIVERGENT, "inconclusive": INCONCLUSIVE}


def resolve_source(k: Kernel, alpha, derivative_source: str = "auto") -> str:
    """Pick ``analytic`` when closed forms exist for alpha, else ``finite_difference``."""
    alpha = MultiIndex(alpha)
    if derivative_source == "auto":
        return "analytic" if alpha.order <= k.analytic_order else "finite_difference"
    if derivative_source not in SOURCES:
        raise ConfigurationError(f"unknown derivative source {derivative_source!r}")
    if derivative_source == "analytic" and alpha.order > k.analytic_order:
        raise UnsupportedDerivative(
            f"{k.name}: no closed-form derivative for {alpha.label()}; use finite differences"
        )
    return derivative_source


def _region_mask(grid: Grid, region: str, source: str) -> np.ndarray:
    if region not in ("full", "interior"):
        raise ConfigurationError(f"region must be 'full' or 'interior', got {region!r}")
    if source == "finite_difference" and region == "full":
        raise ConfigurationError("finite-difference operators live on the interior region")
    return grid.interior_mask if region == "interior" else np.ones(grid.size, dtype=bool)


def _fd_step(grid: Grid, alpha: MultiIndex, h):
    h = grid.spacing if h is None else np.broadcast_to(np.asarray(h, dtype=float), (grid.dim,))
    reach = np.asarray(alpha) * h
    if np.any(reach > grid.margin * (1 + 1e-12)):
        raise MarginTooSmall(f"stencil for {alpha.label()} reaches {reach} beyond margin {grid.margin}")
    return h


def operator_matrix(k: Kernel, alpha, grid: Grid, derivative_source: str = "auto", h=None,
                    region: str = "full"):
    """Kernel matrix of ``d^{alpha,alpha} k`` on the region nodes, and the region mask."""
    alpha = MultiIndex(alpha)
    source = resolve_source(k, alpha, derivative_source)
    mask = _region_mask(grid, region, source)
    X = grid.nodes[mask]
    if source == "analytic":
        return k.matrix(X, alpha=alpha), mask, source
    return fd_cross_matrix(k, alpha, _fd_step(grid, alpha, h), X), mask, source


def diagonal_values(k: Kernel, alpha, grid: Grid, derivative_source: str = "auto", h=None,
                    region: str = "full"):
    """``d^{alpha,alpha} k(x, x)`` (or its difference quotient) on the region nodes."""
    alpha = MultiIndex(alpha)
    source = resolve_source(k, alpha, derivative_source)
    mask = _region_mask(grid, region, source)
    X = grid.nodes[mask]
    if source == "analytic":
        return k.diagonal(X, alpha), mask, source
    return fd_cross_diagonal(k, alpha, _fd_step(grid, alpha, h), X), mask, source


@dataclass(frozen=True, eq=False)
class SpectralDecomposition:
    """Descending Nyström spectrum with weight-orthonormal eigenfunctions.

    ``modes[:, n]`` holds the n-th eigenfunction at every grid node (zero
    outside the region the operator was assembled on).
    """

    alpha: MultiIndex
    grid: Grid
    eigenvalues: np.ndarray
    modes: np.ndarray = field(repr=False)
    all_eigenvalues: np.ndarray = field(repr=False)
    discarded_mass: float
    matrix_trace: float
    source: str
    region: str

    @property
    def truncation(self) -> int:
        return len(self.eigenvalues)

    @property
    def region_mask(self) -> np.ndarray:
        return self.grid.interior_mask if self.region == "interior" else np.ones(self.grid.size, bool)

    def eigenfunction(self, n: int) -> GridFunction:
        return GridFunction(self.grid, self.modes[:, n], self.region_mask)

    @property
    def eigenfunctions(self) -> list[GridFunction]:
        return [self.eigenfunction(n) for n in range(self.truncation)]

    def truncated(self, n_modes: int) -> "SpectralDecomposition":
        if not 0 <= n_modes <= self.truncation:
            raise ConfigurationError(f"cannot keep {n_modes} of {self.truncation} modes")
        dropped = float(self.all_eigenvalues[n_modes:].sum())
        return SpectralDecomposition(self.alpha, self.grid, self.eigenvalues[:n_modes],
                                     self.modes[:, :n_modes], self.all_eigenvalues, dropped,
                                     self.matrix_trace, self.source, self.region)

    def reconstruct(self, n_modes: int | None = None) -> np.ndarray:
        """``sum_n lambda_n phi_n(x_i) phi_n(x_j)`` on the region nodes."""
        n_modes = self.truncation if n_modes is None else n_modes
        V = self.modes[self.region_mask, :n_modes]
        return (V * self.eigenvalues[:n_modes]) @ V.T


def _sign_fix(vecs, tol=1e-12):
    # first component that is clearly nonzero becomes positive
    scale = np.max(np.abs(vecs), axis=0, keepdims=True)
    big = np.abs(vecs) > tol * np.where(scale > 0, scale, 1.0)
    first = np.argmax(big, axis=0)
    signs = np.sign(vecs[first, np.arange(vecs.shape[1])])
    signs[signs == 0] = 1.0
    return vecs * signs


def nystrom_decompose(k: Kernel, alpha, grid: Grid, derivative_source: str = "auto", h=None,
                      region: str = "full", mass: float = DEFAULT_MASS,
                      max_modes: int | None = DEFAULT_MAX_MODES) -> SpectralDecomposition:
    """Eigendecomposition of the Nyström discretisation of ``E_k^alpha``.

    Parameters
    ----------
    k : Kernel
    alpha : multi-index
    grid : Grid
    derivative_source : {"auto", "analytic", "finite_difference"}
        Where ``d^{alpha,alpha} k`` comes from. Finite differences use step
        `h` (default: node spacing) and force ``region="interior"``.
    region : {"full", "interior"}
    mass : float
        Modes are retained until this fraction of the matrix trace is
        reached; ``mass >= 1`` keeps every eigenvalue above the numerical
        rank threshold ``lambda_1 * N * eps``.
    max_modes : int or None
        Hard cap on retained modes.
    """
    alpha = MultiIndex(alpha)
    source = resolve_source(k, alpha, derivative_source)
    if source == "finite_difference":
        region = "interior"
    K, mask, source = operator_matrix(k, alpha, grid, source, h, region)
    sw = np.sqrt(grid.weights[mask])
    M = sw[:, None] * K * sw[None, :]
    M = 0.5 * (M + M.T)
    if not np.all(np.isfinite(M)):
        raise NumericError(f"{k.name}: non-finite operator matrix for {alpha.label()}")
    try:
        vals, vecs = np.linalg.eigh(M)
    except np.linalg.LinAlgError as exc:
        raise NumericError(f"eigensolve failed: {exc}") from exc
    vals, vecs = vals[::-1].copy(), vecs[:, ::-1]
    top = max(float(vals[0]), 0.0) if vals.size else 0.0
    if vals.size and vals[-1] < -TOL_PSD * max(top, 1e-300) and vals[-1] < -1e-14:
        raise NotPositiveDefinite(
            f"{k.name}: Nyström eigenvalue {vals[-1]:.3e} below -{TOL_PSD} x {top:.3e}"
        )
    trace = float(np.trace(M))
    # numerical rank cut, as in numpy.linalg.matrix_rank
    positive = vals > top * vals.size * np.finfo(float).eps
    clipped = np.where(positive, vals, 0.0)
    if top <= 0 or trace <= 0:
        keep = 0
    elif mass >= 1.0:
        keep = int(np.count_nonzero(positive))
    else:
        keep = int(np.searchsorted(np.cumsum(clipped), mass * trace) + 1)
        keep = min(keep, int(np.count_nonzero(positive)))
    if max_modes is not None:
        keep = min(keep, int(max_modes))
    vecs = _sign_fix(vecs[:, :keep])
    modes = np.zeros((grid.size, keep))
    modes[mask] = vecs / sw[:, None]
    return SpectralDecomposition(
        alpha=alpha, grid=grid, eigenvalues=clipped[:keep], modes=modes,
        all_eigenvalues=vals, discarded_mass=float(vals[keep:].sum()),
        matrix_trace=trace, source=source, region=region,
    )


def operator_spectrum(k: Kernel, alpha, grid: Grid, derivative_source: str = "auto", h=None,
                      region: str = "full") -> np.ndarray:
    """All eigenvalues of the weighted operator matrix, descending, without eigenvectors."""
    M, mask, _ = operator_matrix(k, alpha, grid, derivative_source, h, region)
    sw = np.sqrt(grid.weights[mask])
    return np.linalg.eigvalsh(sw[:, None] * M * sw[None, :])[::-1]


def trace_diagonal(k: Kernel, alpha, grid: Grid, derivative_source: str = "auto", h=None,
                   region: str = "full") -> float:
    """Quadrature of ``int d^{alpha,alpha} k(x, x) dx`` over the region."""
    diag, mask, _ = diagonal_values(k, alpha, grid, derivative_source, h, region)
    return float(np.dot(grid.weights[mask], diag))


def sigma_power_integral(k: Kernel, alpha, grid: Grid, p: float, derivative_source: str = "auto",
                         h=None, region: str = "full") -> float:
    """Quadrature of ``int sigma_alpha(x)^p dx`` over the region."""
    diag, mask, _ = diagonal_values(k, alpha, grid, derivative_source, h, region)
    scale = max(1.0, float(np.max(np.abs(diag)))) if diag.size else 1.0
    if np.any(diag < -1e-10 * scale):
        raise NotPositiveDefinite(f"{k.name}: negative diagonal {diag.min():.3e} for {alpha}")
    return float(np.dot(grid.weights[mask], np.maximum(diag, 0.0) ** (0.5 * p)))


@dataclass
class TraceEstimate:
    """Diagonal and spectral traces of ``E_k^alpha`` along a grid ladder."""

    alpha: MultiIndex
    source: str
    diagonal_value: float
    spectral_value: float | None
    refinement_series: list
    grid_sizes: list
    classification: str
    spectral_grid_n: int | None = None

    def to_dict(self) -> dict:
        return {
            "alpha": list(self.alpha),
            "source": self.source,
            "diagonal_value": self.diagonal_value,
            "spectral_value": self.spectral_value,
            "refinement_series": list(self.refinement_series),
            "grid_sizes": list(self.grid_sizes),
            "classification": self.classification,
            "spectral_grid_n": self.spectral_grid_n,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TraceEstimate":
        return cls(MultiIndex(d["alpha"]), d["source"], d["diagonal_value"], d["spectral_value"],
                   list(d["refinement_series"]), list(d["grid_sizes"]), d["classification"],
                   d.get("spectral_grid_n"))


def classify(series) -> str:
    return _LABELS[classify_ratio_sequence(series)]


def trace_refinement(k: Kernel, alpha, grids, derivative_source: str = "auto",
                     region: str = "interior", spectral: bool = False) -> TraceEstimate:
    """Diagonal trace on each grid of a ladder, classified by its growth.

    With ``spectral=True`` the eigenvalue sum on the finest grid is also
    reported.
    """
    alpha = MultiIndex(alpha)
    source = resolve_source(k, alpha, derivative_source)
    series = [trace_diagonal(k, alpha, g, source, region=region) for g in grids]
    spectral_value = spectral_n = None
    if spectral:
        lam = operator_spectrum(k, alpha, grids[-1], source, region=region)
        spectral_value, spectral_n = float(lam.sum()), grids[-1].n
    return TraceEstimate(alpha, source, series[-1], spectral_value, series, [g.n for g in grids],
                         classify(series), spectral_n)


def differentiated_mercer_trace(dec: SpectralDecomposition, alpha, p_trunc: int | None = None,
                                h=None) -> float:
    """``sum_{n <= p_trunc} lambda_n ||delta_h^alpha phi_n||^2`` over the interior.

    `dec` must be the alpha = 0 decomposition on the full grid, so that the
    eigenfunctions are known inside the margin band.
    """
    alpha = MultiIndex(alpha)
    if dec.alpha.order != 0 or dec.region != "full":
        raise ConfigurationError("differentiated Mercer trace needs the alpha=0 full-grid decomposition")
    n = dec.truncation if p_trunc is None else min(int(p_trunc), dec.truncation)
    if n == 0:
        return 0.0
    grid = dec.grid
    mask = grid.interior_mask
    D = delta_alpha_batch(grid, dec.modes[:, :n].T, alpha, h)
    norms = (D[:, mask] ** 2) @ grid.weights[mask]
    return float(np.dot(dec.eigenvalues[:n], norms))


def rkhs_imbedding_trace(k: Kernel, m: int, grid: Grid, derivative_source: str = "auto", h=None,
                         region: str = "full") -> float:
    """``sum_{|alpha| <= m} Tr(E_k^alpha)``, each trace from the diagonal formula."""
    total = 0.0
    for alpha in enumerate_multi_indices(k.dimension, m):
        try:
            source = resolve_source(k, alpha, derivative_source)
            reg = "interior" if source == "finite_difference" else region
            total += trace_diagonal(k, alpha, grid, source, h, reg)
        except (UnsupportedDerivative, MarginTooSmall, NotPositiveDefinite) as exc:
            raise type(exc)(f"alpha={alpha.label()}: {exc}") from exc
    return total


# ---------------------------------------------------------------------------
# L^p nuclear bounds


@dataclass
class NuclearReport:
    p: float
    sigma_p_sq: float
    nu_upper: float
    opnorm_lower: float
    c_p_factor: float
    eigenvalue_sum: float
    decomposition_bound: float | None
    checks: list

    @property
    def passed(self) -> bool:
        return all(c["passed"] for c in self.checks)

    def to_dict(self) -> dict:
        return {
            "p": self.p,
            "sigma_p_sq": self.sigma_p_sq,
            "nu_upper": self.nu_upper,
            "opnorm_lower": self.opnorm_lower,
            "c_p_factor": self.c_p_factor,
            "eigenvalue_sum": self.eigenvalue_sum,
            "decomposition_bound": self.decomposition_bound,
            "checks": [dict(c) for c in self.checks],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "NuclearReport":
        return cls(d["p"], d["sigma_p_sq"], d["nu_upper"], d["opnorm_lower"], d["c_p_factor"],
                   d["eigenvalue_sum"], d["decomposition_bound"], [dict(c) for c in d["checks"]])


def _check(name, lhs, rhs, rtol=1e-9):
    return {"name": name, "lhs": float(lhs), "rhs": float(rhs),
            "passed": bool(lhs <= rhs * (1 + rtol) + 1e-300)}


def _weighted_norm_sq(values, w, p):
    return np.sum(w[:, None] * np.abs(values) ** p, axis=0) ** (2.0 / p)


def nuclear_bound_report(k: Kernel, p: float, grid: Grid, dec: SpectralDecomposition | None = None,
                         opnorm_modes: int = 10) -> NuclearReport:
    """Computable sides of the nuclear-norm sandwich for ``E_k`` acting into ``L^p``.

    The nuclear norm itself is an infimum over all representations and is
    not computed. Reported instead:

    * ``nu_upper = sum_n lambda_n ||phi_n||_p^2`` (one admissible representation),
    * ``opnorm_lower = max_n lambda_n / ||phi_n||_q^2`` (a lower bound on the
      operator norm, hence on the nuclear norm),
    * for ``p < 2``, the factorisation bound through ``L^2`` with
      ``A f = f sigma^(1 - p/2)`` and the rescaled kernel
      ``k_0 = k sigma^(p/2-1) (x) sigma^(p/2-1)``.
    """
    from .sampler import c_p

    p = float(p)
    if not (1.0 < p < math.inf):
        raise ConfigurationError(f"p must lie in (1, inf), got {p}")
    if dec is None:
        dec = nystrom_decompose(k, MultiIndex.zero(k.dimension), grid, "analytic", mass=1.0,
                                max_modes=None)
    w = grid.weights
    diag = np.maximum(k.diagonal(grid.nodes), 0.0)
    sigma = np.sqrt(diag)
    sigma_p_sq = float(np.dot(w, sigma**p) ** (2.0 / p))
    lam = dec.eigenvalues
    nu_upper = float(np.dot(lam, _weighted_norm_sq(dec.modes, w, p))) if lam.size else 0.0
    q = p / (p - 1.0)
    head = min(opnorm_modes, lam.size)
    if head:
        qn = _weighted_norm_sq(dec.modes[:, :head], w, q)
        opnorm_lower = float(np.max(lam[:head] / qn))
    else:
        opnorm_lower = 0.0
    cpf = float(c_p(p) ** (-2.0 / p))
    eig_sum = float(dec.all_eigenvalues.sum())
    checks = []
    decomposition_bound = None
    if p >= 2:
        checks.append(_check("sigma_p_sq <= nu_upper", sigma_p_sq, nu_upper))
        checks.append(_check("c_p_factor * opnorm_lower <= sigma_p_sq", cpf * opnorm_lower, sigma_p_sq))
    if p == 2:
        rel = abs(sigma_p_sq - eig_sum) / max(abs(eig_sum), 1e-300)
        checks.append({"name": "sigma_2_sq == eigenvalue_sum", "lhs": sigma_p_sq, "rhs": eig_sum,
                       "passed": bool(rel <= 1e-3 or (sigma_p_sq == 0 and eig_sum == 0))})
    if p < 2:
        scale = np.where(sigma > 0, sigma, 1.0) ** (0.5 * p - 1.0) * (sigma > 0)
        K0 = k.matrix(grid.nodes) * np.outer(scale, scale)
        sw = np.sqrt(w)
        nu_s = float(np.linalg.eigvalsh(sw[:, None] * K0 * sw[None, :]).sum())
        a_norm = float(np.dot(w, sigma**p) ** (1.0 / p - 0.5))
        decomposition_bound = a_norm**2 * nu_s
        checks.append(_check("opnorm_lower <= A^2 nu(S)", opnorm_lower, decomposition_bound))
        checks.append(_check("A^2 nu(S) <= sigma_p_sq", decomposition_bound, sigma_p_sq, 1e-6))
        checks.append(_check("sigma_p_sq <= c_p_factor * A^2 nu(S)", sigma_p_sq, cpf * decomposition_bound))
    return NuclearReport(p, sigma_p_sq, nu_upper, opnorm_lower, cpf, eig_sum, decomposition_bound, checks)
