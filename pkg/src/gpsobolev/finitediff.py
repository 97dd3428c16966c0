"""Forward-difference operators on grid functions and on kernels.

``delta_h^alpha = prod_i ((tau_{h_i e_i} - I) / h_i)^{alpha_i}`` where
``tau_v u(x) = u(x + v)``. On a midpoint grid the steps are integer
multiples of the node spacing, so the operator maps grid values to grid
values; its output lives on the interior nodes (the margin band is where
the stencil would leave the box).
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, MarginTooSmall
from .grid import Grid, GridFunction, MultiIndex, enumerate_multi_indices, lp_norm
from .kernels import Kernel, _as_points

__all__ = [
    "DifferenceStencil",
    "stencil",
    "apply_delta_alpha",
    "apply_delta_alpha_adjoint",
    "delta_alpha_batch",
    "fd_cross_derivative",
    "fd_cross_matrix",
    "fd_cross_diagonal",
    "finite_difference_sobolev_ratio",
    "classify_ratio_sequence",
    "Bump",
    "bump_battery",
    "variational_ratios",
    "variational_derivative_test",
    "DIVERGE_FACTOR",
    "BOUNDED_FACTOR",
]

DIVERGE_FACTOR = 4.0
BOUNDED_FACTOR = 1.5
# relative slack on the thresholds; an exact 1/h law lands on DIVERGE_FACTOR
RATIO_RTOL = 1e-9
MAX_BATTERY = 200


@dataclass(frozen=True, eq=False)
class DifferenceStencil:
    """Offsets (in units of the per-axis step) and weights of ``delta_h^alpha``."""

    alpha: MultiIndex
    h: np.ndarray
    offsets: np.ndarray
    coefficients: np.ndarray

    def points(self, x) -> np.ndarray:
        """Stencil points ``x + offset * h``; shape ``(..., K, d)``."""
        x = np.asarray(x, dtype=float)
        return x[..., None, :] + self.offsets * self.h

    def apply(self, f, x) -> np.ndarray:
        """``delta_h^alpha f`` at x for a vectorised callable f."""
        vals = f(self.points(x))
        return np.tensordot(vals, self.coefficients, axes=([-1], [0]))


def _steps(h, d):
    h = np.broadcast_to(np.asarray(h, dtype=float), (d,)).copy()
    if np.any(h <= 0) or not np.all(np.isfinite(h)):
        raise ConfigurationError(f"finite-difference steps must be positive, got {h}")
    return h


def stencil(alpha, h) -> DifferenceStencil:
    """Build the forward-difference stencil for ``alpha`` with per-axis steps ``h``."""
    alpha = MultiIndex(alpha)
    h = _steps(h, alpha.dim)
    per_axis = []
    for a, hi in zip(alpha, h):
        per_axis.append([(j, (-1) ** (a - j) * math.comb(a, j) / hi**a) for j in range(a + 1)])
    offsets, coeffs = [], []
    for combo in itertools.product(*per_axis):
        offsets.append([j for j, _ in combo])
        coeffs.append(math.prod(c for _, c in combo))
    return DifferenceStencil(alpha, h, np.array(offsets, dtype=int), np.array(coeffs))


def _grid_steps(grid: Grid, h):
    """Integer node shifts matching step h (defaults to the node spacing)."""
    spacing = grid.spacing
    if h is None:
        return np.ones(grid.dim, dtype=int), spacing.copy()
    h = _steps(h, grid.dim)
    shifts = np.rint(h / spacing).astype(int)
    if np.any(shifts < 1) or not np.allclose(shifts * spacing, h, rtol=1e-9, atol=0):
        raise ConfigurationError(f"step {h} is not a multiple of the grid spacing {spacing}")
    return shifts, shifts * spacing


def delta_alpha_batch(grid: Grid, values, alpha, h=None, adjoint: bool = False) -> np.ndarray:
    """Apply ``delta_h^alpha`` (or its adjoint) to arrays of grid values.

    `values` has shape ``(..., grid.size)``. The result has the same shape;
    entries outside the interior are zero.
    """
    alpha = MultiIndex(alpha)
    if alpha.dim != grid.dim:
        raise ConfigurationError("multi-index dimension does not match grid")
    shifts, hh = _grid_steps(grid, h)
    st = stencil(alpha, hh)
    values = np.asarray(values, dtype=float)
    batch = values.shape[:-1]
    arr = values.reshape(batch + grid.shape)
    inner = grid.interior_axis_slices
    out = np.zeros_like(arr)
    lead = (slice(None),) * len(batch)
    # (tau_h - I)^* = tau_{-h} - I: mirrored offsets, same weights
    sign = -1 if adjoint else 1
    for off, c in zip(st.offsets, st.coefficients):
        src = []
        for sl, o, s in zip(inner, off, shifts):
            start, stop = sl.start + sign * o * s, sl.stop + sign * o * s
            if start < 0 or stop > grid.n:
                raise MarginTooSmall(
                    f"stencil for {alpha.label()} with step {hh} leaves the grid; "
                    f"increase the margin (now {grid.margin})"
                )
            src.append(slice(start, stop))
        out[lead + inner] += c * arr[lead + tuple(src)]
    return out.reshape(values.shape)


def apply_delta_alpha(u: GridFunction, alpha, h=None) -> GridFunction:
    """``delta_h^alpha u`` on the interior nodes of a midpoint grid.

    Parameters
    ----------
    u : GridFunction
    alpha : multi-index
    h : float or sequence, optional
        Step per axis; an integer multiple of the node spacing. Defaults to
        the spacing itself.

    Raises
    ------
    MarginTooSmall
        If the stencil leaves the grid from some interior node.
    """
    vals = delta_alpha_batch(u.grid, u.values, alpha, h)
    return GridFunction(u.grid, vals, u.grid.interior_mask)


def apply_delta_alpha_adjoint(v: GridFunction, alpha, h=None) -> GridFunction:
    """``prod_i ((tau_{-h_i e_i} - I) / h_i)^{alpha_i} v`` on the interior."""
    vals = delta_alpha_batch(v.grid, v.values, alpha, h, adjoint=True)
    return GridFunction(v.grid, vals, v.grid.interior_mask)


# ---------------------------------------------------------------------------
# kernels


def fd_cross_matrix(k: Kernel, alpha, h, X, Y=None) -> np.ndarray:
    """``[(delta_h^alpha (x) delta_h^alpha) k](X_i, Y_j)`` as a matrix."""
    X = _as_points(X, k.dimension).reshape(-1, k.dimension)
    Y = X if Y is None else _as_points(Y, k.dimension).reshape(-1, k.dimension)
    st = stencil(alpha, h)
    shift = st.offsets * st.h
    out = np.zeros((len(X), len(Y)))
    for oa, ca in zip(shift, st.coefficients):
        for ob, cb in zip(shift, st.coefficients):
            out += (ca * cb) * k(X[:, None, :] + oa, Y[None, :, :] + ob)
    return out


def fd_cross_diagonal(k: Kernel, alpha, h, X) -> np.ndarray:
    """``[(delta_h^alpha (x) delta_h^alpha) k](x, x)`` at every row of X."""
    X = _as_points(X, k.dimension).reshape(-1, k.dimension)
    st = stencil(alpha, h)
    shift = st.offsets * st.h
    out = np.zeros(len(X))
    for oa, ca in zip(shift, st.coefficients):
        for ob, cb in zip(shift, st.coefficients):
            out += (ca * cb) * k(X + oa, X + ob)
    return out


def fd_cross_derivative(k: Kernel, alpha, h, x, y) -> float:
    """``(delta_h^alpha (x) delta_h^alpha) k`` at the pair (x, y)."""
    return float(fd_cross_matrix(k, alpha, h, x, y)[0, 0])


# ---------------------------------------------------------------------------
# finite-difference Sobolev control


def finite_difference_sobolev_ratio(u: GridFunction, m: int, p: float, h_sequence) -> dict:
    """Ratios ``||Delta_h u||_p / (|h_1| ... |h_l|)`` for every alpha with 1 <= |alpha| <= m.

    For a coordinate composite ``Delta_h`` the ratio equals
    ``||delta_h^alpha u||_{L^p(interior)}``. Returns ``{alpha: array}``
    with one entry per step in `h_sequence`. Bounded sequences are
    consistent with ``u`` in ``W^{m,p}``; growing ones are evidence against.
    """
    out = {}
    for alpha in enumerate_multi_indices(u.grid.dim, m):
        if alpha.order == 0:
            continue
        out[alpha] = np.array([lp_norm(apply_delta_alpha(u, alpha, h), p) for h in h_sequence])
    return out


def classify_ratio_sequence(values) -> str:
    """Label a refinement sequence spanning a 4x reduction of the step.

    ``"diverging"`` when the last value is at least 4x the first,
    ``"bounded"`` when it is at most 1.5x, ``"inconclusive"`` otherwise.
    """
    values = np.asarray(values, dtype=float)
    if values.size < 2:
        raise ConfigurationError("need at least two values to classify")
    if not np.all(np.isfinite(values)):
        return "diverging"
    first, last = abs(values[0]), abs(values[-1])
    if last >= DIVERGE_FACTOR * first * (1 - RATIO_RTOL) and last > 0:
        return "diverging"
    if last <= BOUNDED_FACTOR * first * (1 + RATIO_RTOL):
        return "bounded"
    return "inconclusive"


# ---------------------------------------------------------------------------
# variational test against smooth bumps


def _bump_poly(j):
    # d^j/drho^j exp(-1/(1-rho)) = P_j(t) exp(-t), t = 1/(1-rho), dt/drho = t^2
    P = np.polynomial.Polynomial([1.0])
    t2 = np.polynomial.Polynomial([0.0, 0.0, 1.0])
    for _ in range(j):
        P = t2 * (P.deriv() - P)
    return P


def _bump_terms(gamma):
    # d_z^gamma F(|z|^2) as sum c * F^{(j)}(rho) z^mu
    terms = {(0, (0,) * len(gamma)): 1}
    for i, count in enumerate(gamma):
        for _ in range(count):
            new = {}
            for (j, mu), c in terms.items():
                up = list(mu)
                up[i] += 1
                new[(j + 1, tuple(up))] = new.get((j + 1, tuple(up)), 0) + 2 * c
                if mu[i]:
                    down = list(mu)
                    down[i] -= 1
                    new[(j, tuple(down))] = new.get((j, tuple(down)), 0) + c * mu[i]
            terms = {k: v for k, v in new.items() if v}
    return terms


@dataclass(frozen=True)
class Bump:
    """``x -> exp(-1 / (1 - |(x - center) / radius|^2))`` inside the ball, 0 outside."""

    center: tuple
    radius: float

    def __call__(self, X, alpha=None) -> np.ndarray:
        c = np.asarray(self.center, dtype=float)
        X = _as_points(X, c.size)
        alpha = MultiIndex.zero(c.size) if alpha is None else MultiIndex(alpha)
        z = (X - c) / self.radius
        rho = np.sum(z * z, axis=-1)
        inside = rho < 1.0
        t = 1.0 / (1.0 - np.where(inside, rho, 0.0))
        base = np.exp(-t)
        out = np.zeros(rho.shape)
        for (j, mu), coef in _bump_terms(tuple(alpha)).items():
            mono = np.ones(rho.shape)
            for i, e in enumerate(mu):
                if e:
                    mono = mono * z[..., i] ** e
            out = out + coef * _bump_poly(j)(t) * mono
        return np.where(inside, out * base, 0.0) / self.radius ** alpha.order


def bump_battery(grid: Grid, battery_size: int = MAX_BATTERY, n_scales: int = 3,
                 base_radius: float | None = None) -> list[Bump]:
    """Translated bumps at dyadic scales, all supported inside the grid interior.

    Scale s has radius ``base_radius / 2^s`` and centres on a lattice of that
    spacing. The default base radius is a quarter of the shortest interior
    edge. At most `battery_size` (capped at 200) bumps are kept, taken
    evenly from the full list.
    """
    battery_size = min(int(battery_size), MAX_BATTERY)
    if battery_size < 1:
        raise ConfigurationError("battery_size must be >= 1")
    lo = np.asarray(grid.box.lower) + grid.margin
    hi = np.asarray(grid.box.upper) - grid.margin
    if base_radius is None:
        base_radius = 0.25 * float(np.min(hi - lo))
    bumps = []
    for s in range(n_scales):
        r = base_radius / 2**s
        axes = []
        for a, b in zip(lo, hi):
            count = int(np.floor((b - a - 2 * r) / r + 1e-9)) + 1
            if count < 1:
                axes.append(np.array([0.5 * (a + b)]))
            else:
                start = 0.5 * (a + b) - 0.5 * (count - 1) * r
                axes.append(start + r * np.arange(count))
        for c in itertools.product(*axes):
            bumps.append(Bump(tuple(float(v) for v in c), r))
    if len(bumps) > battery_size:
        keep = np.unique(np.linspace(0, len(bumps) - 1, battery_size).round().astype(int))
        bumps = [bumps[i] for i in keep]
    return bumps


def variational_ratios(u: GridFunction, alpha, battery, p: float) -> np.ndarray:
    """``|int u d^alpha phi| / ||phi||_q`` for every bump, with ``1/p + 1/q = 1``."""
    p = float(p)
    if p <= 1:
        raise ConfigurationError("p must exceed 1 for the variational test")
    q = p / (p - 1.0)
    X, w = u.grid.nodes, u.grid.weights
    out = np.empty(len(battery))
    for i, phi in enumerate(battery):
        pair = np.dot(w, u.values * phi(X, alpha))
        norm = np.dot(w, np.abs(phi(X)) ** q) ** (1.0 / q)
        out[i] = abs(pair) / norm if norm > 0 else 0.0
    return out


def variational_derivative_test(u: GridFunction, alpha, battery_size: int = MAX_BATTERY,
                                p: float = 2.0, n_scales: int = 3,
                                base_radius: float | None = None) -> float:
    """Largest ``|int u d^alpha phi| / ||phi||_q`` over a bump battery.

    This lower-bounds ``||d^alpha u||_p`` when the weak derivative exists;
    growth under battery refinement is evidence that it does not. A finite
    battery only gives supporting evidence, never a proof.
    """
    battery = bump_battery(u.grid, battery_size, n_scales, base_radius)
    return float(np.max(variational_ratios(u, alpha, battery, p)))
