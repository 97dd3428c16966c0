"""Box domains, tensor-product quadrature grids and grid functions.

Everything else in the package computes on these objects. Grids are
immutable: the node and weight arrays are marked read-only.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .errors import ConfigurationError

__all__ = [
    "MultiIndex",
    "Box",
    "Grid",
    "GridFunction",
    "build_grid",
    "default_margin",
    "lp_norm",
    "lp_power",
    "enumerate_multi_indices",
    "MAX_DIMENSION",
]

MAX_DIMENSION = 3
RULES = ("midpoint", "gauss_legendre")


class MultiIndex(tuple):
    """Tuple of non-negative integers, one per coordinate direction."""

    def __new__(cls, entries):
        if isinstance(entries, (int, np.integer)):
            entries = (entries,)
        entries = tuple(int(e) for e in entries)
        if not entries:
            raise ConfigurationError("multi-index must have at least one entry")
        if any(e < 0 for e in entries):
            raise ConfigurationError(f"multi-index entries must be >= 0, got {entries}")
        return super().__new__(cls, entries)

    @property
    def dim(self) -> int:
        return len(self)

    @property
    def order(self) -> int:
        return sum(self)

    def __add__(self, other):
        other = MultiIndex(other)
        if len(other) != len(self):
            raise ConfigurationError("multi-indices of different dimension")
        return MultiIndex(a + b for a, b in zip(self, other))

    def __repr__(self):
        return f"MultiIndex{tuple(self)}"

    def label(self) -> str:
        return "(" + ",".join(str(e) for e in self) + ")"

    @classmethod
    def zero(cls, d: int) -> "MultiIndex":
        return cls((0,) * d)


def enumerate_multi_indices(d: int, m: int) -> list[MultiIndex]:
    """All multi-indices of dimension `d` with order at most `m`.

    Returned in ascending lexicographic order; there are ``C(d+m, m)`` of them.
    """
    if d < 1 or m < 0:
        raise ConfigurationError(f"need d >= 1 and m >= 0, got d={d}, m={m}")
    return [MultiIndex(a) for a in itertools.product(range(m + 1), repeat=d) if sum(a) <= m]


@dataclass(frozen=True)
class Box:
    """Axis-aligned box ``prod_i (lower[i], upper[i])``."""

    lower: tuple
    upper: tuple

    def __post_init__(self):
        lower = tuple(float(v) for v in np.atleast_1d(self.lower))
        upper = tuple(float(v) for v in np.atleast_1d(self.upper))
        if len(lower) != len(upper):
            raise ConfigurationError("box bounds have different lengths")
        if not 1 <= len(lower) <= MAX_DIMENSION:
            raise ConfigurationError(f"box dimension must be in 1..{MAX_DIMENSION}")
        if not all(math.isfinite(a) and math.isfinite(b) and a < b for a, b in zip(lower, upper)):
            raise ConfigurationError(f"invalid box bounds {lower}, {upper}")
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)

    @classmethod
    def unit(cls, d: int = 1) -> "Box":
        return cls((0.0,) * d, (1.0,) * d)

    @property
    def dim(self) -> int:
        return len(self.lower)

    @property
    def edges(self) -> np.ndarray:
        return np.subtract(self.upper, self.lower)

    def volume(self) -> float:
        return float(np.prod(self.edges))

    def contains(self, points, tol: float = 1e-12) -> np.ndarray:
        """Boolean mask of points lying in the closed box (up to `tol`)."""
        pts = np.asarray(points, dtype=float).reshape(-1, self.dim)
        lo, hi = np.asarray(self.lower), np.asarray(self.upper)
        return np.all((pts >= lo - tol) & (pts <= hi + tol), axis=1)

    def to_dict(self) -> dict:
        return {"lower": list(self.lower), "upper": list(self.upper)}


def _axis_rule(a: float, b: float, n: int, rule: str):
    if rule == "midpoint":
        h = (b - a) / n
        nodes = a + (np.arange(n) + 0.5) * h
        weights = np.full(n, h)
    else:
        t, w = np.polynomial.legendre.leggauss(n)
        nodes = 0.5 * (b - a) * t + 0.5 * (a + b)
        weights = 0.5 * (b - a) * w
    return nodes, weights


@dataclass(frozen=True, eq=False)
class Grid:
    """Tensor-product quadrature grid on a box.

    Nodes are stored in C order: the last coordinate varies fastest, so
    ``values.reshape(grid.shape)`` gives an array indexed by per-axis node
    numbers.
    """

    box: Box
    n: int
    rule: str
    margin: float
    axes: tuple = field(repr=False)
    axis_weights: tuple = field(repr=False)

    @property
    def dim(self) -> int:
        return self.box.dim

    @property
    def shape(self) -> tuple:
        return (self.n,) * self.dim

    @property
    def size(self) -> int:
        return self.n**self.dim

    @property
    def is_uniform(self) -> bool:
        return self.rule == "midpoint"

    @cached_property
    def spacing(self) -> np.ndarray:
        """Node spacing per axis (midpoint grids only)."""
        if not self.is_uniform:
            raise ConfigurationError("node spacing is only defined for midpoint grids")
        return self.box.edges / self.n

    @cached_property
    def nodes(self) -> np.ndarray:
        mesh = np.meshgrid(*self.axes, indexing="ij")
        pts = np.stack([m.ravel() for m in mesh], axis=1)
        pts.setflags(write=False)
        return pts

    @cached_property
    def weights(self) -> np.ndarray:
        w = self.axis_weights[0]
        for wi in self.axis_weights[1:]:
            w = np.multiply.outer(w, wi)
        w = np.ascontiguousarray(w).ravel()
        w.setflags(write=False)
        return w

    @cached_property
    def interior_axis_slices(self) -> tuple:
        """Per-axis contiguous index ranges of nodes at distance >= margin from the boundary."""
        slices = []
        tol = 1e-12 * float(np.max(self.box.edges))
        for ax, a, b in zip(self.axes, self.box.lower, self.box.upper):
            ok = np.nonzero((ax >= a + self.margin - tol) & (ax <= b - self.margin + tol))[0]
            if ok.size == 0:
                slices.append(slice(0, 0))
            else:
                slices.append(slice(int(ok[0]), int(ok[-1]) + 1))
        return tuple(slices)

    @cached_property
    def interior_mask(self) -> np.ndarray:
        mask = np.zeros(self.shape, dtype=bool)
        mask[self.interior_axis_slices] = True
        mask = mask.ravel()
        mask.setflags(write=False)
        return mask

    def interior_volume(self) -> float:
        return float(self.weights[self.interior_mask].sum())

    def function(self, f) -> "GridFunction":
        """Sample a vectorised callable ``f(points) -> values`` at the nodes."""
        return GridFunction(self, np.asarray(f(self.nodes), dtype=float).reshape(self.size))

    def refined(self, factor: int = 2) -> "Grid":
        """Same box, rule and margin with ``factor`` times as many nodes per axis."""
        return build_grid(self.box, self.n * factor, self.rule, self.margin)

    def describe(self) -> dict:
        return {"box": self.box.to_dict(), "n": self.n, "rule": self.rule, "margin": self.margin}


def default_margin(box: Box, n: int) -> float:
    """Twice the largest node spacing, capped at a quarter of the shortest edge."""
    return min(2.0 * float(np.max(box.edges)) / n, 0.25 * float(np.min(box.edges)))


def build_grid(box: Box, n: int, rule: str = "midpoint", margin: float | None = None) -> Grid:
    """Tensor-product grid with `n` nodes per axis.

    Parameters
    ----------
    box : Box
    n : int
        Nodes per axis, at least 2.
    rule : {"midpoint", "gauss_legendre"}
    margin : float, optional
        Width of the boundary band excluded from finite-difference
        evaluations. Defaults to :func:`default_margin`.
    """
    if not isinstance(box, Box):
        box = Box(*box)
    if rule not in RULES:
        raise ConfigurationError(f"unknown quadrature rule {rule!r}; expected one of {RULES}")
    if int(n) != n or n < 2:
        raise ConfigurationError(f"n must be an integer >= 2, got {n}")
    n = int(n)
    if margin is None:
        margin = default_margin(box, n)
    margin = float(margin)
    if not (0.0 <= margin < 0.5 * float(np.min(box.edges))):
        raise ConfigurationError(
            f"margin {margin} must be non-negative and below half the smallest box edge"
        )
    axes, axis_weights = [], []
    for a, b in zip(box.lower, box.upper):
        x, w = _axis_rule(a, b, n, rule)
        x.setflags(write=False)
        w.setflags(write=False)
        axes.append(x)
        axis_weights.append(w)
    return Grid(box, n, rule, margin, tuple(axes), tuple(axis_weights))


@dataclass(frozen=True, eq=False)
class GridFunction:
    """Real values attached to the nodes of a grid.

    `mask`, when given, marks the nodes on which the values are defined
    (finite-difference output is only meaningful on the interior).
    """

    grid: Grid
    values: np.ndarray
    mask: np.ndarray | None = None

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float).reshape(-1)
        if values.size != self.grid.size:
            raise ConfigurationError(
                f"expected {self.grid.size} values for this grid, got {values.size}"
            )
        object.__setattr__(self, "values", values)
        if self.mask is not None:
            mask = np.asarray(self.mask, dtype=bool).reshape(-1)
            if mask.size != self.grid.size:
                raise ConfigurationError("mask size does not match grid")
            object.__setattr__(self, "mask", mask)

    def as_array(self) -> np.ndarray:
        return self.values.reshape(self.grid.shape)

    def restricted(self, mask) -> "GridFunction":
        mask = np.asarray(mask, dtype=bool)
        if self.mask is not None:
            mask = mask & self.mask
        return GridFunction(self.grid, self.values, mask)

    def interior(self) -> "GridFunction":
        return self.restricted(self.grid.interior_mask)


def lp_norm(u: GridFunction, p: float) -> float:
    """Quadrature estimate of ``(int |u|^p)^(1/p)`` over the support of `u`."""
    p = float(p)
    if not (math.isfinite(p) and p >= 1.0):
        raise ConfigurationError(f"p must be a finite real >= 1, got {p}")
    w, v = u.grid.weights, u.values
    if u.mask is not None:
        w, v = w[u.mask], v[u.mask]
    a = np.abs(v)
    scale = a.max() if a.size else 0.0
    if scale == 0.0:
        return 0.0
    # rescale to avoid overflow for large p
    return float(scale * np.dot(w, (a / scale) ** p) ** (1.0 / p))


def lp_power(u: GridFunction, p: float) -> float:
    """``sum_i w_i |u_i|^p`` over the support of `u` (no root taken)."""
    w, v = u.grid.weights, u.values
    if u.mask is not None:
        w, v = w[u.mask], v[u.mask]
    return float(np.dot(w, np.abs(v) ** p))
