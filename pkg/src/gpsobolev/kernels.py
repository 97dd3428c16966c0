"""Covariance kernels and their symmetric cross derivatives.

A :class:`Kernel` evaluates ``k(x, y)`` and, up to its
``analytic_order``, the mixed derivatives ``d^alpha_x d^beta_y k(x, y)``
in closed form. Requests beyond that order raise
:class:`~gpsobolev.errors.UnsupportedDerivative`; the caller then uses the
finite-difference oracle in :mod:`gpsobolev.finitediff`.

All evaluators are vectorised. Points are arrays of shape ``(..., d)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache

import numpy as np

from .errors import ConfigurationError, DomainError, NotPositiveDefinite, UnsupportedDerivative
from .grid import Box, MultiIndex

__all__ = [
    "Kernel",
    "StationaryKernel",
    "BrownianKernel",
    "FiniteRankKernel",
    "ZeroKernel",
    "BasisFunction",
    "Polynomial",
    "Sine",
    "Hat",
    "CustomBasis",
    "KernelSpec",
    "squared_exponential",
    "matern",
    "exponential",
    "brownian",
    "finite_rank",
    "hat_series",
    "dyadic_centers",
    "zero_kernel",
    "evaluate",
    "eval_cross_derivative",
    "sigma_alpha",
    "gram_psd_check",
    "TOL_PSD",
]

TOL_PSD = 1e-8
# order reported for kernels with derivatives of every order
UNLIMITED_ORDER = 8


def _as_points(x, d):
    x = np.asarray(x, dtype=float)
    if x.ndim == 0:
        x = x.reshape(1)
    if x.shape[-1] != d:
        if d == 1:
            x = x[..., None]
        else:
            raise ConfigurationError(f"points must have trailing dimension {d}, got shape {x.shape}")
    return x


def _mi(alpha, d):
    if alpha is None:
        return MultiIndex.zero(d)
    alpha = MultiIndex(alpha)
    if alpha.dim != d:
        raise ConfigurationError(f"multi-index {alpha} does not match dimension {d}")
    return alpha


class Kernel:
    """Base class for covariance kernels on a subset of R^d.

    Subclasses implement ``_value(x, y)`` and ``_cross(alpha, beta, x, y)``
    on broadcast-compatible point arrays.
    """

    name = "kernel"

    def __init__(self, dimension: int, params: dict | None = None, analytic_order: int = 0,
                 domain: Box | None = None, window: Box | None = None):
        if dimension < 1:
            raise ConfigurationError("dimension must be >= 1")
        self.dimension = int(dimension)
        self.params = dict(params or {})
        self.analytic_order = int(analytic_order)
        self.domain = domain
        # box used when a run does not name one
        self.window = window

    def __repr__(self):
        args = ", ".join(f"{k}={v!r}" for k, v in self.params.items())
        return f"{type(self).__name__}({self.name}, d={self.dimension}{', ' if args else ''}{args})"

    # -- checks ---------------------------------------------------------
    def check_points(self, *pts):
        if self.domain is None:
            return
        for x in pts:
            if not np.all(self.domain.contains(x)):
                raise DomainError(f"{self.name}: points outside domain {self.domain.to_dict()}")

    def check_order(self, alpha, beta):
        top = max(alpha.order, beta.order)
        if top > self.analytic_order:
            raise UnsupportedDerivative(
                f"{self.name}: no closed-form derivative of order {top} "
                f"(analytic order {self.analytic_order})"
            )

    def default_box(self) -> Box:
        if self.domain is not None:
            return self.domain
        return self.window if self.window is not None else Box.unit(self.dimension)

    # -- evaluation -----------------------------------------------------
    def __call__(self, x, y):
        x, y = _as_points(x, self.dimension), _as_points(y, self.dimension)
        self.check_points(x, y)
        return self._value(x, y)

    def cross(self, alpha, beta, x, y):
        """``d^alpha_x d^beta_y k`` at broadcast point arrays."""
        alpha, beta = _mi(alpha, self.dimension), _mi(beta, self.dimension)
        self.check_order(alpha, beta)
        x, y = _as_points(x, self.dimension), _as_points(y, self.dimension)
        self.check_points(x, y)
        if alpha.order == 0 and beta.order == 0:
            return self._value(x, y)
        return self._cross(alpha, beta, x, y)

    def matrix(self, X, Y=None, alpha=None, beta=None):
        """Matrix ``[d^alpha_x d^beta_y k(X_i, Y_j)]``; beta defaults to alpha."""
        X = _as_points(X, self.dimension).reshape(-1, self.dimension)
        Y = X if Y is None else _as_points(Y, self.dimension).reshape(-1, self.dimension)
        alpha = _mi(alpha, self.dimension)
        beta = alpha if beta is None else _mi(beta, self.dimension)
        return self.cross(alpha, beta, X[:, None, :], Y[None, :, :])

    def diagonal(self, X, alpha=None):
        """``d^{alpha,alpha} k(x, x)`` at every row of X."""
        X = _as_points(X, self.dimension).reshape(-1, self.dimension)
        alpha = _mi(alpha, self.dimension)
        return self.cross(alpha, alpha, X, X)

    def _value(self, x, y):
        raise NotImplementedError

    def _cross(self, alpha, beta, x, y):
        raise UnsupportedDerivative(self.name)

    def describe(self) -> dict:
        return {"name": self.name, "dimension": self.dimension, "params": dict(self.params)}


# ---------------------------------------------------------------------------
# stationary isotropic kernels k(x, y) = phi(|x - y|)
#
# With G_0 = phi and G_{j+1}(r) = G_j'(r) / r one has d_i G_j(|s|) = G_{j+1} s_i,
# so every derivative of phi(|s|) is a finite sum of terms c * G_j(r) * s^mu.


@lru_cache(maxsize=None)
def _radial_terms(gamma: tuple) -> tuple:
    terms = {(0, (0,) * len(gamma)): 1}
    for i, count in enumerate(gamma):
        for _ in range(count):
            new = {}
            for (j, mu), c in terms.items():
                up = list(mu)
                up[i] += 1
                key = (j + 1, tuple(up))
                new[key] = new.get(key, 0) + c
                if mu[i] > 0:
                    down = list(mu)
                    down[i] -= 1
                    key = (j, tuple(down))
                    new[key] = new.get(key, 0) + c * mu[i]
            terms = {k: v for k, v in new.items() if v != 0}
    return tuple(sorted(terms.items()))


@lru_cache(maxsize=None)
def _polyexp_ladder(q: tuple, j: int) -> tuple:
    """Laurent coefficients of G_j for phi(r) = sum_k q_k (a r)^k exp(-a r).

    Returned as ((power, Fraction), ...); the implied factor for power k is
    a^(k + 2j).
    """
    if j == 0:
        return tuple((k, Fraction(c)) for k, c in enumerate(q) if c != 0)
    new = {}
    for k, c in _polyexp_ladder(q, j - 1):
        if k != 0:
            new[k - 2] = new.get(k - 2, 0) + c * k
        new[k - 1] = new.get(k - 1, 0) - c
    return tuple(sorted((k, c) for k, c in new.items() if c != 0))


class StationaryKernel(Kernel):
    """Isotropic stationary kernel: squared exponential or half-integer Matérn."""

    def __init__(self, family: str, dimension: int, lengthscale: float, nu: float | None = None,
                 variance: float = 1.0):
        if not (lengthscale > 0 and math.isfinite(lengthscale)):
            raise ConfigurationError(f"lengthscale must be positive, got {lengthscale}")
        if not variance > 0:
            raise ConfigurationError(f"variance must be positive, got {variance}")
        params = {"lengthscale": float(lengthscale)}
        if variance != 1.0:
            params["variance"] = float(variance)
        if family == "squared_exponential":
            order = UNLIMITED_ORDER
            self.name = "squared_exponential"
        elif family == "matern":
            table = {0.5: ((1,), 1.0, 0), 1.5: ((1, 1), math.sqrt(3), 1),
                     2.5: ((1, 1, Fraction(1, 3)), math.sqrt(5), 2)}
            if nu not in table:
                raise ConfigurationError(f"Matérn smoothness must be one of 1/2, 3/2, 5/2; got {nu}")
            self._q, scale, order = table[nu]
            self._a = scale / lengthscale
            params = {"nu": float(nu), **params}
            self.name = "matern"
        else:
            raise ConfigurationError(f"unknown stationary family {family!r}")
        self.family = family
        self.lengthscale = float(lengthscale)
        self.variance = float(variance)
        super().__init__(dimension, params, order)

    def _ladder(self, j, r):
        """G_j(r) with r > 0, and the finite value G_j(0) (nan if singular)."""
        if self.family == "squared_exponential":
            c = (-1.0 / self.lengthscale**2) ** j
            return c * np.exp(-0.5 * (r / self.lengthscale) ** 2), c
        a = self._a
        coeffs = _polyexp_ladder(self._q, j)
        safe = np.where(r > 0, r, 1.0)
        acc = np.zeros_like(r)
        at_zero = 0.0
        for k, c in coeffs:
            factor = float(c) * a ** (k + 2 * j)
            acc = acc + factor * safe**k
            if k == 0:
                at_zero += factor
            elif k < 0:
                at_zero = math.nan
        return acc * np.exp(-a * r), at_zero

    def _radial(self, gamma, s):
        r = np.sqrt(np.sum(s * s, axis=-1))
        zero = r == 0
        out = np.zeros(r.shape)
        for (j, mu), c in _radial_terms(tuple(gamma)):
            g, g0 = self._ladder(j, r)
            mono = np.ones(r.shape)
            for i, e in enumerate(mu):
                if e:
                    mono = mono * s[..., i] ** e
            term = g * mono
            if sum(mu) == 0:
                term = np.where(zero, g0, term)
            else:
                # valid orders only: monomial dominates the ladder singularity
                term = np.where(zero, 0.0, term)
            out = out + c * term
        return self.variance * out

    def _value(self, x, y):
        return self._radial((0,) * self.dimension, x - y)

    def _cross(self, alpha, beta, x, y):
        sign = -1.0 if beta.order % 2 else 1.0
        return sign * self._radial(alpha + beta, x - y)


class BrownianKernel(Kernel):
    """``k(x, y) = min(x, y)`` on [0, 1]."""

    name = "brownian"

    def __init__(self):
        super().__init__(1, {}, 0, Box((0.0,), (1.0,)))

    def _value(self, x, y):
        return np.minimum(x[..., 0], y[..., 0])


class ZeroKernel(Kernel):
    name = "zero"

    def __init__(self, dimension: int = 1):
        super().__init__(dimension, {}, UNLIMITED_ORDER)

    def _value(self, x, y):
        return np.zeros(np.broadcast_shapes(x.shape, y.shape)[:-1])

    def _cross(self, alpha, beta, x, y):
        return self._value(x, y)


# ---------------------------------------------------------------------------
# finite-rank kernels k(x, y) = sum_i f_i(x) f_i(y)


class BasisFunction:
    """A real function on R^d with closed-form derivatives up to `order`."""

    dimension = 1
    order = 0

    def __call__(self, x, alpha=None):
        x = _as_points(x, self.dimension)
        alpha = _mi(alpha, self.dimension)
        if alpha.order > self.order:
            raise UnsupportedDerivative(f"{self!r}: derivative order {alpha.order} unavailable")
        return self._eval(x, alpha)

    def _eval(self, x, alpha):
        raise NotImplementedError

    def to_dict(self) -> dict:
        raise ConfigurationError(f"{type(self).__name__} has no JSON form")


class Polynomial(BasisFunction):
    """``sum_j c_j x^j`` in one variable."""

    order = UNLIMITED_ORDER

    def __init__(self, coefficients, scale: float = 1.0):
        self.coefficients = [float(c) for c in coefficients]
        self.scale = float(scale)
        self._p = np.polynomial.Polynomial(self.coefficients) * self.scale

    def __repr__(self):
        return f"Polynomial({self.coefficients})"

    def _eval(self, x, alpha):
        return self._p.deriv(alpha[0])(x[..., 0]) if alpha[0] else self._p(x[..., 0])

    def to_dict(self):
        d = {"type": "poly", "coefficients": self.coefficients}
        if self.scale != 1.0:
            d["scale"] = self.scale
        return d


class Sine(BasisFunction):
    """``amplitude * sin(frequency * x + phase)``."""

    order = UNLIMITED_ORDER

    def __init__(self, frequency: float, phase: float = 0.0, amplitude: float = 1.0):
        self.frequency, self.phase, self.amplitude = float(frequency), float(phase), float(amplitude)

    def __repr__(self):
        return f"Sine({self.frequency}, {self.phase}, {self.amplitude})"

    def _eval(self, x, alpha):
        n = alpha[0]
        # n-th derivative of sin(t) is sin(t + n pi/2)
        arg = self.frequency * x[..., 0] + self.phase + n * math.pi / 2
        return self.amplitude * self.frequency**n * np.sin(arg)

    def to_dict(self):
        return {"type": "sin", "frequency": self.frequency, "phase": self.phase,
                "amplitude": self.amplitude}


class Hat(BasisFunction):
    """``scale * max(0, 1 - |x - center|)``; first derivative taken almost everywhere."""

    order = 1

    def __init__(self, center: float, scale: float = 1.0):
        self.center, self.scale = float(center), float(scale)

    def __repr__(self):
        return f"Hat({self.center}, scale={self.scale})"

    def _eval(self, x, alpha):
        t = x[..., 0] - self.center
        if alpha[0] == 0:
            return self.scale * np.maximum(0.0, 1.0 - np.abs(t))
        # average of one-sided derivatives at the three kinks
        inside = np.abs(t) < 1.0
        edge = np.abs(t) == 1.0
        return self.scale * (-np.sign(t) * (inside + 0.5 * edge))

    def to_dict(self):
        return {"type": "hat", "center": self.center, "weight": self.scale**2}


class CustomBasis(BasisFunction):
    """Basis function from user callables.

    ``derivatives`` maps multi-index tuples to vectorised callables of
    points with shape ``(..., d)``; the zero index must be present.
    """

    def __init__(self, derivatives: dict, dimension: int = 1):
        self.dimension = dimension
        self._funcs = {MultiIndex(k): f for k, f in derivatives.items()}
        if MultiIndex.zero(dimension) not in self._funcs:
            raise ConfigurationError("CustomBasis needs the function itself under the zero index")
        # largest order for which every index is present
        order = 0
        while all(MultiIndex(a) in self._funcs for a in _indices_of_order(dimension, order + 1)):
            order += 1
        self.order = order

    def _eval(self, x, alpha):
        return np.asarray(self._funcs[alpha](x), dtype=float)


def _indices_of_order(d, m):
    from .grid import enumerate_multi_indices

    return [a for a in enumerate_multi_indices(d, m) if a.order == m]


class FiniteRankKernel(Kernel):
    """``k(x, y) = sum_i f_i(x) f_i(y)``; derivatives distribute over the sum."""

    name = "finite_rank"

    def __init__(self, functions, dimension: int | None = None, name: str | None = None,
                 params: dict | None = None, domain: Box | None = None, window: Box | None = None):
        functions = list(functions)
        if not functions:
            raise ConfigurationError("finite_rank needs at least one function")
        d = dimension or functions[0].dimension
        if any(f.dimension != d for f in functions):
            raise ConfigurationError("basis functions have mixed dimensions")
        self.functions = functions
        if name:
            self.name = name
        super().__init__(d, params or {}, min(f.order for f in functions), domain, window)

    def features(self, X, alpha=None):
        """Matrix ``[d^alpha f_i(X_j)]`` of shape ``(len(X), rank)``."""
        X = _as_points(X, self.dimension).reshape(-1, self.dimension)
        return np.stack([f(X, alpha) for f in self.functions], axis=1)

    def _pair(self, alpha, beta, x, y):
        shape = np.broadcast_shapes(x.shape, y.shape)[:-1]
        out = np.zeros(shape)
        for f in self.functions:
            out = out + f(x, alpha) * f(y, beta)
        return out

    def _value(self, x, y):
        zero = MultiIndex.zero(self.dimension)
        return self._pair(zero, zero, x, y)

    def _cross(self, alpha, beta, x, y):
        return self._pair(alpha, beta, x, y)

    def matrix(self, X, Y=None, alpha=None, beta=None):
        alpha = _mi(alpha, self.dimension)
        beta = alpha if beta is None else _mi(beta, self.dimension)
        self.check_order(alpha, beta)
        X = _as_points(X, self.dimension).reshape(-1, self.dimension)
        Y = X if Y is None else _as_points(Y, self.dimension).reshape(-1, self.dimension)
        self.check_points(X, Y)
        return self.features(X, alpha) @ self.features(Y, beta).T

    def describe(self):
        d = super().describe()
        try:
            d["functions"] = [f.to_dict() for f in self.functions]
        except ConfigurationError:
            d["functions"] = [repr(f) for f in self.functions]
        if self.name == "hat_series":
            d.pop("functions")
            d["params"] = dict(self.params)
            d["centers"] = [f.center for f in self.functions]
            d["weights"] = [f.scale**2 for f in self.functions]
        return d


# ---------------------------------------------------------------------------
# constructors


def squared_exponential(d: int = 1, lengthscale: float = 1.0, variance: float = 1.0) -> StationaryKernel:
    """``exp(-|x - y|^2 / (2 l^2))``."""
    return StationaryKernel("squared_exponential", d, lengthscale, variance=variance)


def matern(nu: float, lengthscale: float = 1.0, d: int = 1, variance: float = 1.0) -> StationaryKernel:
    """Matérn kernel with half-integer smoothness ``nu`` in {1/2, 3/2, 5/2}.

    Closed-form derivatives are available up to order ``floor(nu)``.
    """
    return StationaryKernel("matern", d, lengthscale, nu=float(nu), variance=variance)


def exponential(lengthscale: float = 1.0, d: int = 1) -> StationaryKernel:
    """``exp(-|x - y| / l)``, the Matérn-1/2 kernel."""
    return matern(0.5, lengthscale, d)


def brownian() -> BrownianKernel:
    return BrownianKernel()


def zero_kernel(d: int = 1) -> ZeroKernel:
    return ZeroKernel(d)


def finite_rank(functions, domain: Box | None = None) -> FiniteRankKernel:
    return FiniteRankKernel(functions, domain=domain)


def dyadic_centers(count: int, radius: float = 4.0) -> list[float]:
    """First `count` dyadic rationals in ``(-radius, radius)``.

    Enumerated by denominator ``2^j`` (j = 0, 1, ...), then by absolute
    value with the positive number first; each number appears once.
    """
    out, seen, j = [], set(), 0
    while len(out) < count:
        den = 2**j
        top = int(math.ceil(radius * den)) - 1
        for k in range(0, top + 1):
            for num in ((k,) if k == 0 else (k, -k)):
                q = Fraction(num, den)
                if q not in seen:
                    seen.add(q)
                    out.append(float(q))
                    if len(out) == count:
                        return out
        j += 1
        if j > 60:
            raise ConfigurationError("cannot enumerate that many dyadic centers")
    return out


def hat_series(centers, weights) -> FiniteRankKernel:
    """``k(x, y) = sum_n w_n h_n(x) h_n(y)`` with hat functions centred at `centers`."""
    centers = [float(c) for c in centers]
    weights = [float(w) for w in weights]
    if not centers or len(centers) != len(weights):
        raise ConfigurationError("hat_series needs matching non-empty centers and weights")
    if any(w <= 0 for w in weights):
        raise ConfigurationError("hat_series weights must be positive")
    funcs = [Hat(c, math.sqrt(w)) for c, w in zip(centers, weights)]
    lo, hi = min(centers) - 2.0, max(centers) + 2.0
    return FiniteRankKernel(funcs, 1, name="hat_series", params={"n_centers": len(centers)},
                            window=Box((lo,), (hi,)))


def hat_series_tail_bound(weights_dropped) -> float:
    """Trace contribution ``(sum w) * (2/3 + 2)`` of hats left out of a truncated series."""
    return float(np.sum(weights_dropped)) * (2.0 / 3.0 + 2.0)


# ---------------------------------------------------------------------------
# functional interface


def evaluate(k: Kernel, x, y) -> float:
    """``k(x, y)`` at a single pair of points."""
    return float(np.asarray(k(x, y)).reshape(-1)[0])


def eval_cross_derivative(k: Kernel, alpha, beta, x, y) -> float:
    """``d^alpha_x d^beta_y k(x, y)`` at a single pair of points."""
    return float(np.asarray(k.cross(alpha, beta, x, y)).reshape(-1)[0])


def _clip_diagonal(values, name, tol):
    values = np.asarray(values, dtype=float)
    scale = max(1.0, float(np.max(np.abs(values)))) if values.size else 1.0
    if np.any(values < -tol * scale):
        raise NotPositiveDefinite(f"{name}: negative diagonal value {values.min():.3e}")
    return np.sqrt(np.maximum(values, 0.0))


def sigma_alpha(k: Kernel, alpha, x, tol: float = 1e-10):
    """``sqrt(d^{alpha,alpha} k(x, x))``; tiny negative diagonals are clipped."""
    x = _as_points(x, k.dimension)
    scalar = x.ndim == 1
    out = _clip_diagonal(k.diagonal(x, alpha), k.name, tol)
    return float(out[0]) if scalar else out


def gram_psd_check(k: Kernel, X, tol: float = TOL_PSD) -> tuple[bool, float]:
    """Whether the Gram matrix on X is PSD up to ``tol`` relative to its top eigenvalue.

    Returns the flag and the ratio ``min_eig / max_eig``.
    """
    G = k.matrix(X)
    ev = np.linalg.eigvalsh(0.5 * (G + G.T))
    top = max(float(ev[-1]), 0.0)
    if top == 0.0:
        return bool(ev[0] >= -tol), 0.0
    return bool(ev[0] >= -tol * top), float(ev[0] / top)


# ---------------------------------------------------------------------------
# declarative specs


_FUNCTION_KEYS = {
    "hat": {"type", "center", "weight", "scale"},
    "poly": {"type", "coefficients", "scale"},
    "sin": {"type", "frequency", "phase", "amplitude"},
}
_KERNEL_PARAMS = {
    "squared_exponential": {"lengthscale", "variance"},
    "matern": {"nu", "lengthscale", "variance"},
    "exponential": {"lengthscale"},
    "brownian": set(),
    "zero": set(),
    "finite_rank": set(),
    "hat_series": {"n_centers", "radius", "decay"},
}


def _function_from_dict(spec: dict, where: str) -> BasisFunction:
    if not isinstance(spec, dict) or "type" not in spec:
        raise ConfigurationError(f"{where}: function entry needs a 'type' key")
    kind = spec["type"]
    if kind not in _FUNCTION_KEYS:
        raise ConfigurationError(f"{where}.type: unknown function type {kind!r}")
    extra = set(spec) - _FUNCTION_KEYS[kind]
    if extra:
        raise ConfigurationError(f"{where}: unknown key(s) {sorted(extra)}")
    try:
        if kind == "hat":
            scale = spec.get("scale", math.sqrt(spec.get("weight", 1.0)))
            return Hat(spec["center"], scale)
        if kind == "poly":
            return Polynomial(spec["coefficients"], spec.get("scale", 1.0))
        return Sine(spec["frequency"], spec.get("phase", 0.0), spec.get("amplitude", 1.0))
    except KeyError as exc:
        raise ConfigurationError(f"{where}: missing key {exc.args[0]!r}") from None


@dataclass(frozen=True)
class KernelSpec:
    """JSON-friendly kernel description.

    Schema::

        {"name": str, "params": {str: number}, "dimension": int,
         "functions": [{"type": "hat" | "poly" | "sin", ...}]}

    ``functions`` is used by ``finite_rank`` and optionally by
    ``hat_series`` (explicit ``{"type": "hat", "center", "weight"}``
    entries). Without it, ``hat_series`` takes ``n_centers`` dyadic centres
    in ``(-radius, radius)`` with weights ``decay**n``.
    """

    name: str
    params: dict = field(default_factory=dict)
    dimension: int = 1
    functions: tuple = ()

    KEYS = ("name", "params", "dimension", "functions")

    @classmethod
    def from_dict(cls, data: dict, where: str = "kernel") -> "KernelSpec":
        if not isinstance(data, dict):
            raise ConfigurationError(f"{where}: expected an object")
        extra = set(data) - set(cls.KEYS)
        if extra:
            raise ConfigurationError(f"{where}: unknown key(s) {sorted(extra)}")
        if "name" not in data:
            raise ConfigurationError(f"{where}: missing key 'name'")
        name = data["name"]
        if name not in _KERNEL_PARAMS:
            raise ConfigurationError(f"{where}.name: unknown kernel {name!r}")
        params = data.get("params", {})
        if not isinstance(params, dict):
            raise ConfigurationError(f"{where}.params: expected an object")
        extra = set(params) - _KERNEL_PARAMS[name]
        if extra:
            raise ConfigurationError(f"{where}.params: unknown key(s) {sorted(extra)} for {name}")
        for key, value in params.items():
            if isinstance(value, bool) or not isinstance(value, (int, float)):
                raise ConfigurationError(f"{where}.params.{key}: expected a number")
        dim = data.get("dimension", 1)
        if isinstance(dim, bool) or not isinstance(dim, int) or not 1 <= dim <= 3:
            raise ConfigurationError(f"{where}.dimension: expected an integer in 1..3")
        functions = data.get("functions", [])
        if not isinstance(functions, list):
            raise ConfigurationError(f"{where}.functions: expected a list")
        for i, f in enumerate(functions):
            _function_from_dict(f, f"{where}.functions[{i}]")
        return cls(name, dict(params), dim, tuple(dict(f) for f in functions))

    def to_dict(self) -> dict:
        d = {"name": self.name, "params": dict(self.params), "dimension": self.dimension}
        if self.functions:
            d["functions"] = [dict(f) for f in self.functions]
        return d

    def build(self) -> Kernel:
        p, d = self.params, self.dimension
        try:
            if self.name == "squared_exponential":
                return squared_exponential(d, p.get("lengthscale", 1.0), p.get("variance", 1.0))
            if self.name == "matern":
                return matern(p["nu"], p.get("lengthscale", 1.0), d, p.get("variance", 1.0))
            if self.name == "exponential":
                return exponential(p.get("lengthscale", 1.0), d)
            if self.name == "zero":
                return zero_kernel(d)
        except KeyError as exc:
            raise ConfigurationError(f"kernel.params: missing key {exc.args[0]!r}") from None
        if d != 1 and self.name in ("brownian", "finite_rank", "hat_series"):
            raise ConfigurationError(f"kernel.dimension: {self.name} is one-dimensional")
        if self.name == "brownian":
            return brownian()
        funcs = [_function_from_dict(f, f"kernel.functions[{i}]") for i, f in enumerate(self.functions)]
        if self.name == "finite_rank":
            if not funcs:
                raise ConfigurationError("kernel.functions: finite_rank needs at least one function")
            return finite_rank(funcs)
        # hat_series
        if funcs:
            if any(not isinstance(f, Hat) for f in funcs):
                raise ConfigurationError("kernel.functions: hat_series accepts only 'hat' entries")
            return hat_series([f.center for f in funcs], [f.scale**2 for f in funcs])
        n = p.get("n_centers", 20)
        if int(n) != n or n < 1:
            raise ConfigurationError("kernel.params.n_centers: expected a positive integer")
        decay = p.get("decay", 0.5)
        if not 0 < decay < 1:
            raise ConfigurationError("kernel.params.decay: expected a number in (0, 1)")
        centers = dyadic_centers(int(n), p.get("radius", 4.0))
        return hat_series(centers, [decay**i for i in range(int(n))])
