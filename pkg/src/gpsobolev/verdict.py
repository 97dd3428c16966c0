"""Regularity verdicts: does GP(0, k) have sample paths in W^{m,p}?

For every multi-index ``|alpha| <= m`` the integral ``int sigma_alpha^p`` is
computed on a ladder of grids (n, 2n, 4n). Closed-form derivatives are
used where the kernel has them, forward-difference quotients otherwise. A
quantity that grows by 4x or more over the ladder is DIVERGENT, one that
stays within 1.5x is CONVERGENT. The verdict is numerical evidence, not a
proof.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import ConfigurationError, MarginTooSmall, NotPositiveDefinite, UnsupportedDerivative
from .finitediff import BOUNDED_FACTOR, DIVERGE_FACTOR
from .grid import Box, Grid, MultiIndex, build_grid, default_margin, enumerate_multi_indices
from .kernels import Kernel
from .sampler import c_p, empirical_sobolev_moment, sample_paths
from .spectral import (
    CONVERGENT,
    DIVERGENT,
    INCONCLUSIVE,
    DEFAULT_MASS,
    DEFAULT_MAX_MODES,
    NuclearReport,
    TraceEstimate,
    classify,
    differentiated_mercer_trace,
    nuclear_bound_report,
    nystrom_decompose,
    operator_spectrum,
    resolve_source,
    rkhs_imbedding_trace,
    sigma_power_integral,
    trace_diagonal,
)

__all__ = [
    "AnalysisConfig",
    "AlphaRecord",
    "MonteCarloCheck",
    "RegularityReport",
    "analyze",
    "verify_identities",
    "ladder",
    "REPORT_SCHEMA_ID",
    "IDENTITY_SCHEMA_ID",
    "REPORT_SCHEMA",
    "PASS",
    "FAIL",
]

REPORT_SCHEMA_ID = "gp-sobolev-report/1"
IDENTITY_SCHEMA_ID = "gp-sobolev-identities/1"
PASS, FAIL = "PASS", "FAIL"
STABILIZATION_RTOL = 5e-3
MC_Z_LIMIT = 3.0
DEFAULT_BASE_N = {1: 128, 2: 32, 3: 8}

ASSUMPTIONS = (
    "the process is taken to be measurable with sigma in L^1_loc; "
    "this holds for the continuous built-in kernels and is not tested"
)
EVIDENCE_NOTE = "numerical evidence from a finite grid ladder, not a proof"


@dataclass
class AnalysisConfig:
    """Settings for :func:`analyze` and :func:`verify_identities`.

    ``margin`` defaults to :func:`~gpsobolev.grid.default_margin` of the base grid
    and is shared by every grid of the ladder, so all ladder levels
    integrate over the same interior.
    """

    box: Box | None = None
    base_n: int | None = None
    levels: int = 3
    rule: str = "midpoint"
    margin: float | None = None
    seed: int = 42
    n_paths: int = 2000
    monte_carlo: bool = True
    mass: float = DEFAULT_MASS
    max_modes: int = DEFAULT_MAX_MODES
    spectral_max_nodes: int = 2048
    threads: int = 1

    def __post_init__(self):
        if self.levels < 2:
            raise ConfigurationError("levels must be >= 2")
        if self.n_paths < 2:
            raise ConfigurationError("n_paths must be >= 2")
        if not 0 < self.mass <= 1:
            raise ConfigurationError("mass must lie in (0, 1]")
        if self.seed < 0 or self.seed >= 2**64:
            raise ConfigurationError("seed must be an unsigned 64-bit integer")

    def describe(self, box: Box, grids) -> dict:
        return {
            "box": box.to_dict(),
            "rule": self.rule,
            "margin": grids[0].margin,
            "grid_ladder": [g.n for g in grids],
            "seed": self.seed,
            "n_paths": self.n_paths,
            "monte_carlo": self.monte_carlo,
            "mass": self.mass,
            "max_modes": self.max_modes,
            "spectral_max_nodes": self.spectral_max_nodes,
        }


def ladder(k: Kernel, config: AnalysisConfig) -> tuple[Box, list[Grid]]:
    box = config.box or k.default_box()
    if box.dim != k.dimension:
        raise ConfigurationError(f"box dimension {box.dim} does not match kernel dimension {k.dimension}")
    n = config.base_n or DEFAULT_BASE_N[box.dim]
    margin = config.margin
    if margin is None:
        margin = default_margin(box, n)
    grids = [build_grid(box, n * 2**j, config.rule, margin) for j in range(config.levels)]
    return box, grids


@dataclass
class AlphaRecord:
    alpha: MultiIndex
    derivative_source: str | None
    trace: TraceEstimate | None
    sigma_alpha_lp: float | None
    sigma_lp_series: list
    stabilized: bool
    classification: str
    error: str | None = None

    def to_dict(self) -> dict:
        return {
            "alpha": list(self.alpha),
            "derivative_source": self.derivative_source,
            "trace": None if self.trace is None else self.trace.to_dict(),
            "sigma_alpha_lp": self.sigma_alpha_lp,
            "sigma_lp_series": list(self.sigma_lp_series),
            "stabilized": self.stabilized,
            "classification": self.classification,
            "error": self.error,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "AlphaRecord":
        trace = None if d["trace"] is None else TraceEstimate.from_dict(d["trace"])
        return cls(MultiIndex(d["alpha"]), d["derivative_source"], trace, d["sigma_alpha_lp"],
                   list(d["sigma_lp_series"]), d["stabilized"], d["classification"], d["error"])


@dataclass
class MonteCarloCheck:
    predicted: float
    empirical: dict
    z_score: float
    agrees: bool
    truncation: int
    grid_n: int

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "MonteCarloCheck":
        return cls(**d)


@dataclass
class RegularityReport:
    kernel: dict
    m: int
    p: float
    alphas: list
    mc_crosscheck: MonteCarloCheck | None
    nuclear_report: NuclearReport | None
    overall: str
    provenance: dict
    schema: str = REPORT_SCHEMA_ID
    notes: list = field(default_factory=lambda: [EVIDENCE_NOTE, ASSUMPTIONS])

    def record(self, alpha) -> AlphaRecord:
        alpha = MultiIndex(alpha)
        for r in self.alphas:
            if r.alpha == alpha:
                return r
        raise KeyError(alpha)

    def to_dict(self) -> dict:
        return {
            "schema": self.schema,
            "kernel": self.kernel,
            "m": self.m,
            "p": self.p,
            "overall": self.overall,
            "alphas": [r.to_dict() for r in self.alphas],
            "mc_crosscheck": None if self.mc_crosscheck is None else self.mc_crosscheck.to_dict(),
            "nuclear_report": None if self.nuclear_report is None else self.nuclear_report.to_dict(),
            "provenance": self.provenance,
            "notes": list(self.notes),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, allow_nan=False) + "\n"

    @classmethod
    def from_dict(cls, d: dict) -> "RegularityReport":
        if d.get("schema") != REPORT_SCHEMA_ID:
            raise ConfigurationError(f"unsupported report schema {d.get('schema')!r}")
        return cls(
            kernel=d["kernel"], m=d["m"], p=d["p"],
            alphas=[AlphaRecord.from_dict(a) for a in d["alphas"]],
            mc_crosscheck=None if d["mc_crosscheck"] is None else MonteCarloCheck.from_dict(d["mc_crosscheck"]),
            nuclear_report=None if d["nuclear_report"] is None else NuclearReport.from_dict(d["nuclear_report"]),
            overall=d["overall"], provenance=d["provenance"], schema=d["schema"], notes=list(d["notes"]),
        )

    @classmethod
    def from_json(cls, text: str) -> "RegularityReport":
        return cls.from_dict(json.loads(text))


def _relative_change(series) -> float:
    a, b = series[-2], series[-1]
    if a == b:
        return 0.0
    return abs(b - a) / max(abs(a), abs(b))


def _spectral_grid(grids, limit):
    fitting = [g for g in grids if g.size <= limit]
    return fitting[-1] if fitting else None


def _analyze_alpha(k, alpha, p, grids, spectral_grid):
    source = resolve_source(k, alpha)
    traces = [trace_diagonal(k, alpha, g, source, region="interior") for g in grids]
    sig = [sigma_power_integral(k, alpha, g, p, source, region="interior") for g in grids]
    label = classify(sig)
    spectral_value, spectral_n = None, None
    if p == 2 and spectral_grid is not None:
        lam = operator_spectrum(k, alpha, spectral_grid, source, region="interior")
        spectral_value, spectral_n = float(lam.sum()), spectral_grid.n
    trace = TraceEstimate(alpha, source, traces[-1], spectral_value, traces, [g.n for g in grids],
                          classify(traces), spectral_n)
    stable = _relative_change(sig) < STABILIZATION_RTOL
    return AlphaRecord(alpha, source, trace, sig[-1], sig, bool(stable), label)


def analyze(k: Kernel, m: int, p: float, config: AnalysisConfig | None = None) -> RegularityReport:
    """Decide numerically whether paths of GP(0, k) lie in ``W^{m,p}`` of the box.

    Returns a :class:`RegularityReport`. Derivative failures for
    ``|alpha| >= 1`` are recorded in the report; a failure at alpha = 0
    propagates.
    """
    config = config or AnalysisConfig()
    m, p = int(m), float(p)
    if m < 0:
        raise ConfigurationError("m must be >= 0")
    if not (1.0 < p < math.inf):
        raise ConfigurationError(f"p must lie in (1, inf), got {p}")
    box, grids = ladder(k, config)
    spectral_grid = _spectral_grid(grids, config.spectral_max_nodes)

    records = []
    for alpha in enumerate_multi_indices(k.dimension, m):
        try:
            records.append(_analyze_alpha(k, alpha, p, grids, spectral_grid))
        except (UnsupportedDerivative, MarginTooSmall, NotPositiveDefinite, ConfigurationError) as exc:
            if alpha.order == 0:
                raise
            records.append(AlphaRecord(alpha, None, None, None, [], False, INCONCLUSIVE,
                                       f"{type(exc).__name__}: {exc}"))

    labels = [r.classification for r in records]
    if DIVERGENT in labels:
        overall = FAIL
    elif all(lbl == CONVERGENT for lbl in labels) and all(r.stabilized for r in records):
        overall = PASS
    else:
        overall = INCONCLUSIVE

    mc = None
    if config.monte_carlo and all(lbl == CONVERGENT for lbl in labels):
        mc = _monte_carlo(k, m, p, records, grids[0], config)

    nuclear = None
    if spectral_grid is not None:
        nuclear = nuclear_bound_report(k, p, spectral_grid)

    provenance = config.describe(box, grids)
    provenance["spectral_grid_n"] = None if spectral_grid is None else spectral_grid.n
    provenance["tolerances"] = {
        "diverge_factor": DIVERGE_FACTOR,
        "bounded_factor": BOUNDED_FACTOR,
        "stabilization_rtol": STABILIZATION_RTOL,
        "mc_z_limit": MC_Z_LIMIT,
    }
    return RegularityReport(k.describe(), m, p, records, mc, nuclear, overall, provenance)


def _monte_carlo(k, m, p, records, grid, config) -> MonteCarloCheck:
    predicted = 0.0
    for r in records:
        predicted += sigma_power_integral(k, r.alpha, grid, p, r.derivative_source, region="interior")
    predicted *= c_p(p)
    dec = nystrom_decompose(k, MultiIndex.zero(k.dimension), grid, "analytic", mass=1.0, max_modes=None)
    batch = sample_paths(dec, config.n_paths, config.seed, threads=config.threads)
    est = empirical_sobolev_moment(batch, m, p)
    z = est.z_score(predicted)
    return MonteCarloCheck(predicted, est.to_dict(), float(z), bool(abs(z) <= MC_Z_LIMIT),
                           batch.truncation, grid.n)


# ---------------------------------------------------------------------------
# trace identities


def _rel(a, b):
    if a is None or b is None:
        return None
    if a == b:
        return 0.0
    return abs(a - b) / max(abs(a), abs(b))


def verify_identities(k: Kernel, m: int, config: AnalysisConfig | None = None) -> dict:
    """Compare the routes to ``Tr(E_k^alpha)`` for every ``|alpha| <= m``.

    Per alpha: the diagonal integral and the eigenvalue sum over the whole
    box (closed-form derivatives only), and the diagonal integral against
    ``sum_n lambda_n ||delta^alpha phi_n||^2`` over the interior. The sum of
    the whole-box diagonal traces is compared with the imbedding trace
    ``Tr(i i^*)``.
    """
    config = config or AnalysisConfig()
    box, grids = ladder(k, config)
    grid = _spectral_grid(grids, config.spectral_max_nodes)
    if grid is None:
        raise ConfigurationError("no ladder grid fits within spectral_max_nodes")
    zero = MultiIndex.zero(k.dimension)
    dec0 = nystrom_decompose(k, zero, grid, "analytic", mass=config.mass, max_modes=config.max_modes)
    rows = []
    full_sum = 0.0
    full_complete = True
    for alpha in enumerate_multi_indices(k.dimension, m):
        source = resolve_source(k, alpha)
        diag_full = spec_full = None
        if source == "analytic":
            diag_full = trace_diagonal(k, alpha, grid, source, region="full")
            dec = nystrom_decompose(k, alpha, grid, source, mass=1.0, max_modes=None)
            spec_full = float(dec.all_eigenvalues.sum())
            full_sum += diag_full
        else:
            full_complete = False
        diag_int = trace_diagonal(k, alpha, grid, source, region="interior")
        mercer = differentiated_mercer_trace(dec0, alpha)
        rows.append({
            "alpha": list(alpha),
            "derivative_source": source,
            "diagonal_full": diag_full,
            "spectral_full": spec_full,
            "rel_spectral_vs_diagonal": _rel(spec_full, diag_full),
            "diagonal_interior": diag_int,
            "mercer_interior": mercer,
            "rel_mercer_vs_diagonal": _rel(mercer, diag_int),
        })
    imbedding = None
    if full_complete:
        imbedding = rkhs_imbedding_trace(k, m, grid, "analytic", region="full")
    return {
        "schema": IDENTITY_SCHEMA_ID,
        "kernel": k.describe(),
        "m": int(m),
        "grid": grid.describe(),
        "retained_modes": dec0.truncation,
        "discarded_mass": dec0.discarded_mass,
        "alphas": rows,
        "sum_of_traces": full_sum if full_complete else None,
        "rkhs_imbedding_trace": imbedding,
        "rel_sum_vs_imbedding": _rel(full_sum, imbedding) if full_complete else None,
    }


_NUM = {"type": "number"}
_NUM_OR_NULL = {"type": ["number", "null"]}

REPORT_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": REPORT_SCHEMA_ID,
    "type": "object",
    "required": ["schema", "kernel", "m", "p", "overall", "alphas", "mc_crosscheck",
                 "nuclear_report", "provenance", "notes"],
    "additionalProperties": False,
    "properties": {
        "schema": {"const": REPORT_SCHEMA_ID},
        "kernel": {
            "type": "object",
            "required": ["name", "dimension", "params"],
            "properties": {"name": {"type": "string"}, "dimension": {"type": "integer"},
                           "params": {"type": "object"}},
        },
        "m": {"type": "integer", "minimum": 0},
        "p": {"type": "number", "exclusiveMinimum": 1},
        "overall": {"enum": [PASS, FAIL, INCONCLUSIVE]},
        "alphas": {
            "type": "array",
            "items": {
                "type": "object",
                "additionalProperties": False,
                "required": ["alpha", "derivative_source", "trace", "sigma_alpha_lp",
                             "sigma_lp_series", "stabilized", "classification", "error"],
                "properties": {
                    "alpha": {"type": "array", "items": {"type": "integer", "minimum": 0}},
                    "derivative_source": {"enum": ["analytic", "finite_difference", None]},
                    "trace": {
                        "type": ["object", "null"],
                        "required": ["alpha", "source", "diagonal_value", "spectral_value",
                                     "refinement_series", "grid_sizes", "classification"],
                        "properties": {
                            "diagonal_value": _NUM,
                            "spectral_value": _NUM_OR_NULL,
                            "refinement_series": {"type": "array", "items": _NUM},
                            "grid_sizes": {"type": "array", "items": {"type": "integer"}},
                            "classification": {"enum": [CONVERGENT, DIVERGENT, INCONCLUSIVE]},
                        },
                    },
                    "sigma_alpha_lp": _NUM_OR_NULL,
                    "sigma_lp_series": {"type": "array", "items": _NUM},
                    "stabilized": {"type": "boolean"},
                    "classification": {"enum": [CONVERGENT, DIVERGENT, INCONCLUSIVE]},
                    "error": {"type": ["string", "null"]},
                },
            },
        },
        "mc_crosscheck": {
            "type": ["object", "null"],
            "required": ["predicted", "empirical", "z_score", "agrees", "truncation", "grid_n"],
            "properties": {
                "predicted": _NUM,
                "empirical": {
                    "type": "object",
                    "required": ["mean", "std_error", "n_paths", "p", "m"],
                },
                "z_score": _NUM,
                "agrees": {"type": "boolean"},
            },
        },
        "nuclear_report": {
            "type": ["object", "null"],
            "required": ["p", "sigma_p_sq", "nu_upper", "opnorm_lower", "c_p_factor", "checks"],
        },
        "provenance": {"type": "object", "required": ["grid_ladder", "seed", "margin"]},
        "notes": {"type": "array", "items": {"type": "string"}},
    },
}
