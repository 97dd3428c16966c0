"""Command-line frontend.

Usage::

    gpsobolev analyze           --config run.json [--out report.json] [--seed N] [--threads N]
    gpsobolev spectrum          --config run.json [--out spectrum.csv]
    gpsobolev sample            --config run.json [--out paths.csv] [--seed N]
    gpsobolev verify-identities --config run.json [--out identities.json]

Run config (JSON; unknown keys are rejected)::

    {
      "kernel": {"name": "brownian", "params": {}, "dimension": 1},
      "m": 1,                      # Sobolev order, >= 0
      "p": 2.0,                    # integrability exponent, 1 < p < inf
      "grid": {
        "box": {"lower": [0.0], "upper": [1.0]},   # default: the kernel's window
        "n": 128,                  # base nodes per axis, >= 2
        "levels": 3,               # ladder n, 2n, 4n, ...; >= 2
        "rule": "midpoint",        # or "gauss_legendre"
        "margin": null             # default: 2 x base node spacing
      },
      "seed": 42,
      "n_paths": 2000,
      "monte_carlo": true,
      "truncation": {"mass": 0.9999, "max_modes": 500},   # max_modes null: no cap
      "spectral_max_nodes": 2048,
      "n_eigenfunctions": 3,       # eigenfunction columns written by `spectrum`
      "out": null                  # output path; --out wins
    }

Every key except ``kernel`` is optional. ``spectrum`` and ``sample`` use the
base grid (``grid.n``) and the ``alpha = 0`` operator.

Exit codes: 0 PASS (or success for the non-verdict commands), 10 FAIL,
11 INCONCLUSIVE, 1 error. The seed is taken from ``--seed``, then the
config, then 42. Threads come from ``--threads``, then the
``GPSOBOLEV_THREADS`` environment variable, then 1.

CSV output is comma separated with a header row and 17 significant digits.
The ``spectrum`` command writes eigenvalues to the output path and, when
that is a file, eigenfunction samples next to it as
``<stem>.eigenfunctions.csv``.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ConfigurationError, GPSobolevError
from .grid import Box, MultiIndex
from .kernels import KernelSpec
from .sampler import sample_paths
from .spectral import DEFAULT_MASS, DEFAULT_MAX_MODES, nystrom_decompose
from .verdict import FAIL, PASS, AnalysisConfig, analyze, ladder, verify_identities

__all__ = ["RunConfig", "load_config", "main", "EXIT_CODES"]

EXIT_CODES = {PASS: 0, FAIL: 10, "INCONCLUSIVE": 11}
EXIT_ERROR = 1
DEFAULT_SEED = 42
THREADS_ENV = "GPSOBOLEV_THREADS"

_TOP_KEYS = {"kernel", "m", "p", "grid", "seed", "n_paths", "monte_carlo", "truncation",
             "spectral_max_nodes", "n_eigenfunctions", "out"}
_GRID_KEYS = {"box", "n", "levels", "rule", "margin"}
_BOX_KEYS = {"lower", "upper"}
_TRUNC_KEYS = {"mass", "max_modes"}


@dataclass
class RunConfig:
    kernel: KernelSpec
    m: int = 1
    p: float = 2.0
    box: Box | None = None
    n: int | None = None
    levels: int = 3
    rule: str = "midpoint"
    margin: float | None = None
    seed: int | None = None
    n_paths: int = 2000
    monte_carlo: bool = True
    mass: float = DEFAULT_MASS
    max_modes: int | None = DEFAULT_MAX_MODES
    spectral_max_nodes: int = 2048
    n_eigenfunctions: int = 3
    out: str | None = None

    def analysis_config(self, seed: int | None = None, threads: int = 1) -> AnalysisConfig:
        seed = seed if seed is not None else self.seed if self.seed is not None else DEFAULT_SEED
        return AnalysisConfig(box=self.box, base_n=self.n, levels=self.levels, rule=self.rule,
                              margin=self.margin, seed=seed, n_paths=self.n_paths,
                              monte_carlo=self.monte_carlo, mass=self.mass, max_modes=self.max_modes,
                              spectral_max_nodes=self.spectral_max_nodes, threads=threads)


def _reject_unknown(obj, allowed, where):
    if not isinstance(obj, dict):
        raise ConfigurationError(f"{where}: expected an object")
    extra = sorted(set(obj) - allowed)
    if extra:
        more = f" (and {extra[1:]})" if len(extra) > 1 else ""
        raise ConfigurationError(f"{where}: unknown key {extra[0]!r}{more}")


def _int(obj, key, where, lo=None, default=None):
    if key not in obj or obj[key] is None:
        return default
    v = obj[key]
    if isinstance(v, bool) or not isinstance(v, int):
        raise ConfigurationError(f"{where}.{key}: expected an integer, got {v!r}")
    if lo is not None and v < lo:
        raise ConfigurationError(f"{where}.{key}: must be >= {lo}, got {v}")
    return v


def _num(obj, key, where, default=None):
    if key not in obj or obj[key] is None:
        return default
    v = obj[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigurationError(f"{where}.{key}: expected a number, got {v!r}")
    return float(v)


def _parse(data: dict) -> RunConfig:
    _reject_unknown(data, _TOP_KEYS, "config")
    if "kernel" not in data:
        raise ConfigurationError("config: missing key 'kernel'")
    try:
        spec = KernelSpec.from_dict(data["kernel"], "config.kernel")
    except ValueError as exc:
        raise ConfigurationError(str(exc)) from None
    cfg = RunConfig(spec)
    cfg.m = _int(data, "m", "config", lo=0, default=1)
    cfg.p = _num(data, "p", "config", default=2.0)
    if not 1.0 < cfg.p < float("inf"):
        raise ConfigurationError(f"config.p: must lie in (1, inf), got {cfg.p}")
    grid = data.get("grid", {})
    _reject_unknown(grid, _GRID_KEYS, "config.grid")
    if grid.get("box") is not None:
        box = grid["box"]
        _reject_unknown(box, _BOX_KEYS, "config.grid.box")
        try:
            cfg.box = Box(box["lower"], box["upper"])
        except KeyError as exc:
            raise ConfigurationError(f"config.grid.box: missing key {exc.args[0]!r}") from None
        except (TypeError, ValueError) as exc:
            raise ConfigurationError(f"config.grid.box: {exc}") from None
    cfg.n = _int(grid, "n", "config.grid", lo=2)
    cfg.levels = _int(grid, "levels", "config.grid", lo=2, default=3)
    cfg.rule = grid.get("rule", "midpoint")
    if cfg.rule not in ("midpoint", "gauss_legendre"):
        raise ConfigurationError(f"config.grid.rule: unknown rule {cfg.rule!r}")
    cfg.margin = _num(grid, "margin", "config.grid")
    if cfg.margin is not None and cfg.margin < 0:
        raise ConfigurationError("config.grid.margin: must be >= 0")
    seed = _int(data, "seed", "config", lo=0)
    if seed is not None and seed >= 2**64:
        raise ConfigurationError("config.seed: must fit in 64 bits")
    cfg.seed = seed
    cfg.n_paths = _int(data, "n_paths", "config", lo=2, default=2000)
    mc = data.get("monte_carlo", True)
    if not isinstance(mc, bool):
        raise ConfigurationError("config.monte_carlo: expected true or false")
    cfg.monte_carlo = mc
    trunc = data.get("truncation", {})
    _reject_unknown(trunc, _TRUNC_KEYS, "config.truncation")
    cfg.mass = _num(trunc, "mass", "config.truncation", default=DEFAULT_MASS)
    if not 0 < cfg.mass <= 1:
        raise ConfigurationError("config.truncation.mass: must lie in (0, 1]")
    if "max_modes" in trunc and trunc["max_modes"] is None:
        cfg.max_modes = None  # explicit null: no cap
    else:
        cfg.max_modes = _int(trunc, "max_modes", "config.truncation", lo=1, default=DEFAULT_MAX_MODES)
    cfg.spectral_max_nodes = _int(data, "spectral_max_nodes", "config", lo=1, default=2048)
    cfg.n_eigenfunctions = _int(data, "n_eigenfunctions", "config", lo=0, default=3)
    out = data.get("out")
    if out is not None and not isinstance(out, str):
        raise ConfigurationError("config.out: expected a path string")
    cfg.out = out
    return cfg


def load_config(text: str, source: str = "<config>") -> RunConfig:
    """Parse a JSON run config, with line/column or key-path diagnostics."""
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"{source}:{exc.lineno}:{exc.colno}: invalid JSON: {exc.msg}") from None
    try:
        return _parse(data)
    except ConfigurationError as exc:
        raise ConfigurationError(f"{source}: {exc}") from None


def _fmt(x) -> str:
    return format(float(x), ".17g")


def _write_csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_fmt(v) if not isinstance(v, (int, np.integer)) else str(v) for v in row])
    return buf.getvalue()


def _emit(text: str, out: str | None):
    if out is None or out == "-":
        sys.stdout.write(text)
    else:
        Path(out).write_text(text)


def _threads(args) -> int:
    if args.threads is not None:
        return max(1, args.threads)
    env = os.environ.get(THREADS_ENV)
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise ConfigurationError(f"{THREADS_ENV}: expected an integer, got {env!r}") from None
    return 1


def _base_grid(kernel, cfg: RunConfig):
    _, grids = ladder(kernel, cfg.analysis_config())
    return grids[0]


def cmd_analyze(cfg: RunConfig, args) -> int:
    k = cfg.kernel.build()
    report = analyze(k, cfg.m, cfg.p, cfg.analysis_config(args.seed, _threads(args)))
    _emit(report.to_json(), args.out or cfg.out)
    print(f"overall: {report.overall}", file=sys.stderr)
    return EXIT_CODES[report.overall]


def _node_columns(grid):
    return [f"x{i + 1}" for i in range(grid.dim)]


def cmd_spectrum(cfg: RunConfig, args) -> int:
    k = cfg.kernel.build()
    grid = _base_grid(k, cfg)
    dec = nystrom_decompose(k, MultiIndex.zero(k.dimension), grid, "analytic",
                            mass=cfg.mass, max_modes=cfg.max_modes)
    out = args.out or cfg.out
    _emit(_write_csv(["n", "lambda_n"], ((i + 1, lam) for i, lam in enumerate(dec.eigenvalues))), out)
    n_funcs = min(cfg.n_eigenfunctions, dec.truncation)
    if out not in (None, "-") and n_funcs:
        path = Path(out)
        header = _node_columns(grid) + [f"phi_{i + 1}" for i in range(n_funcs)]
        rows = np.column_stack([grid.nodes, dec.modes[:, :n_funcs]])
        path.with_name(path.stem + ".eigenfunctions.csv").write_text(_write_csv(header, rows))
    return 0


def cmd_sample(cfg: RunConfig, args) -> int:
    k = cfg.kernel.build()
    grid = _base_grid(k, cfg)
    seed = args.seed if args.seed is not None else cfg.seed if cfg.seed is not None else DEFAULT_SEED
    dec = nystrom_decompose(k, MultiIndex.zero(k.dimension), grid, "analytic",
                            mass=cfg.mass, max_modes=cfg.max_modes)
    batch = sample_paths(dec, cfg.n_paths, seed, threads=_threads(args))
    header = _node_columns(grid) + [f"path_{i + 1}" for i in range(batch.n_paths)]
    _emit(_write_csv(header, np.column_stack([grid.nodes, batch.paths.T])), args.out or cfg.out)
    return 0


def cmd_verify_identities(cfg: RunConfig, args) -> int:
    k = cfg.kernel.build()
    table = verify_identities(k, cfg.m, cfg.analysis_config(args.seed, _threads(args)))
    _emit(json.dumps(table, indent=2, allow_nan=False) + "\n", args.out or cfg.out)
    return 0


COMMANDS = {
    "analyze": cmd_analyze,
    "spectrum": cmd_spectrum,
    "sample": cmd_sample,
    "verify-identities": cmd_verify_identities,
}


def _u64(text: str) -> int:
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return v


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gpsobolev",
                                     description="Sobolev regularity of Gaussian process sample paths.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="JSON run config")
        p.add_argument("--out", help="output path (default: config 'out', else stdout)")
        p.add_argument("--seed", type=_u64, help="RNG seed; overrides the config")
        p.add_argument("--threads", type=int, help=f"worker threads (fallback: ${THREADS_ENV})")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        path = Path(args.config)
        try:
            text = path.read_text()
        except OSError as exc:
            raise ConfigurationError(f"{path}: cannot read config: {exc.strerror}") from None
        cfg = load_config(text, str(path))
        return COMMANDS[args.command](cfg, args)
    except (GPSobolevError, ValueError, OSError) as exc:
        print(f"gpsobolev: error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
