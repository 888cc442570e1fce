"""Command-line entry point: ``hypheat {eval,table,alpha,verify,mcf,semigroup}``.

Exit codes: 0 on success, 1 when a verification fails (the report is still
written), 2 on usage or domain errors.
"""

from __future__ import annotations

import argparse
import inspect
import json
import math
import sys
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import kernel, monotonicity, suites
from .alpha_engine import UsageError, build_alpha
from .radial_basis import LevelOutOfRange, L_MAX, build_fl_table, dump_table
from .report import VerificationReport

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2

SUBCOMMANDS = ("eval", "table", "alpha", "verify", "mcf", "semigroup")
FORMATS = ("json", "csv", "latex")
VERIFY_CHOICES = tuple(suites.SUITES) + ("all",)

# suites whose grids are (t, rho) products and accept the grid flags
_GRID_SUITES = {"superconvexity", "equivalence", "heat", "proof-intermediates"}


class ConfigError(ValueError):
    pass


@dataclass
class GridSpec:
    lo: float
    hi: float
    count: int
    log: bool = True

    def __post_init__(self):
        if self.count < 2:
            raise ConfigError("grid counts must be at least 2")
        if not (self.lo > 0 and self.hi > self.lo):
            raise ConfigError(f"grid range must satisfy 0 < min < max, got [{self.lo}, {self.hi}]")

    def values(self) -> np.ndarray:
        if self.log:
            return np.geomspace(self.lo, self.hi, self.count)
        return np.linspace(self.lo, self.hi, self.count)


@dataclass
class CommandConfig:
    subcommand: str
    n: int | None = None
    t_grid: GridSpec | None = None
    rho_grid: GridSpec | None = None
    fmt: str = "json"
    output: str | None = None
    tolerances: dict[str, float] = field(default_factory=dict)
    odd_n: bool = True

    def __post_init__(self):
        if self.subcommand not in SUBCOMMANDS:
            raise ConfigError(f"unknown subcommand {self.subcommand!r}")
        if self.fmt not in FORMATS:
            raise ConfigError(f"unknown format {self.fmt!r}")
        if self.n is not None:
            if self.n < 1:
                raise ConfigError("n must be a positive integer")
            if self.odd_n and self.n % 2 == 0:
                raise ConfigError(f"n must be odd (kernels exist here for odd n only), got {self.n}")
        for k, v in self.tolerances.items():
            if not (v >= 0 and math.isfinite(v)):
                raise ConfigError(f"tolerance {k} must be a finite non-negative number")


def _positive(kind):
    def parse(text):
        v = kind(text)
        if not v > 0:
            raise argparse.ArgumentTypeError(f"expected a positive value, got {text}")
        return v

    return parse


def _nonneg(text):
    v = float(text)
    if not v >= 0:
        raise argparse.ArgumentTypeError(f"expected a non-negative value, got {text}")
    return v


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="hypheat",
        description="Hyperbolic heat kernels in odd dimension: evaluation, dumps and verification suites.",
    )
    sub = p.add_subparsers(dest="subcommand", required=True)

    e = sub.add_parser("eval", help="evaluate K_n(t, rho) and the log-convexity margin")
    e.add_argument("--n", type=int, required=True, help="odd dimension")
    e.add_argument("--t", type=_positive(float), required=True)
    e.add_argument("--rho", type=_positive(float), required=True)
    e.add_argument("--output", "-o")

    tb = sub.add_parser("table", help="dump the exact ladder polynomials p_l, q_l as JSON")
    tb.add_argument("--l-max", type=_positive(int), default=8)
    tb.add_argument("--output", "-o")

    a = sub.add_parser("alpha", help="print alpha_n as JSON or a LaTeX line")
    a.add_argument("--n", type=int, required=True, help="odd dimension")
    a.add_argument("--format", choices=("json", "latex"), default="json")
    a.add_argument("--output", "-o")

    v = sub.add_parser("verify", help="run verification suites; one JSON report per line")
    v.add_argument("suite", choices=VERIFY_CHOICES)
    v.add_argument("--tol", type=_nonneg, help="override the tolerance of every selected suite")
    v.add_argument("--n-max", type=_positive(int), help="largest odd n for kernel grid suites")
    v.add_argument("--m-max", type=_positive(int), help="largest m for alpha-structure / proof-intermediates")
    v.add_argument("--l-max", type=_positive(int), help="largest ladder level for ladder / yuzhao")
    v.add_argument("--t-min", type=float, default=suites.T_GRID[0])
    v.add_argument("--t-max", type=float, default=suites.T_GRID[-1])
    v.add_argument("--t-count", type=int, default=len(suites.T_GRID))
    v.add_argument("--rho-min", type=float, default=suites.RHO_GRID[0])
    v.add_argument("--rho-max", type=float, default=suites.RHO_GRID[-1])
    v.add_argument("--rho-count", type=int, default=len(suites.RHO_GRID))
    v.add_argument("--linear", action="store_true", help="linear instead of log-spaced grids")
    v.add_argument("--samples", type=int, default=200, help="samples per flow for the mcf suite")
    v.add_argument("--output", "-o")

    m = sub.add_parser(
        "mcf",
        help="sample F(t) along a shrinking geodesic sphere",
        description="Geodesic n-spheres in H^{n+1}; the kernel engine needs odd n.",
    )
    m.add_argument("--n", type=int, required=True, help="odd dimension of the sphere")
    m.add_argument("--r0", type=_positive(float), required=True)
    m.add_argument("--t0", type=_positive(float), required=True)
    m.add_argument("--d", type=_nonneg, default=0.0, help="distance from the sphere centre to p0")
    m.add_argument("--samples", type=int, default=200)
    m.add_argument("--order", type=int, default=64)
    m.add_argument("--format", choices=("csv", "json"), default="csv")
    m.add_argument("--output", "-o")

    s = sub.add_parser("semigroup", help="Chapman-Kolmogorov check for n = 3")
    s.add_argument("--s", type=_positive(float), required=True)
    s.add_argument("--t", type=_positive(float), required=True)
    s.add_argument("--d01", type=_nonneg, required=True)
    s.add_argument("--tol", type=_nonneg, default=suites.TOL["semigroup"])
    s.add_argument("--output", "-o")
    return p


def _config(args) -> CommandConfig:
    cfg = CommandConfig(
        subcommand=args.subcommand,
        n=getattr(args, "n", None),
        fmt=getattr(args, "format", "json"),
        output=getattr(args, "output", None),
    )
    if args.subcommand == "verify":
        cfg.t_grid = GridSpec(args.t_min, args.t_max, args.t_count, not args.linear)
        cfg.rho_grid = GridSpec(args.rho_min, args.rho_max, args.rho_count, not args.linear)
        if args.tol is not None:
            cfg.tolerances = {name: args.tol for name in suites.SUITES}
        cfg.__post_init__()
    return cfg


def _emit(text: str, path: str | None) -> None:
    if path is None or path == "-":
        sys.stdout.write(text)
        sys.stdout.flush()
    else:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)


def _suite_kwargs(name: str, cfg: CommandConfig, args) -> dict:
    fn = suites.SUITES[name]
    params = inspect.signature(fn).parameters
    kw: dict = {}
    if name in _GRID_SUITES:
        kw["t_grid"] = cfg.t_grid.values()
        kw["rho_grid"] = cfg.rho_grid.values()
    if args.n_max is not None and "n_max" in params:
        kw["n_max"] = args.n_max
    if args.m_max is not None and "m_max" in params:
        kw["m_max"] = args.m_max
    if args.l_max is not None and "l_max" in params:
        kw["l_max"] = args.l_max
    if name == "mcf":
        kw["samples"] = args.samples
    if name in cfg.tolerances and "tol" in params:
        kw["tol"] = cfg.tolerances[name]
    return kw


def _run_verify(cfg: CommandConfig, args) -> int:
    names = list(suites.SUITES) if args.suite == "all" else [args.suite]
    if args.n_max is not None and args.n_max > 2 * (L_MAX - 2) + 1:
        raise UsageError(f"--n-max {args.n_max} exceeds the ladder budget")
    if args.samples < 10:
        raise UsageError("--samples must be at least 10")
    suites.sweep_workers()  # validate HYPHEAT_THREADS before any work
    reports: list[VerificationReport] = []
    lines = []
    for name in names:
        rep = suites.SUITES[name](**_suite_kwargs(name, cfg, args))
        reports.append(rep)
        lines.append(rep.to_json() + "\n")
    _emit("".join(lines), cfg.output)
    return EXIT_OK if all(r.passed for r in reports) else EXIT_FAIL


def _run_eval(cfg: CommandConfig, args) -> int:
    ev = kernel.log_kernel(cfg.n, args.t, args.rho)
    out = {
        "n": cfg.n,
        "t": args.t,
        "rho": args.rho,
        "logK": ev.logK,
        "K": ev.K,
        "alpha": ev.alpha,
        "margin": kernel.superconvexity_margin(cfg.n, args.t, args.rho),
    }
    _emit(json.dumps(out, allow_nan=False) + "\n", cfg.output)
    return EXIT_OK


def _run_alpha(cfg: CommandConfig, args) -> int:
    a = build_alpha(cfg.n)
    if cfg.fmt == "latex":
        text = a.to_latex(f"α_{cfg.n}") + "\n"
    else:
        text = json.dumps(a.to_json()) + "\n"
    _emit(text, cfg.output)
    return EXIT_OK


def _run_table(cfg: CommandConfig, args) -> int:
    if args.l_max > L_MAX:
        raise UsageError(f"--l-max must be at most {L_MAX}")
    _emit(json.dumps(dump_table(build_fl_table(args.l_max))) + "\n", cfg.output)
    return EXIT_OK


def _run_mcf(cfg: CommandConfig, args) -> int:
    samples = monotonicity.monotonicity_scan(cfg.n, args.r0, args.t0, args.d, args.samples, args.order)
    if cfg.fmt == "csv":
        text = monotonicity.samples_to_csv(samples)
    else:
        report = monotonicity.scan_report(samples, "mcf")
        text = json.dumps(
            {
                "n": cfg.n,
                "r0": args.r0,
                "t0": args.t0,
                "d": args.d,
                "extinction_time": monotonicity.extinction_time(cfg.n, args.r0),
                "samples": [
                    {"time": s.time, "F": s.F, "dF_estimate": s.dF_estimate, "log_F": s.log_F}
                    for s in samples
                ],
                "report": report.to_dict(),
            },
            allow_nan=False,
        ) + "\n"
    _emit(text, cfg.output)
    return EXIT_OK


def _run_semigroup(cfg: CommandConfig, args) -> int:
    err = kernel.semigroup_check(args.s, args.t, args.d01)
    rep = VerificationReport(
        check_name="semigroup",
        grid={"cases": {"values": [[args.s, args.t, args.d01]], "count": 1, "spacing": "set"}},
        worst_value=err,
        worst_location={"n": 3, "s": args.s, "t": args.t, "d01": args.d01},
        tolerance=args.tol,
        passed=err <= args.tol,
    )
    _emit(rep.to_json() + "\n", cfg.output)
    return EXIT_OK if rep.passed else EXIT_FAIL


_HANDLERS = {
    "eval": _run_eval,
    "table": _run_table,
    "alpha": _run_alpha,
    "verify": _run_verify,
    "mcf": _run_mcf,
    "semigroup": _run_semigroup,
}


def run(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse already wrote usage to stderr
        return EXIT_OK if exc.code in (0, None) else EXIT_USAGE
    try:
        cfg = _config(args)
        return _HANDLERS[args.subcommand](cfg, args)
    except (ConfigError, UsageError, LevelOutOfRange, kernel.DomainError, ValueError) as exc:
        parser.print_usage(sys.stderr)
        print(f"hypheat: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except kernel.QuadratureError as exc:
        print(f"hypheat: quadrature did not converge: {exc}", file=sys.stderr)
        return EXIT_FAIL


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
