"""Grid verification suites; each returns exactly one VerificationReport.

Default grids and tolerances are the acceptance values.  Sweeps over the
outer axis may run on a thread pool capped by ``HYPHEAT_THREADS``.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterable

import numpy as np

from . import kernel, monotonicity
from .alpha_engine import build_alpha, structure_check
from .radial_basis import check_fl_logconvex, check_fl_monotone, default_table
from .report import VerificationReport, axis, levels_axis

T_GRID = np.geomspace(1e-3, 1e2, 25)
RHO_GRID = np.geomspace(1e-3, 30.0, 40)
LADDER_GRID = np.geomspace(1e-4, 40.0, 60)
N_MAX = 31
HEAT_N_MAX = 15
PROOF_M_MAX = 12
ALPHA_M_MAX = 25
LADDER_L_MAX = 40
LOGCONVEX_L_MAX = 20
NORM_N = (1, 3, 5, 7, 9)
NORM_T = (0.01, 0.1, 1.0, 10.0)
PLANE_N = (1, 3, 7)
PLANE_TAU = (0.05, 0.5, 5.0)
SEMIGROUP_CASES = ((0.5, 0.5, 0.0), (0.3, 0.7, 2.0), (1.0, 1.0, 5.0))
MCF_FLOWS = ((1, 1.0, 0.1), (3, 2.0, 0.2))
MCF_OFFSETS = (0.0, 0.5, 1.0)

TOL = {
    "superconvexity": 1e-12,
    "equivalence": 1e-12,
    "heat": 1e-8,
    "normalization": 1e-8,
    "plane": 1e-7,
    "concentration": 0.0,
    "ladder": 0.0,
    "alpha-structure": 0.0,
    "yuzhao": 1e-12,
    "proof-intermediates": 1e-12,
    "mcf": 0.0,
    "rk4": 1e-8,
    "semigroup": 1e-6,
}


def sweep_workers() -> int:
    raw = os.environ.get("HYPHEAT_THREADS", "").strip()
    if not raw:
        return 1
    try:
        k = int(raw)
    except ValueError:
        raise ValueError(f"HYPHEAT_THREADS must be a positive integer, got {raw!r}") from None
    if k < 1:
        raise ValueError(f"HYPHEAT_THREADS must be a positive integer, got {raw!r}")
    return k


def _map(fn: Callable, items: Iterable) -> list:
    items = list(items)
    workers = min(sweep_workers(), len(items)) or 1
    if workers == 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def _odd(n_max: int) -> list[int]:
    return list(range(1, n_max + 1, 2))


def _kernel_grid(ns, t_grid, rho_grid) -> dict:
    return {"n": levels_axis(ns), "t": axis(t_grid), "rho": axis(rho_grid)}


# -- kernel suites ------------------------------------------------------------------------


def superconvexity(n_max: int = N_MAX, t_grid=T_GRID, rho_grid=RHO_GRID, tol: float | None = None,
                   strict_rho: float = 10.0) -> VerificationReport:
    """d^2/dsigma^2 log K_n > 0 on the grid.

    Passes iff margin > -tol * (|part1| + |part2|) everywhere, the raw margin
    is > 0 wherever rho <= ``strict_rho``, and log K is finite at every grid
    point.  ``worst_value`` is the smallest raw margin seen.
    """
    tol = TOL["superconvexity"] if tol is None else tol
    t = np.asarray(t_grid, dtype=float)
    ns = _odd(n_max)

    def one(n):
        worst, where, ok = math.inf, None, True
        for rho in rho_grid:
            p1, p2 = kernel.margin_parts(n, t, float(rho))
            margin = p1 + p2
            k = int(np.argmin(margin))
            if margin[k] < worst:
                worst, where = float(margin[k]), {"n": n, "t": float(t[k]), "rho": float(rho)}
            ok &= bool(np.all(margin > -tol * (np.abs(p1) + np.abs(p2))))
            if rho <= strict_rho:
                ok &= bool(np.all(margin > 0))
            ok &= all(math.isfinite(kernel.log_kernel(n, float(tk), float(rho)).logK) for tk in (t[0], t[-1]))
        return worst, where, ok

    return _fold("superconvexity", _map(one, ns), _kernel_grid(ns, t, rho_grid), tol, lower=True)


def equivalence(n_max: int = N_MAX, t_grid=T_GRID, rho_grid=RHO_GRID, tol: float | None = None) -> VerificationReport:
    """|rho-form - sinh^2(rho) * sigma-form| <= tol * |rho-form|; worst relative gap."""
    tol = TOL["equivalence"] if tol is None else tol
    t = np.asarray(t_grid, dtype=float)
    ns = _odd(n_max)

    def one(n):
        worst, where = -math.inf, None
        for rho in rho_grid:
            sh2 = math.sinh(rho) ** 2
            p1, p2 = kernel.margin_parts(n, t, float(rho))
            for k, tk in enumerate(t):
                rf = kernel.margin_rho_form(n, float(tk), float(rho))
                gap = abs(rf - sh2 * (p1[k] + p2[k])) / abs(rf)
                if gap > worst:
                    worst, where = gap, {"n": n, "t": float(tk), "rho": float(rho)}
        return worst, where, worst <= tol

    return _fold("equivalence", _map(one, ns), _kernel_grid(ns, t, rho_grid), tol, lower=False)


def heat(n_max: int = HEAT_N_MAX, t_grid=T_GRID, rho_grid=RHO_GRID, tol: float | None = None) -> VerificationReport:
    """Largest relative heat-equation residual; passes iff <= tol."""
    tol = TOL["heat"] if tol is None else tol
    t = np.asarray(t_grid, dtype=float)
    ns = _odd(n_max)

    def one(n):
        worst, where = -math.inf, None
        for rho in rho_grid:
            res = kernel.heat_residual(n, t, float(rho))
            k = int(np.argmax(res))
            if res[k] > worst:
                worst, where = float(res[k]), {"n": n, "t": float(t[k]), "rho": float(rho)}
        return worst, where, worst <= tol

    return _fold("heat", _map(one, ns), _kernel_grid(ns, t, rho_grid), tol, lower=False)


def normalization(n_values=NORM_N, t_values=NORM_T, tol: float | None = None) -> VerificationReport:
    """Largest |mass - 1|; passes iff <= tol."""
    tol = TOL["normalization"] if tol is None else tol

    def one(n):
        errs = [(abs(kernel.normalization(n, t) - 1.0), t) for t in t_values]
        e, t = max(errs)
        return e, {"n": n, "t": t}, e <= tol

    grid = {"n": levels_axis(n_values), "t": axis(t_values, "set")}
    return _fold("normalization", _map(one, n_values), grid, tol, lower=False)


def concentration(n: int = 3, t_values=(0.1, 0.01, 0.001), rho0: float = 0.5) -> VerificationReport:
    """Mass outside the ball of radius rho0 strictly decreases as t shrinks.

    ``worst_value`` is the largest ratio tail(t_{k+1}) / tail(t_k) (must be < 1).
    """
    tails = [kernel.tail_mass(n, t, rho0) for t in t_values]
    ratios = [b / a if a > 0 else (0.0 if b == 0 else math.inf) for a, b in zip(tails, tails[1:])]
    k = int(np.argmax(ratios))
    ok = all(b < a for a, b in zip(tails, tails[1:]))
    return VerificationReport(
        check_name="concentration",
        grid={"n": levels_axis([n]), "t": axis(t_values, "set"), "rho0": axis([rho0], "set")},
        worst_value=float(ratios[k]),
        worst_location={"n": n, "t": float(t_values[k + 1]), "rho0": rho0},
        tolerance=TOL["concentration"],
        passed=ok,
    )


def proof_intermediates(m_max: int = PROOF_M_MAX, t_grid=T_GRID, rho_grid=RHO_GRID,
                        tol: float | None = None) -> VerificationReport:
    """A >= 0, every B_{m,i} >= 0 and every C_{m,i,a,b} >= 0, with relative slack.

    Statistic: value / (sum of |cross terms|), minimised over everything;
    passes iff > -tol.
    """
    tol = TOL["proof-intermediates"] if tol is None else tol
    t = np.asarray(t_grid, dtype=float)
    ms = list(range(1, m_max + 1))

    def one(m):
        worst, where = math.inf, None
        for rho in rho_grid:
            B, Bmag, C_min, _ = kernel.b_values(m, float(rho))
            stat = B / Bmag
            i = int(np.argmin(stat))
            if stat[i] < worst:
                worst, where = float(stat[i]), {"m": m, "i": i, "t": None, "rho": float(rho), "quantity": "B"}
            if C_min < worst:
                worst, where = C_min, {"m": m, "i": None, "t": None, "rho": float(rho), "quantity": "C"}
            A, Amag = kernel.a_values(m, t, float(rho))
            sa = A / Amag
            k = int(np.argmin(sa))
            if sa[k] < worst:
                worst, where = float(sa[k]), {"m": m, "i": None, "t": float(t[k]), "rho": float(rho), "quantity": "A"}
        return worst, where, worst > -tol

    grid = {"m": levels_axis(ms), "t": axis(t), "rho": axis(rho_grid)}
    return _fold("proof-intermediates", _map(one, ms), grid, tol, lower=True)


def semigroup(cases=SEMIGROUP_CASES, tol: float | None = None) -> VerificationReport:
    """Largest Chapman-Kolmogorov relative error for n = 3; passes iff <= tol."""
    tol = TOL["semigroup"] if tol is None else tol
    errs = _map(lambda c: kernel.semigroup_check(*c), cases)
    k = int(np.argmax(errs))
    s, t, d = cases[k]
    return VerificationReport(
        check_name="semigroup",
        grid={"cases": {"values": [list(c) for c in cases], "count": len(cases), "spacing": "set"}},
        worst_value=float(errs[k]),
        worst_location={"n": 3, "s": s, "t": t, "d01": d},
        tolerance=tol,
        passed=bool(max(errs) <= tol),
    )


# -- exact-structure suites -----------------------------------------------------------------


def ladder(l_max: int = LADDER_L_MAX, rho_grid=LADDER_GRID) -> VerificationReport:
    report = check_fl_monotone(default_table(), range(1, l_max + 1), rho_grid)
    report.check_name = "ladder"
    return report


def ladder_logconvex(l_max: int = LOGCONVEX_L_MAX, rho_grid=LADDER_GRID, tol: float | None = None) -> VerificationReport:
    tol = TOL["yuzhao"] if tol is None else tol
    table = default_table()
    reports = _map(lambda l: check_fl_logconvex(table, l, rho_grid, tol), range(1, l_max + 1))
    worst = min(reports, key=lambda r: r.worst_value)
    return VerificationReport(
        check_name="yuzhao",
        grid={"l": levels_axis(range(1, l_max + 1)), "rho": axis(rho_grid)},
        worst_value=worst.worst_value,
        worst_location=worst.worst_location,
        tolerance=tol,
        passed=all(r.passed for r in reports),
    )


def alpha_structure(m_max: int = ALPHA_M_MAX) -> VerificationReport:
    """structure_check for alpha_1 .. alpha_{2 m_max + 1}; worst = smallest coefficient."""
    reports = [structure_check(build_alpha(2 * m + 1)) for m in range(0, m_max + 1)]
    failed = [r for r in reports if not r.passed]
    worst = failed[0] if failed else min(reports, key=lambda r: r.worst_value)
    return VerificationReport(
        check_name="alpha-structure",
        grid={"n": levels_axis([2 * m + 1 for m in range(m_max + 1)])},
        worst_value=worst.worst_value,
        worst_location=worst.worst_location,
        tolerance=0.0,
        passed=not failed,
    )


# -- flows -------------------------------------------------------------------------------------


def mcf(samples: int = 200, flows=MCF_FLOWS, offsets=MCF_OFFSETS) -> VerificationReport:
    """Strictly decreasing F on every sphere scan, plus the limit scan with t0 = t*.

    ``worst_value`` is the largest slope of log F seen in any scan.
    """
    jobs = [(n, r0, t0, d, monotonicity.SCAN_GAP) for n, r0, t0 in flows for d in offsets]
    jobs += [(n, r0, monotonicity.extinction_time(n, r0), 0.0, 1e-3) for n, r0, _ in flows]

    def one(job):
        n, r0, t0, d, gap = job
        s = monotonicity.monotonicity_scan(n, r0, t0, d, samples, gap=gap)
        rep = monotonicity.scan_report(s, "scan")
        bounded = all(math.isfinite(x.log_F) for x in s)
        return rep.worst_value, {"n": n, "r0": r0, "t0": t0, "d": d, "time": rep.worst_location["time"]}, rep.passed and bounded

    grid = {
        "flows": {"values": [list(f) for f in flows], "count": len(flows), "spacing": "set"},
        "d": axis(offsets, "set"),
        "samples": {"values": [samples], "count": 1, "spacing": "set"},
    }
    return _fold("mcf", _map(one, jobs), grid, 0.0, lower=False)



def rk4(flows: int = 50, seed: int = 20240611, tol: float | None = None) -> VerificationReport:
    """Closed-form vs RK4 (step 1e-4) sphere radius on random flows; worst abs gap."""
    tol = TOL["rk4"] if tol is None else tol
    rng = np.random.default_rng(seed)
    worst, where = -math.inf, None
    for _ in range(flows):
        n = int(rng.choice([1, 2, 3, 5]))
        r0 = float(rng.uniform(0.5, 3.0))
        time = float(rng.uniform(0.0, 0.9)) * monotonicity.extinction_time(n, r0)
        gap = abs(monotonicity.rk4_sphere_radius(n, r0, time, 1e-4) - monotonicity.sphere_radius(n, r0, time))
        if gap > worst:
            worst, where = gap, {"n": n, "r0": r0, "time": time}
    return VerificationReport(
        check_name="rk4",
        grid={"flows": {"values": [flows], "count": flows, "spacing": "random"}},
        worst_value=worst,
        worst_location=where,
        tolerance=tol,
        passed=worst <= tol,
    )


def plane(n_values=PLANE_N, taus=PLANE_TAU, tol: float | None = None) -> VerificationReport:
    """Equality case: the geodesic-plane functional equals 1 for every tau."""
    tol = TOL["plane"] if tol is None else tol
    worst, where = -math.inf, None
    for n in n_values:
        for tau in taus:
            e = abs(monotonicity.geodesic_plane_functional(n, tau) - 1.0)
            if e > worst:
                worst, where = e, {"n": n, "tau": tau}
    return VerificationReport(
        check_name="plane",
        grid={"n": levels_axis(n_values), "tau": axis(taus, "set")},
        worst_value=worst,
        worst_location=where,
        tolerance=tol,
        passed=worst <= tol,
    )


def _fold(name, results, grid, tol, lower: bool) -> VerificationReport:
    pick = min if lower else max
    worst, where, _ = pick(results, key=lambda r: r[0])
    return VerificationReport(
        check_name=name,
        grid=grid,
        worst_value=worst,
        worst_location=where,
        tolerance=tol,
        passed=all(r[2] for r in results),
    )


SUITES = {
    "superconvexity": superconvexity,
    "equivalence": equivalence,
    "heat": heat,
    "normalization": normalization,
    "plane": plane,
    "concentration": concentration,
    "ladder": ladder,
    "alpha-structure": alpha_structure,
    "yuzhao": ladder_logconvex,
    "proof-intermediates": proof_intermediates,
    "mcf": mcf,
    "rk4": rk4,
    "semigroup": semigroup,
}
