"""Acceptance criteria 1-9, each at its stated grid and tolerance.

Every test records one line ``criterion N: PASS|FAIL ...``; the lines are
printed in the pytest terminal summary (see conftest.py) and also when this
file is run directly with ``python tests/test_acceptance.py``.
"""

from __future__ import annotations

import time

from hypheat import suites
from hypheat.report import VerificationReport

RESULTS: dict[int, str] = {}


def _record(k: int, title: str, reports: list[VerificationReport], extra: str = "") -> bool:
    ok = all(r.passed for r in reports)
    detail = "; ".join(f"{r.check_name} worst={r.worst_value:.3e} tol={r.tolerance:g}" for r in reports)
    line = f"criterion {k}: {'PASS' if ok else 'FAIL'} {title} [{detail}{extra}]"
    RESULTS[k] = line
    print(line)
    return ok


def test_criterion_1_superconvexity_grid():
    t0 = time.perf_counter()
    rep = suites.superconvexity(n_max=31)
    elapsed = time.perf_counter() - t0
    assert rep.grid["n"]["count"] == 16 and rep.grid["t"]["count"] == 25 and rep.grid["rho"]["count"] == 40
    assert rep.tolerance == 1e-12
    ok = _record(1, "log K convex in sigma", [rep], f"; {elapsed:.1f}s")
    assert ok, rep.worst_location
    assert elapsed < 60


def test_criterion_2_rho_sigma_equivalence():
    rep = suites.equivalence(n_max=31)
    assert rep.tolerance == 1e-12
    assert _record(2, "rho-form = sinh^2 * sigma-form", [rep]), rep.worst_location


def test_criterion_3_heat_residual():
    rep = suites.heat(n_max=15)
    assert rep.tolerance == 1e-8
    assert _record(3, "heat-equation residual", [rep]), rep.worst_location


def test_criterion_4_mass_and_equality_case():
    mass = suites.normalization()
    plane = suites.plane()
    assert mass.tolerance == 1e-8 and plane.tolerance == 1e-7
    assert _record(4, "total mass 1 and plane functional constant", [mass, plane])


def test_criterion_5_ladder_and_alpha_structure():
    ladder = suites.ladder(l_max=40)
    alpha = suites.alpha_structure(m_max=25)
    assert ladder.grid["l"]["count"] == 40 and alpha.grid["n"]["values"][-1] == 51
    assert _record(5, "f_l positive decreasing; alpha coefficients and boundary parts", [ladder, alpha])


def test_criterion_6_ladder_log_convexity():
    rep = suites.ladder_logconvex(l_max=20)
    assert rep.tolerance == 1e-12
    assert _record(6, "f_{l+2} f_l >= f_{l+1}^2", [rep]), rep.worst_location


def test_criterion_7_proof_intermediates():
    rep = suites.proof_intermediates(m_max=12)
    assert rep.tolerance == 1e-12
    assert _record(7, "A >= 0 and B_{m,i} >= 0", [rep]), rep.worst_location


def test_criterion_8_sphere_flows():
    scans = suites.mcf(samples=200)
    rk4 = suites.rk4(flows=50)
    assert rk4.tolerance == 1e-8
    assert _record(8, "F strictly decreasing on sphere flows; RK4 radius", [scans, rk4])


def test_criterion_9_semigroup():
    rep = suites.semigroup()
    assert rep.tolerance == 1e-6
    assert _record(9, "Chapman-Kolmogorov for n = 3", [rep]), rep.worst_location


if __name__ == "__main__":
    import sys

    failed = 0
    for name, fn in sorted((k, v) for k, v in globals().items() if k.startswith("test_criterion_")):
        try:
            fn()
        except AssertionError:
            failed += 1
    sys.exit(1 if failed else 0)
