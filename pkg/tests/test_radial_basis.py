import json
import math
from concurrent.futures import ThreadPoolExecutor

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from hypheat.radial_basis import (
    L_MAX,
    SERIES_SWITCH,
    FlRep,
    LevelOutOfRange,
    build_fl_table,
    check_fl_logconvex,
    check_fl_monotone,
    default_table,
    dump_table,
    eval_closed_form,
    eval_fl,
    eval_series,
    log_fl,
)

TABLE = default_table()


def test_first_reps():
    assert TABLE[0] == FlRep(1, (1,), ())
    # f_2 = (sigma rho - sinh rho) / sinh^3 rho
    assert TABLE[1] == FlRep(2, (0, 1), (-1,))
    assert len(TABLE) == L_MAX


def test_reps_match_symbolic_ladder():
    # evaluate p_l, q_l at 80 digits and compare with sympy's sigma-derivatives
    with mp.workdps(80):
        for l in range(1, 7):
            rep = TABLE[l - 1]
            for rho in ("0.25", "1.75", "4"):
                r = mp.mpf(rho)
                s = mp.cosh(r)
                p = sum(c * s**k for k, c in enumerate(rep.p))
                q = sum(c * s**k for k, c in enumerate(rep.q))
                closed = (p * r + q * mp.sinh(r)) / mp.sinh(r) ** (2 * l - 1)
                ref = oracles.f_symbolic(l, float(rho), dps=80)
                assert abs(closed / ref - 1) < mp.mpf(10) ** -60


@pytest.mark.parametrize("l", [1, 2, 3, 5, 8, 13, 20])
@pytest.mark.parametrize("rho", [1e-3, 0.049, 0.051, 0.3, 1.0, 4.0, 12.0, 30.0])
def test_eval_against_integral_representation(l, rho):
    ref = oracles.f_integral(l, rho)
    assert abs(eval_fl(TABLE, l, rho) / float(ref) - 1) < 1e-12


@pytest.mark.parametrize("l", range(1, 21))
def test_values_at_pole(l):
    ref = float(oracles.f_integral(l, 0.0))
    assert eval_fl(TABLE, l, 0.0) == pytest.approx(ref, rel=1e-14)


@pytest.mark.parametrize("l", [1, 4, 10, 20])
def test_series_and_closed_form_meet_at_switch(l):
    for rho in (0.8 * SERIES_SWITCH, SERIES_SWITCH, 1.2 * SERIES_SWITCH):
        a = eval_series(TABLE, l, rho)
        b = eval_closed_form(TABLE, l, rho)
        assert abs(a / b - 1) < 1e-13


def test_log_domain_survives_underflow():
    assert eval_fl(TABLE, 60, 40.0) == 0.0
    ref = mp.log(oracles.f_symbolic(6, 40.0, dps=60))
    assert log_fl(TABLE, 6, 40.0) == pytest.approx(float(ref), rel=1e-14)
    assert math.isfinite(log_fl(TABLE, 60, 40.0))


def test_level_bounds():
    with pytest.raises(LevelOutOfRange):
        eval_fl(TABLE, 0, 1.0)
    with pytest.raises(LevelOutOfRange):
        eval_fl(TABLE, L_MAX + 1, 1.0)
    small = build_fl_table(3)
    with pytest.raises(LevelOutOfRange):
        log_fl(small, 4, 1.0)
    with pytest.raises(ValueError):
        build_fl_table(0)
    with pytest.raises(ValueError):
        eval_fl(TABLE, 1, -1.0)


def test_dump_is_json_decimal_strings():
    data = json.loads(json.dumps(dump_table(build_fl_table(4))))
    assert data[2] == {"level": 3, "p": [str(c) for c in TABLE[2].p], "q": [str(c) for c in TABLE[2].q]}
    for row in data:
        assert all(isinstance(c, str) and int(c) == int(c) for c in row["p"] + row["q"])


def test_scaled_vectorised_matches_scalar():
    rho = np.array([0.01, 0.5, 3.0, 25.0])
    g, lam = TABLE.scaled(rho, 6)
    for k, r in enumerate(rho):
        gs, ls = TABLE.scaled(float(r), 6)
        np.testing.assert_allclose(g[:, k], gs, rtol=1e-15)
        assert lam[k] == pytest.approx(ls, rel=1e-15)


@settings(max_examples=60, deadline=None)
@given(l=st.integers(2, 12), rho=st.floats(0.5, 5.0))
def test_three_term_recurrence(l, rho):
    # (sigma^2 - 1) f_{l+1} = (2l - 1) sigma f_l - (l - 1)^2 f_{l-1}
    s = math.cosh(rho)
    fm, f0, fp = (eval_fl(TABLE, k, rho) for k in (l - 1, l, l + 1))
    lhs = (s * s - 1) * fp
    rhs = (2 * l - 1) * s * f0 - (l - 1) ** 2 * fm
    scale = (2 * l - 1) * s * f0 + (l - 1) ** 2 * fm
    assert abs(lhs - rhs) <= 1e-12 * scale


@settings(max_examples=80, deadline=None)
@given(l=st.integers(1, 38), rho=st.floats(1e-4, 60.0))
def test_positive_decreasing_logconvex(l, rho):
    a, b, c = (log_fl(TABLE, k, rho) for k in (l, l + 1, l + 2))
    assert math.isfinite(a)
    assert log_fl(TABLE, l, rho * 1.01 + 1e-3) < a
    # log f_{l+2} + log f_l >= 2 log f_{l+1} up to rounding
    assert c + a - 2 * b > -1e-12


def test_checks_pass_on_grid():
    grid = np.geomspace(1e-4, 40, 60)
    rep = check_fl_monotone(TABLE, range(1, 41), grid)
    assert rep.passed and rep.worst_value < 0
    for l in (1, 7, 20):
        r = check_fl_logconvex(TABLE, l, grid)
        assert r.passed and r.worst_value >= -1e-12


def test_logconvex_check_fails_when_slack_is_negative():
    # demanding a strictly positive gap larger than the true one must fail
    rep = check_fl_logconvex(TABLE, 3, np.array([40.0]), tol_rel=-1.0)
    assert not rep.passed


def test_concurrent_reads_agree():
    rhos = np.linspace(0.01, 20, 64)

    def work(r):
        return [log_fl(TABLE, l, float(r)) for l in (1, 9, 27)]

    serial = [work(r) for r in rhos]
    with ThreadPoolExecutor(8) as pool:
        parallel = list(pool.map(work, rhos))
    assert serial == parallel
