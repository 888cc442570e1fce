import json
import math
from concurrent.futures import ThreadPoolExecutor

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from hypheat.alpha_engine import (
    AlphaPoly,
    Expansion,
    InvariantViolation,
    LadderOverflow,
    UsageError,
    _as_alpha,
    build_alpha,
    diff_sigma,
    diff_t,
    eval_expansion,
    monomial_degree,
    monomial_weight,
    recurrence_step,
    structure_check,
)
from hypheat.radial_basis import default_table, eval_fl

TABLE = default_table()


def test_small_alphas_literal():
    assert dict(build_alpha(1).terms) == {(0, ()): 1}
    assert dict(build_alpha(3).terms) == {(0, ((1, 1),)): 1}
    assert dict(build_alpha(5).terms) == {(0, ((1, 2),)): 1, (1, ((2, 1),)): 2}
    assert build_alpha(7).to_latex("α_7") == "α_7 = f_1^3 + 6 t f_1 f_2 + 4 t^2 f_3"
    assert build_alpha(9).to_latex() == (
        "f_1^4 + 12 t f_1^2 f_2 + 16 t^2 f_1 f_3 + 12 t^2 f_2^2 + 8 t^3 f_4"
    )


@pytest.mark.parametrize("n", [3, 5, 7, 9, 11, 13, 15, 17, 19])
def test_matches_sympy_rederivation(n):
    assert dict(build_alpha(n).terms) == oracles.alpha_brute(n)


@pytest.mark.parametrize("m", range(0, 26))
def test_structure(m):
    a = build_alpha(2 * m + 1)
    rep = structure_check(a)
    assert rep.passed, rep.worst_location
    assert all(isinstance(c, int) and c > 0 for c in a.terms.values())
    if m:
        assert a.P(0) == {((1, m),): 1}
        assert a.P(m - 1) == {((m, 1),): 2 ** (m - 1)}


@pytest.mark.parametrize("m", [1, 4, 9, 17])
def test_weight_and_degree(m):
    a = build_alpha(2 * m + 1)
    assert a.weights() == {m} and a.uniform_weight() == m
    for (i, mono) in a.terms:
        assert monomial_weight(mono) == m
        assert monomial_degree(mono) == m - i


def test_term_count_and_memo_identity():
    a = build_alpha(51)
    assert len(a) == 1958
    assert build_alpha(51) is a


def test_structure_check_flags_tampering():
    a = build_alpha(9)
    terms = dict(a.terms)
    terms[(0, ((1, 4),))] = 2
    rep = structure_check(AlphaPoly(terms, m=4))
    assert not rep.passed and "t^0 part" in rep.worst_location["failures"]
    terms = dict(a.terms)
    terms[(3, ((4, 1),))] = 7
    assert "t^3 part" in structure_check(AlphaPoly(terms, m=4)).worst_location["failures"]


def test_negative_coefficient_is_invariant_violation():
    with pytest.raises(InvariantViolation):
        _as_alpha(Expansion({(0, ((1, 1),)): 1, (1, ((2, 1),)): -1}), 1)


def test_usage_errors():
    for bad in (0, 2, -3, 4.0, "5"):
        with pytest.raises(UsageError):
            build_alpha(bad)
    with pytest.raises(UsageError):
        build_alpha(131)
    with pytest.raises(UsageError):
        build_alpha(9, l_max=3)


def test_ladder_overflow():
    with pytest.raises(LadderOverflow):
        diff_sigma(build_alpha(7), l_max=3)
    with pytest.raises(LadderOverflow):
        recurrence_step(build_alpha(5), l_max=2)


def test_diff_rules():
    a = build_alpha(7)
    # d/dsigma f_1^3 = -3 f_1^2 f_2
    assert diff_sigma(a).terms[(0, ((1, 2), (2, 1)))] == -3
    assert dict(diff_t(a).terms) == {(0, ((1, 1), (2, 1))): 6, (1, ((3, 1),)): 8}
    assert recurrence_step(a) == build_alpha(9)


@pytest.mark.parametrize("n", [5, 7, 9, 11])
@pytest.mark.parametrize("t, rho", [(0.3, 0.2), (1.0, 1.0), (4.0, 6.0)])
def test_eval_matches_symbolic_kernel(n, t, rho):
    import mpmath as mp

    with mp.workdps(60):
        pref = (4 * mp.pi * t) ** (-n / mp.mpf(2)) * mp.exp(-((n - 1) ** 2) * mp.mpf(t) / 4 - mp.mpf(rho) ** 2 / (4 * t))
        ref = oracles.kernel_symbolic(n, t, rho) / pref
    assert eval_expansion(build_alpha(n), TABLE, t, rho) == pytest.approx(float(ref), rel=1e-13)


def test_eval_vectorised_in_t_and_frozen_value():
    a = build_alpha(5)
    ts = np.array([0.5, 1.0, 2.0])
    vals = eval_expansion(a, TABLE, ts, 1.0)
    f1, f2 = eval_fl(TABLE, 1, 1.0), eval_fl(TABLE, 2, 1.0)
    np.testing.assert_allclose(vals, f1 * f1 + 2 * ts * f2, rtol=1e-15)
    assert vals[1] == pytest.approx(1.1773753584857287, rel=1e-15)
    with pytest.raises(ValueError):
        eval_expansion(a, TABLE, 0.0, 1.0)


def test_json_dump():
    d = json.loads(json.dumps(build_alpha(7).to_json()))
    assert d["n"] == 7 and d["m"] == 3
    assert d["terms"]["2"] == [{"exponents": {"3": 1}, "coefficient": "4"}]
    assert {"exponents": {"1": 1, "2": 1}, "coefficient": "6"} in d["terms"]["1"]


def test_concurrent_builds_agree():
    with ThreadPoolExecutor(6) as pool:
        out = list(pool.map(lambda n: build_alpha(n).to_latex(), [41, 43, 45, 41, 43, 45]))
    assert out[:3] == out[3:]


@settings(max_examples=40, deadline=None)
@given(m=st.integers(1, 10), t=st.floats(1e-3, 100.0), rho=st.floats(1e-3, 20.0))
def test_alpha_positive_and_decreasing_in_sigma(m, t, rho):
    a = build_alpha(2 * m + 1)
    v = eval_expansion(a, TABLE, t, rho)
    d = eval_expansion(diff_sigma(a), TABLE, t, rho)
    assert v > 0 or math.isclose(v, 0.0)
    assert d <= 0
