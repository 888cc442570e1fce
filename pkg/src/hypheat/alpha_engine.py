"""Exact expansion of alpha_{2m+1}(t, rho) = sum_i t^i P_{m,i}(f_1, ..., f_m).

Expansions are sparse maps ``(t_power, monomial) -> int`` where a monomial is
a sorted tuple of ``(level, exponent)`` pairs standing for prod f_level**exponent.
alpha is built from alpha_1 = 1 by

    alpha_n = f_1 * alpha_{n-2} - 2 t * d alpha_{n-2} / d sigma,

with d f_l / d sigma = -f_{l+1} applied monomial by monomial.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass, field
from functools import cached_property
from types import MappingProxyType
from typing import Mapping

import numpy as np
from numpy.polynomial import polynomial as npoly

from .radial_basis import L_MAX, FlTable, LevelOutOfRange, default_table
from .report import VerificationReport

Monomial = tuple[tuple[int, int], ...]
Key = tuple[int, Monomial]


class UsageError(ValueError):
    """Invalid dimension or argument for the odd-dimensional engine."""


class InvariantViolation(AssertionError):
    """A constructed alpha carries a non-positive coefficient."""


class LadderOverflow(LevelOutOfRange):
    """Differentiation would need a ladder level beyond the configured maximum."""


def _mono_mul(a: Monomial, level: int, power: int = 1) -> Monomial:
    d = dict(a)
    d[level] = d.get(level, 0) + power
    return tuple(sorted((l, j) for l, j in d.items() if j))


def monomial_weight(mono: Monomial) -> int:
    """sum of level * exponent; every monomial of alpha_{2m+1} has weight m."""
    return sum(l * j for l, j in mono)


def monomial_degree(mono: Monomial) -> int:
    return sum(j for _, j in mono)


@dataclass(frozen=True)
class Expansion:
    """Integer combination of ``t**i * prod f_l**j_l`` terms."""

    terms: Mapping[Key, int]

    def __post_init__(self):
        clean = {k: int(v) for k, v in self.terms.items() if v}
        object.__setattr__(self, "terms", MappingProxyType(clean))

    def __len__(self) -> int:
        return len(self.terms)

    def __eq__(self, other) -> bool:
        if not isinstance(other, Expansion):
            return NotImplemented
        return dict(self.terms) == dict(other.terms)

    def __hash__(self) -> int:
        return hash(frozenset(self.terms.items()))

    def __add__(self, other: Expansion) -> Expansion:
        out = dict(self.terms)
        for k, v in other.terms.items():
            out[k] = out.get(k, 0) + v
        return Expansion(out)

    def __sub__(self, other: Expansion) -> Expansion:
        return self + other.scale(-1)

    def scale(self, c: int) -> Expansion:
        return Expansion({k: c * v for k, v in self.terms.items()})

    def times_f(self, level: int = 1) -> Expansion:
        return Expansion({(i, _mono_mul(mono, level)): c for (i, mono), c in self.terms.items()})

    def times_t(self, power: int = 1) -> Expansion:
        return Expansion({(i + power, mono): c for (i, mono), c in self.terms.items()})

    @property
    def max_level(self) -> int:
        return max((l for _, mono in self.terms for l, _ in mono), default=0)

    @property
    def t_degree(self) -> int:
        return max((i for i, _ in self.terms), default=-1)

    def part(self, i: int) -> dict[Monomial, int]:
        """Coefficient polynomial of ``t**i`` as ``{monomial: coefficient}``."""
        return {mono: c for (j, mono), c in self.terms.items() if j == i}

    def weights(self) -> set[int]:
        return {monomial_weight(mono) for _, mono in self.terms}

    @cached_property
    def _compiled(self):
        keys = sorted(self.terms, key=_sort_key)
        width = max(self.max_level, 1)
        expo = np.zeros((len(keys), width))
        for r, (_, mono) in enumerate(keys):
            for l, j in mono:
                expo[r, l - 1] = j
        tpow = np.array([i for i, _ in keys], dtype=int)
        coef = np.array([float(self.terms[k]) for k in keys])
        weight = np.array([monomial_weight(m) for _, m in keys], dtype=float)
        return expo, tpow, coef, weight

    def t_coefficients(self, g: np.ndarray) -> np.ndarray:
        """Per-``t``-power sums evaluated on a *scaled* ladder ``g``.

        ``g`` is ``(levels,)`` or ``(levels, npoints)``; the result has the
        t-power on its first axis.  Only meaningful as-is when all monomials
        share one weight ``W``: the unscaled sums are ``result * cosh(rho)**-W``.
        """
        g = np.asarray(g, dtype=float)
        expo, tpow, coef, _ = self._compiled
        if not len(coef):
            return np.zeros((1,) + g.shape[1:])
        width = expo.shape[1]
        if width > g.shape[0]:
            raise LadderOverflow(f"expansion uses level {width} but only {g.shape[0]} evaluated")
        if g.ndim == 1:
            vals = coef * np.prod(g[:width] ** expo, axis=1)
            return np.bincount(tpow, weights=vals, minlength=self.t_degree + 1)
        gw = g[:width].T
        vals = coef[:, None] * np.prod(gw[None, :, :] ** expo[:, None, :], axis=2)
        out = np.zeros((self.t_degree + 1, g.shape[1]))
        np.add.at(out, tpow, vals)
        return out

    def uniform_weight(self) -> int:
        w = self.weights()
        if len(w) > 1:
            raise InvariantViolation(f"expansion is not weight-homogeneous: weights {sorted(w)}")
        return w.pop() if w else 0

    def to_latex(self, lhs: str | None = None) -> str:
        body = _latex_body(self)
        return f"{lhs} = {body}" if lhs else body

    def to_json(self) -> dict:
        out: dict[str, list] = {}
        for i, mono in sorted(self.terms, key=_sort_key):
            out.setdefault(str(i), []).append(
                {"exponents": {str(l): j for l, j in mono}, "coefficient": str(self.terms[(i, mono)])}
            )
        return out


@dataclass(frozen=True, eq=False)
class AlphaPoly(Expansion):
    """alpha_{2m+1}; every stored coefficient is a positive integer."""

    m: int = field(default=0)

    @property
    def n(self) -> int:
        return 2 * self.m + 1

    def P(self, i: int) -> dict[Monomial, int]:
        return self.part(i)

    def to_json(self) -> dict:
        return {"n": self.n, "m": self.m, "terms": super().to_json()}


def _sort_key(key: Key):
    i, mono = key
    # within one t power: more weight on low levels first (f_1^3 before f_1 f_2)
    dense = dict(mono)
    top = max(dense, default=0)
    return (i, tuple(-dense.get(l, 0) for l in range(1, top + 1)))


def _latex_term(c: int, i: int, mono: Monomial, first: bool) -> str:
    sign = "-" if c < 0 else "+"
    mag = abs(c)
    factors = []
    if mag != 1 or (i == 0 and not mono):
        factors.append(str(mag))
    if i == 1:
        factors.append("t")
    elif i > 1:
        factors.append(f"t^{i}")
    for l, j in mono:
        factors.append(f"f_{l}" if j == 1 else f"f_{l}^{j}")
    text = " ".join(factors)
    if first:
        return text if sign == "+" else f"-{text}"
    return f"{sign} {text}"


def _latex_body(a: Expansion) -> str:
    keys = sorted(a.terms, key=_sort_key)
    if not keys:
        return "0"
    return " ".join(_latex_term(a.terms[k], k[0], k[1], n == 0) for n, k in enumerate(keys))


# -- calculus -------------------------------------------------------------------------


def diff_sigma(a: Expansion, l_max: int = L_MAX) -> Expansion:
    """Exact d/dsigma using d f_l / d sigma = -f_{l+1}."""
    out: dict[Key, int] = {}
    for (i, mono), c in a.terms.items():
        for l, j in mono:
            if l + 1 > l_max:
                raise LadderOverflow(f"d/dsigma of f_{l} needs level {l + 1} > {l_max}")
            new = _mono_mul(_mono_mul(mono, l, -1), l + 1)
            key = (i, new)
            out[key] = out.get(key, 0) - c * j
    return Expansion(out)


def diff_t(a: Expansion) -> Expansion:
    out: dict[Key, int] = {}
    for (i, mono), c in a.terms.items():
        if i:
            out[(i - 1, mono)] = out.get((i - 1, mono), 0) + i * c
    return Expansion(out)


def recurrence_step(a: Expansion, l_max: int = L_MAX) -> Expansion:
    """f_1 * a - 2t * da/dsigma."""
    return a.times_f(1) - diff_sigma(a, l_max).times_t(1).scale(2)


# -- construction ------------------------------------------------------------------------

_memo: dict[int, AlphaPoly] = {1: AlphaPoly({(0, ()): 1}, m=0)}
_memo_lock = threading.Lock()


def _as_alpha(e: Expansion, m: int) -> AlphaPoly:
    bad = [(k, c) for k, c in e.terms.items() if c <= 0]
    if bad:
        (i, mono), c = bad[0]
        raise InvariantViolation(
            f"alpha_{2 * m + 1} has non-positive coefficient {c} at t^{i} {mono}"
        )
    return AlphaPoly(e.terms, m=m)


def build_alpha(n: int, l_max: int = L_MAX) -> AlphaPoly:
    """alpha_n for odd ``1 <= n <= 2*l_max + 1``, memoised per process."""
    if not isinstance(n, (int, np.integer)) or n < 1 or n % 2 == 0:
        raise UsageError(f"n must be an odd positive integer, got {n!r}")
    if n > 2 * l_max + 1:
        raise UsageError(f"n = {n} exceeds the ladder budget 2*{l_max}+1")
    n = int(n)
    with _memo_lock:
        if n in _memo:
            return _memo[n]
        start = max(k for k in _memo if k <= n)
        a = _memo[start]
        for k in range(start + 2, n + 1, 2):
            a = _as_alpha(recurrence_step(a, l_max), (k - 1) // 2)
            _memo[k] = a
        return a


# -- numerics ---------------------------------------------------------------------------


def eval_expansion(a: Expansion, table: FlTable | None, t, rho: float):
    """sum coeff * t**i * prod f_l(rho)**j_l in double precision.

    ``t`` may be an array.  Each monomial is evaluated on the scaled ladder and
    rescaled by its own weight, so the expansion need not be homogeneous.
    """
    table = default_table() if table is None else table
    t = np.asarray(t, dtype=float)
    if np.any(t <= 0):
        raise ValueError("t must be positive")
    if not len(a):
        return np.zeros_like(t)[()] * 1.0
    expo, tpow, coef, weight = a._compiled
    if expo.shape[1] > table.l_max:
        raise LadderOverflow(f"expansion needs level {expo.shape[1]} > table size {table.l_max}")
    g, lam = table.scaled(float(rho), expo.shape[1])
    vals = coef * np.prod(g ** expo, axis=1) * np.exp(-weight * lam)
    sums = np.bincount(tpow, weights=vals, minlength=a.t_degree + 1)
    return npoly.polyval(t, sums)[()]


def structure_check(a: AlphaPoly) -> VerificationReport:
    """Positivity and the two boundary identities of alpha_{2m+1}.

    Passes iff (i) every coefficient is > 0, (ii) the t^0 part is exactly
    f_1^m, (iii) the t^{m-1} part is exactly 2^{m-1} f_m and (iv) the highest
    level used is m.  For m = 0 (alpha_1 = 1) the checks are vacuous.
    ``worst_value`` is the smallest coefficient.
    """
    m = a.m
    failures = []
    low = min(a.terms.items(), key=lambda kv: kv[1])
    if low[1] <= 0:
        failures.append("positivity")
    if m >= 1:
        if a.part(0) != {((1, m),): 1}:
            failures.append("t^0 part")
        if a.part(m - 1) != {((m, 1),): 2 ** (m - 1)}:
            failures.append(f"t^{m - 1} part")
        if a.max_level != m:
            failures.append("max level")
        if a.t_degree != m - 1:
            failures.append("t degree")
    (i, mono), c = low
    return VerificationReport(
        check_name=f"alpha_structure_n{a.n}",
        grid={"n": {"values": [a.n], "count": 1, "spacing": "set"}},
        worst_value=float(c),
        worst_location={"n": a.n, "t_power": i, "monomial": _latex_term(1, 0, mono, True),
                        "failures": failures},
        tolerance=0.0,
        passed=not failures,
    )
