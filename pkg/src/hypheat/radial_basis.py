"""Ladder functions f_1 = rho / sinh(rho) and f_{l+1} = -d f_l / d sigma, sigma = cosh(rho).

Every level is stored exactly as

    f_l = (p_l(sigma) * rho + q_l(sigma) * sinh(rho)) / sinh(rho)**(2l - 1)

with big-integer polynomials ``p_l`` and ``q_l``, together with an exact
rational Maclaurin series in ``rho`` that takes over near the pole where the
closed form cancels catastrophically.

Numerical evaluation works with the *scaled* ladder ``g_l = f_l * cosh(rho)**l``.
``g_l`` stays O((l-1)! * max(1, rho)) everywhere, whereas ``f_l`` itself
underflows double precision for large ``l * rho``.  Callers recover
``f_l = g_l * exp(-l * log_cosh(rho))``.
"""

from __future__ import annotations

import math
import threading
from collections.abc import Sequence
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

import gmpy2
import numpy as np
from numpy.polynomial import polynomial as npoly

from .report import VerificationReport, axis, levels_axis

L_MAX = 64
SERIES_SWITCH = 0.05
SERIES_ORDER = 12

# Largest cancellation ratio (sum of |terms| / |numerator|) accepted from the
# double-precision closed form; anything worse is redone in extended precision.
_FAST_KAPPA = 2.0
_GUARD_BITS = 64
_MAX_PREC = 1 << 16


class LevelOutOfRange(IndexError):
    """A ladder level outside the constructed table was requested."""


@dataclass(frozen=True)
class FlRep:
    """Exact closed form of one ladder level.

    ``p`` and ``q`` hold integer coefficients in ``sigma``, lowest degree
    first; the zero polynomial is the empty tuple.
    """

    level: int
    p: tuple[int, ...]
    q: tuple[int, ...]

    def to_dict(self) -> dict:
        return {
            "level": self.level,
            "p": [str(c) for c in self.p],
            "q": [str(c) for c in self.q],
        }


@dataclass(frozen=True)
class FlSeries:
    """Maclaurin coefficients of f_l: ``coeffs[k]`` multiplies ``rho**(2k)``."""

    level: int
    coeffs: tuple[Fraction, ...]

    def __call__(self, rho: float) -> float:
        x = float(rho) ** 2
        return float(npoly.polyval(x, [float(c) for c in self.coeffs]))


# -- integer polynomial helpers (coefficients lowest degree first) -------------


def _trim(c: list[int]) -> tuple[int, ...]:
    while c and c[-1] == 0:
        c.pop()
    return tuple(c)


def _deriv(c: Sequence[int]) -> list[int]:
    return [k * c[k] for k in range(1, len(c))]


def _combine(*parts: tuple[int, Sequence[int], int]) -> tuple[int, ...]:
    """Sum of ``scale * sigma**shift * poly`` over ``parts``."""
    size = max((len(c) + s for _, c, s in parts), default=0)
    out = [0] * size
    for scale, c, shift in parts:
        for k, v in enumerate(c):
            out[k + shift] += scale * v
    return _trim(out)


def _next_rep(rep: FlRep) -> FlRep:
    # f_{l+1} = -(1/sinh) d/drho f_l; collecting the rho and sinh parts gives
    #   p' = (2l-1) s p - (s^2-1) dp,   q' = (2l-2) s q - (s^2-1) dq - p
    l = rep.level
    dp, dq = _deriv(rep.p), _deriv(rep.q)
    p = _combine((2 * l - 1, rep.p, 1), (-1, dp, 2), (1, dp, 0))
    q = _combine((2 * l - 2, rep.q, 1), (-1, dq, 2), (1, dq, 0), (-1, rep.p, 0))
    return FlRep(l + 1, p, q)


# -- exact series ---------------------------------------------------------------


def _series_div(num: Sequence[Fraction], den: Sequence[Fraction], n: int) -> list[Fraction]:
    out: list[Fraction] = []
    for k in range(n):
        acc = num[k] if k < len(num) else Fraction(0)
        for j in range(1, min(k, len(den) - 1) + 1):
            acc -= den[j] * out[k - j]
        out.append(acc / den[0])
    return out


def _build_series(l_max: int, order: int = SERIES_ORDER) -> list[FlSeries]:
    keep = order // 2 + 1
    # each ladder step costs one power of rho**2, so f_1 starts longer
    n = keep + l_max - 1
    sinh_over_rho = [Fraction(1, math.factorial(2 * k + 1)) for k in range(n)]
    a = _series_div([Fraction(1)], sinh_over_rho, n)
    out = [FlSeries(1, tuple(a[:keep]))]
    for level in range(2, l_max + 1):
        da = [2 * (k + 1) * a[k + 1] for k in range(len(a) - 1)]
        a = [-c for c in _series_div(da, sinh_over_rho, len(da))]
        out.append(FlSeries(level, tuple(a[:keep])))
    return out


# -- the table --------------------------------------------------------------------


class FlTable(Sequence):
    """Immutable table of ``FlRep`` for levels 1..l_max plus their series.

    Indexing is zero-based like any sequence (``table[0]`` is level 1).
    """

    def __init__(self, reps: Sequence[FlRep], series: Sequence[FlSeries]):
        self._reps = tuple(reps)
        self.series = tuple(series)
        # float copies for the fast path; u = 1/sigma, so the sigma coefficients
        # read lowest-first are the u coefficients read highest-first
        self._p_u = [np.array([float(c) for c in r.p[::-1]]) for r in self._reps]
        self._q_u = [np.array([float(c) for c in r.q[::-1]] or [0.0]) for r in self._reps]
        self._series_f = [np.array([float(c) for c in s.coeffs]) for s in self.series]
        self._exact = lru_cache(maxsize=1 << 16)(self._g_exact)

    def __len__(self) -> int:
        return len(self._reps)

    def __getitem__(self, i):
        return self._reps[i]

    @property
    def l_max(self) -> int:
        return len(self._reps)

    def _check_level(self, l: int) -> None:
        if not 1 <= l <= len(self._reps):
            raise LevelOutOfRange(f"ladder level {l} outside 1..{len(self._reps)}")

    def _g_exact(self, l: int, rho: float) -> float:
        rep = self._reps[l - 1]
        prec = 53 + _GUARD_BITS
        deg_bits = max(len(rep.p), 1).bit_length() + 2
        while prec <= _MAX_PREC:
            with gmpy2.context(gmpy2.get_context(), precision=prec):
                r = gmpy2.mpfr(rho)
                th = gmpy2.tanh(r)
                u = 1 / gmpy2.cosh(r)
                num = r * _horner(rep.p, u) + th * _horner(rep.q, u)
                mag = r * _horner(rep.p, u, absolute=True) + th * _horner(rep.q, u, absolute=True)
                if num > 0:
                    lost = float(gmpy2.log2(mag / num))
                    if prec - lost - deg_bits >= 53 + _GUARD_BITS // 2:
                        return float(num / th ** (2 * l - 1))
                    prec = int(lost) + deg_bits + 53 + _GUARD_BITS
                else:
                    prec *= 2
        raise ArithmeticError(f"f_{l}({rho}) did not resolve within {_MAX_PREC} bits")

    def scaled(self, rho, levels: int | None = None):
        """Return ``(g, log_cosh)`` with ``g[l-1] = f_l(rho) * cosh(rho)**l``.

        ``rho`` may be a scalar or an array; for an array ``g`` has shape
        ``(levels, len(rho))``.
        """
        levels = self.l_max if levels is None else int(levels)
        self._check_level(max(levels, 1))
        r_in = np.asarray(rho, dtype=float)
        r = np.atleast_1d(r_in).ravel()
        if np.any(~np.isfinite(r)) or np.any(r < 0):
            raise ValueError("rho must be finite and nonnegative")
        lam = log_cosh(r)
        g = np.empty((levels, r.size))

        small = r < SERIES_SWITCH
        if small.any():
            x = r[small] ** 2
            for l in range(1, levels + 1):
                g[l - 1, small] = npoly.polyval(x, self._series_f[l - 1]) * np.exp(l * lam[small])

        big = ~small
        if big.any():
            idx = np.nonzero(big)[0]
            rb = r[idx]
            u = np.exp(-lam[idx])
            th = np.tanh(rb)
            for l in range(1, levels + 1):
                pc, qc = self._p_u[l - 1], self._q_u[l - 1]
                num = rb * npoly.polyval(u, pc) + th * npoly.polyval(u, qc)
                mag = rb * npoly.polyval(u, np.abs(pc)) + th * npoly.polyval(u, np.abs(qc))
                ok = (num > 0) & (mag <= _FAST_KAPPA * num)
                with np.errstate(divide="ignore", invalid="ignore"):
                    g[l - 1, idx] = num / th ** (2 * l - 1)
                for k in np.nonzero(~ok)[0]:
                    g[l - 1, idx[k]] = self._exact(l, float(rb[k]))

        if r_in.ndim == 0:
            return g[:, 0], float(lam[0])
        return g, lam


def _horner(coeffs: Sequence[int], u, absolute: bool = False):
    acc = gmpy2.mpfr(0)
    for c in coeffs:
        acc = acc * u + (abs(c) if absolute else c)
    return acc


def build_fl_table(l_max: int) -> FlTable:
    """Construct the exact ladder for levels ``1..l_max``."""
    if l_max < 1:
        raise ValueError("l_max must be at least 1")
    reps = [FlRep(1, (1,), ())]
    while len(reps) < l_max:
        reps.append(_next_rep(reps[-1]))
    return FlTable(reps, _build_series(l_max))


_default_lock = threading.Lock()
_default: FlTable | None = None


def default_table() -> FlTable:
    """Shared table with ``L_MAX`` levels, built once per process."""
    global _default
    with _default_lock:
        if _default is None:
            _default = build_fl_table(L_MAX)
        return _default


# -- elementary helpers -----------------------------------------------------------


def log_cosh(r):
    r = np.abs(np.asarray(r, dtype=float))
    return r + np.log1p(np.exp(-2.0 * r)) - math.log(2.0)


def log_sinh(r):
    """log(sinh r) for r > 0 without overflow."""
    r = np.asarray(r, dtype=float)
    return r + np.log(-np.expm1(-2.0 * r)) - math.log(2.0)


# -- public evaluation ------------------------------------------------------------


def eval_fl(table: FlTable, l: int, rho: float) -> float:
    """f_l(rho) in double precision (may underflow to 0 for large ``l * rho``)."""
    return math.exp(log_fl(table, l, rho))


def log_fl(table: FlTable, l: int, rho: float) -> float:
    table._check_level(l)
    if rho < 0:
        raise ValueError("rho must be nonnegative")
    g, lam = table.scaled(float(rho), l)
    return math.log(g[l - 1]) - l * lam


def eval_series(table: FlTable, l: int, rho: float) -> float:
    table._check_level(l)
    return table.series[l - 1](rho)


def eval_closed_form(table: FlTable, l: int, rho: float) -> float:
    """Closed form only (no series switch), resolved in extended precision."""
    table._check_level(l)
    if rho <= 0:
        raise ValueError("the closed form needs rho > 0")
    return table._exact(l, float(rho)) * math.exp(-l * float(log_cosh(rho)))


def dump_table(table: FlTable) -> list[dict]:
    return [rep.to_dict() for rep in table]


# -- checks -----------------------------------------------------------------------


def check_fl_logconvex(table: FlTable, l: int, rho_grid, tol_rel: float = 1e-12) -> VerificationReport:
    """f_{l+2} f_l - f_{l+1}^2 >= -tol_rel * f_{l+1}^2 on ``rho_grid``.

    Since d f_{l+1}/d sigma = -f_{l+2}, the left side is
    f_l^2 * d/dsigma(-f_{l+1}/f_l).  Evaluated on the scaled ladder, which
    multiplies both sides by cosh(rho)**(2l+2).  ``worst_value`` is the
    smallest normalised value (lhs / f_{l+1}^2).
    """
    table._check_level(l + 2)
    rho = np.asarray(rho_grid, dtype=float)
    g, _ = table.scaled(rho, l + 2)
    lhs = g[l + 1] * g[l - 1] - g[l] ** 2
    norm = lhs / g[l] ** 2
    k = int(np.argmin(norm))
    return VerificationReport(
        check_name=f"fl_logconvex_l{l}",
        grid={"rho": axis(rho), "l": levels_axis([l])},
        worst_value=float(norm[k]),
        worst_location={"l": l, "rho": float(rho[k])},
        tolerance=tol_rel,
        passed=bool(np.all(norm >= -tol_rel)),
    )


def check_fl_monotone(table: FlTable, levels: Sequence[int], rho_grid) -> VerificationReport:
    """Every f_l positive and strictly decreasing along an increasing ``rho_grid``.

    Compared in the log domain so that levels which underflow double
    precision are still resolved.  ``worst_value`` is the largest step
    log f_l(rho_{k+1}) - log f_l(rho_k) (must be < 0).
    """
    rho = np.asarray(rho_grid, dtype=float)
    if np.any(np.diff(rho) <= 0):
        raise ValueError("rho_grid must be strictly increasing")
    top = max(levels)
    g, lam = table.scaled(rho, top)
    worst, where, ok = -math.inf, None, True
    for l in levels:
        with np.errstate(divide="ignore", invalid="ignore"):
            logf = np.log(g[l - 1]) - l * lam
        if not np.all(np.isfinite(logf)) or np.any(g[l - 1] <= 0):
            ok = False
        steps = np.diff(logf)
        k = int(np.nanargmax(steps))
        if steps[k] > worst:
            worst, where = float(steps[k]), {"l": l, "rho": float(rho[k + 1])}
        ok = ok and bool(np.all(steps < 0))
    return VerificationReport(
        check_name="ladder_positive_decreasing",
        grid={"rho": axis(rho), "l": levels_axis(levels)},
        worst_value=worst,
        worst_location=where,
        tolerance=0.0,
        passed=ok,
    )
