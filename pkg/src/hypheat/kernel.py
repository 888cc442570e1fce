"""Log-domain heat kernel K_n on odd-dimensional hyperbolic space.

    K_n(t, rho) = (4 pi t)^(-n/2) exp(-(n-1)^2 t / 4) exp(-rho^2 / (4t)) alpha_n(t, rho)

All sigma- and t-derivatives come from the exact expansions in
:mod:`hypheat.alpha_engine`; nothing here differentiates numerically.  The
alpha factors are evaluated on the scaled ladder ``g_l = f_l cosh(rho)**l``,
so ratios such as ``alpha'/alpha`` never see the underflow of the raw values.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import gmpy2
import numpy as np
from numpy.polynomial import polynomial as npoly
from scipy import integrate

from .alpha_engine import L_MAX, UsageError, build_alpha, diff_sigma, diff_t
from .radial_basis import default_table, log_sinh

LOG_4PI = math.log(4.0 * math.pi)


class DomainError(ValueError):
    """Argument outside the kernel's domain (t <= 0, rho < 0, ...)."""


class QuadratureError(RuntimeError):
    """A quadrature did not reach its requested accuracy."""


@dataclass(frozen=True)
class KernelEval:
    """K_n at one point, with alpha and its exact derivatives.

    The raw ``alpha``/derivative fields may underflow to 0 far from the pole;
    the ``*_ratio`` fields and ``log_alpha`` do not.
    """

    n: int
    t: float
    rho: float
    logK: float
    alpha: float
    dalpha_dsigma: float
    d2alpha_dsigma2: float
    dalpha_dt: float
    log_alpha: float
    dalpha_ratio: float  # alpha' / alpha
    d2alpha_ratio: float  # alpha'' / alpha
    dt_ratio: float  # d_t alpha / alpha

    @property
    def K(self) -> float:
        return math.exp(self.logK)


def _check_n(n: int) -> int:
    if not isinstance(n, (int, np.integer)) or n < 1 or n % 2 == 0:
        raise UsageError(f"only odd n >= 1 is supported, got {n!r}")
    if n > 2 * (L_MAX - 2) + 1:
        raise UsageError(f"n = {n} exceeds the ladder budget (two sigma-derivatives need level m + 2)")
    return int(n)


def _check_t(t) -> None:
    if np.any(np.asarray(t) <= 0) or not np.all(np.isfinite(t)):
        raise DomainError("t must be positive and finite")


@lru_cache(maxsize=None)
def _expansions(n: int):
    a = build_alpha(n)
    da = diff_sigma(a)
    d2a = diff_sigma(da)
    dta = diff_t(a)
    m = a.m
    for e, w in ((a, m), (da, m + 1), (d2a, m + 2), (dta, m)):
        if len(e) and e.uniform_weight() != w:
            raise AssertionError(f"weight bookkeeping broken for n = {n}")
    return a, da, d2a, dta


@dataclass(frozen=True)
class _Jet:
    """t-polynomial coefficients of alpha and its derivatives at one rho (scaled ladder)."""

    m: int
    rho: float
    lam: float  # log cosh rho
    g2: float  # f_2 cosh^2 rho
    c0: np.ndarray
    c1: np.ndarray
    c2: np.ndarray
    ct: np.ndarray

    def at(self, t):
        """Return (alpha~, alpha~', alpha~'', d_t alpha~) at ``t`` (scaled)."""
        return tuple(npoly.polyval(t, c) for c in (self.c0, self.c1, self.c2, self.ct))


@lru_cache(maxsize=1 << 14)
def _jet(n: int, rho: float) -> _Jet:
    a, da, d2a, dta = _expansions(n)
    levels = max(a.m + 2, 2)
    g, lam = default_table().scaled(rho, levels)
    return _Jet(
        m=a.m, rho=rho, lam=lam, g2=float(g[1]),
        c0=a.t_coefficients(g), c1=da.t_coefficients(g),
        c2=d2a.t_coefficients(g), ct=dta.t_coefficients(g),
    )


def _prefactor(n: int, t, rho):
    return -0.5 * n * (LOG_4PI + np.log(t)) - 0.25 * (n - 1) ** 2 * t - rho**2 / (4.0 * t)


def log_kernel(n: int, t: float, rho: float) -> KernelEval:
    n = _check_n(n)
    _check_t(t)
    if rho < 0 or not math.isfinite(rho):
        raise DomainError("rho must be finite and nonnegative")
    t, rho = float(t), float(rho)
    jet = _jet(n, rho)
    a0, a1, a2, at = jet.at(t)
    m, lam = jet.m, jet.lam
    log_alpha = math.log(a0) - m * lam
    return KernelEval(
        n=n, t=t, rho=rho,
        logK=float(_prefactor(n, t, rho)) + log_alpha,
        alpha=math.exp(log_alpha),
        dalpha_dsigma=float(a1 * math.exp(-(m + 1) * lam)),
        d2alpha_dsigma2=float(a2 * math.exp(-(m + 2) * lam)),
        dalpha_dt=float(at * math.exp(-m * lam)),
        log_alpha=log_alpha,
        dalpha_ratio=float(a1 / a0 * math.exp(-lam)),
        d2alpha_ratio=float(a2 / a0 * math.exp(-2 * lam)),
        dt_ratio=float(at / a0),
    )


def log_kernel_value(n: int, t: float, rho):
    """log K_n(t, rho) only, vectorised over ``rho``."""
    n = _check_n(n)
    _check_t(t)
    a = build_alpha(n)
    r = np.asarray(rho, dtype=float)
    g, lam = default_table().scaled(np.atleast_1d(r), max(a.m, 1))
    alpha_s = npoly.polyval(float(t), a.t_coefficients(g))
    out = _prefactor(n, float(t), np.atleast_1d(r)) + np.log(alpha_s) - a.m * lam
    return out.reshape(r.shape)[()] if r.ndim == 0 else out


# -- superconvexity -----------------------------------------------------------------


def margin_parts(n: int, t, rho: float):
    """The two summands of d^2/dsigma^2 log K_n.

    ``(rho coth rho - 1) / (2t sinh^2 rho)`` equals ``f_2 / (2t)``; the second
    part is ``d^2/dsigma^2 log alpha_n``.  Vectorised over ``t``.
    """
    n = _check_n(n)
    _check_t(t)
    if not rho > 0:
        raise DomainError("the superconvexity margin is defined for rho > 0")
    jet = _jet(n, float(rho))
    a0, a1, a2, _ = jet.at(np.asarray(t, dtype=float))
    scale = math.exp(-2.0 * jet.lam)
    part1 = jet.g2 * scale / (2.0 * np.asarray(t, dtype=float))
    r1 = a1 / a0
    part2 = (a2 / a0 - r1 * r1) * scale
    return part1, part2


def superconvexity_margin(n: int, t: float, rho: float) -> float:
    """d^2/dsigma^2 log K_n(t, rho), sigma = cosh rho (expected positive everywhere)."""
    part1, part2 = margin_parts(n, t, rho)
    return part1 + part2


_RHO_FORM_BITS = 256


def margin_rho_form(n: int, t: float, rho: float) -> float:
    """d^2_rho log K - coth(rho) d_rho log K, assembled from rho-derivatives.

    The rho-derivatives are built with d/drho = sinh(rho) d/dsigma from the
    alpha ratios and combined in extended precision, because the combination
    cancels like ``(rho coth rho - 1)`` for small rho.
    """
    n = _check_n(n)
    _check_t(t)
    if not rho > 0:
        raise DomainError("the rho form is defined for rho > 0")
    jet = _jet(n, float(rho))
    a0, a1, a2, _ = jet.at(float(t))
    with gmpy2.context(gmpy2.get_context(), precision=_RHO_FORM_BITS):
        r = gmpy2.mpfr(float(rho))
        tt = gmpy2.mpfr(float(t))
        e = gmpy2.exp(-gmpy2.mpfr(jet.lam))
        r1 = gmpy2.mpfr(float(a1 / a0)) * e
        r2 = gmpy2.mpfr(float(a2 / a0)) * e * e
        sh, ch = gmpy2.sinh(r), gmpy2.cosh(r)
        d1 = -r / (2 * tt) + sh * r1
        d2 = -1 / (2 * tt) + ch * r1 + sh * sh * (r2 - r1 * r1)
        return float(d2 - ch / sh * d1)


# -- heat equation --------------------------------------------------------------------


def heat_residual(n: int, t, rho: float):
    """Relative residual of (d_t - Laplacian) K_n, all derivatives analytic.

    Everything is divided by K first (it is positive), which leaves the ratio
    unchanged.  Vectorised over ``t``.
    """
    n = _check_n(n)
    _check_t(t)
    if not rho > 0:
        raise DomainError("heat_residual needs rho > 0")
    t = np.asarray(t, dtype=float)
    jet = _jet(n, float(rho))
    a0, a1, a2, at = jet.at(t)
    r1 = a1 / a0  # scaled: true ratio is r1 / cosh rho
    q = a2 / a0 - r1 * r1
    th = math.tanh(rho)
    dt_log = -n / (2 * t) - 0.25 * (n - 1) ** 2 + rho**2 / (4 * t * t) + at / a0
    d1 = -rho / (2 * t) + th * r1
    d2_log = -1 / (2 * t) + r1 + th * th * q
    lap = d2_log + d1 * d1 + (n - 1) / th * d1
    res = dt_log - lap
    return np.abs(res) / (np.abs(dt_log) + np.abs(lap) + 1e-300)


# -- mass and quadrature ------------------------------------------------------------------


def log_sphere_area(k: int) -> float:
    """log of the area of the unit k-sphere, 2 pi^((k+1)/2) / Gamma((k+1)/2)."""
    return math.log(2.0) + 0.5 * (k + 1) * math.log(math.pi) - math.lgamma(0.5 * (k + 1))


def _log_radial_density(n: int, t: float, rho):
    rho = np.asarray(rho, dtype=float)
    out = log_kernel_value(n, t, rho) + log_sphere_area(n - 1)
    if n > 1:
        with np.errstate(divide="ignore"):
            out = out + (n - 1) * np.where(rho > 0, log_sinh(np.where(rho > 0, rho, 1.0)), -np.inf)
    return out


_TAIL = math.log(1e-18)


def _rho_max(n: int, t: float) -> float:
    # alpha_n(t, rho) <= alpha_n(t, 0) because every f_l decreases
    a = build_alpha(n)
    g0, _ = default_table().scaled(0.0, max(a.m, 1))
    log_alpha0 = math.log(float(npoly.polyval(t, a.t_coefficients(g0))))

    def bound(r):
        return (_prefactor(n, t, r) + log_alpha0 + log_sphere_area(n - 1)
                + (n - 1) * float(log_sinh(r)))

    r = max(1.0, (n - 1) * t, 2.0 * math.sqrt(t))
    while bound(r) >= _TAIL:
        r *= 1.25
    return r


def _integrate_radial(n: int, t: float, lo: float, hi: float, epsrel: float) -> tuple[float, float]:
    grid = np.linspace(lo, hi, 801)
    logd = _log_radial_density(n, t, grid)
    k = int(np.argmax(logd))
    log_peak = float(logd[k])
    # integrate exp(logd - log_peak) so the integrand is O(1) at its peak
    width = math.sqrt(2.0 * t)
    pts = sorted({min(max(grid[k] + c * width, lo), hi) for c in (-8, -3, -1, 0, 1, 3, 8)} - {lo, hi})

    def f(r):
        return math.exp(float(_log_radial_density(n, t, r)) - log_peak)

    val, err = integrate.quad(f, lo, hi, points=pts or None, limit=400, epsabs=0.0, epsrel=epsrel)
    return val * math.exp(log_peak), err * math.exp(log_peak)


def normalization(n: int, t: float, epsrel: float = 1e-12, max_err: float = 1e-10) -> float:
    """Total mass  int_0^inf K_n(t, rho) |S^{n-1}| sinh^{n-1} rho d rho  (should be 1).

    For n = 1 the unit 0-sphere has two points, so this is the two-sided
    integral over the line.
    """
    n = _check_n(n)
    _check_t(t)
    val, err = _integrate_radial(n, float(t), 0.0, _rho_max(n, float(t)), epsrel)
    if not math.isfinite(val) or err > max_err * max(1.0, abs(val)):
        raise QuadratureError(f"normalization(n={n}, t={t}) error estimate {err:.3g}")
    return val


def tail_mass(n: int, t: float, rho0: float, epsrel: float = 1e-10) -> float:
    """Mass of K_n(t, .) outside the geodesic ball of radius ``rho0``."""
    n = _check_n(n)
    _check_t(t)
    hi = _rho_max(n, float(t))
    if rho0 >= hi:
        return 0.0
    return _integrate_radial(n, float(t), float(rho0), hi, epsrel)[0]


# -- Chapman-Kolmogorov ------------------------------------------------------------


@lru_cache(maxsize=8)
def gauss_legendre(order: int):
    return np.polynomial.legendre.leggauss(order)


def law_of_cosines(a: float, b: float, theta):
    """Side opposite ``theta`` in a hyperbolic triangle with sides ``a``, ``b``.

    Half-angle form: sinh^2(d/2) = sinh^2((a-b)/2) + sinh a sinh b sin^2(theta/2),
    which avoids the cancellation in cosh a cosh b - sinh a sinh b cos theta.
    """
    h = math.sinh(0.5 * (a - b)) ** 2 + math.sinh(a) * math.sinh(b) * np.sin(0.5 * np.asarray(theta)) ** 2
    return 2.0 * np.arcsinh(np.sqrt(h))


def angular_nodes(a: float, b: float, tau: float, order: int, drop: float = 60.0):
    """Gauss-Legendre nodes on [0, pi] for integrands peaked at theta = 0.

    The integrand is assumed to carry exp(-d^2 / (4 tau)) where
    cosh d = cosh a cosh b - sinh a sinh b cos(theta).  When that factor has
    fallen by ``exp(-drop)`` before theta = pi, [0, pi] is split there and
    each panel gets ``order`` nodes.  Returns ``(theta, weights)``.
    """
    x, w = gauss_legendre(order)
    B = math.sinh(a) * math.sinh(b)
    edges = [0.0, math.pi]
    if B > 0:
        d0 = abs(a - b)
        dc = math.sqrt(d0 * d0 + 4.0 * tau * drop)
        # sin^2(theta_c / 2) from the half-angle law of cosines
        s2 = (math.sinh(0.5 * dc) ** 2 - math.sinh(0.5 * d0) ** 2) / B
        if s2 < 1.0:
            edges = [0.0, 2.0 * math.asin(math.sqrt(s2)), math.pi]
    theta, wt = [], []
    for lo, hi in zip(edges[:-1], edges[1:]):
        half = 0.5 * (hi - lo)
        theta.append(lo + half * (x + 1.0))
        wt.append(half * w)
    return np.concatenate(theta), np.concatenate(wt)


def semigroup_check(s: float, t: float, d01: float, n: int = 3, theta_order: int = 96) -> float:
    """Relative error of  int K(s, d(p0,q)) K(t, d(q,p1)) dV(q)  against  K(s+t, d01).

    Polar coordinates about p0 with p1 on the axis: cosh d(q,p1) =
    cosh rho cosh d01 - sinh rho sinh d01 cos theta (evaluated in half-angle
    form), dV = 2 pi sinh^2 rho
    sin theta d theta d rho.  Everything is divided by K(s+t, d01) in the log
    domain, so tiny kernels at large d01 are compared safely.
    """
    if n != 3:
        raise UsageError("semigroup_check is implemented for n = 3")
    _check_t([s, t])
    if d01 < 0:
        raise DomainError("d01 must be nonnegative")
    s, t, d01 = float(s), float(t), float(d01)
    log_target = float(log_kernel_value(3, s + t, d01))
    log_2pi = math.log(2.0 * math.pi)

    def inner(r: float) -> float:
        if r == 0.0:
            return 0.0
        theta, wt = angular_nodes(r, d01, t, theta_order)
        d = law_of_cosines(r, d01, theta)
        logv = log_kernel_value(3, t, d) + float(log_kernel_value(3, s, r)) - log_target
        logv += log_2pi + 2.0 * float(log_sinh(r))
        return float(np.sum(wt * np.sin(theta) * np.exp(logv)))

    spread = math.sqrt(s + t)
    hi = d01 + 10.0 + 20.0 * spread + 4.0 * (s + t)
    peak = d01 * s / (s + t)
    pts = sorted({p for p in (peak, peak + 2 * spread, max(peak - 2 * spread, 0.0)) if 0 < p < hi})
    val, err = integrate.quad(inner, 0.0, hi, points=pts or None, limit=400, epsabs=1e-14, epsrel=1e-11)
    if not math.isfinite(val) or err > 1e-8:
        raise QuadratureError(f"semigroup quadrature error estimate {err:.3g}")
    return abs(val - 1.0)


# -- proof intermediates --------------------------------------------------------------------


@dataclass(frozen=True)
class ProofIntermediates:
    """A = alpha alpha'' - alpha'^2 and B_{m,i} at one (t, rho).

    The ``*_scaled`` fields are multiplied by cosh(rho)**(2m+2) (sign
    preserving, never underflows); ``A``/``B`` are the raw values.  ``*_mag``
    hold the sums of absolute cross terms used for relative slack.  ``C_min``
    is the smallest C_{m,i,a,b} / |cross terms| over all pairs.
    """

    m: int
    t: float
    rho: float
    A: float
    B: tuple[float, ...]
    A_scaled: float
    B_scaled: tuple[float, ...]
    A_mag: float
    B_mag: tuple[float, ...]
    C_min: float
    log_scale: float


def substitution_parts(m: int, rho: float):
    """P_{m,i}, dP/dsigma and d^2P/dsigma^2 for every i, on the scaled ladder.

    Uses dP = sum a f^j (sum_s -j_s f_{s+1}/f_s) and
    d^2P = sum a f^j [(sum_s -j_s f_{s+1}/f_s)^2 + sum_s j_s (f_{s+2} f_s - f_{s+1}^2) / f_s^2].
    Returns three arrays indexed by i, scaled by cosh^m, cosh^(m+1), cosh^(m+2).
    """
    a = build_alpha(2 * m + 1)
    g, lam = default_table().scaled(float(rho), m + 2)
    P = np.zeros(max(m, 1))
    dP = np.zeros_like(P)
    d2P = np.zeros_like(P)
    for (i, mono), c in a.terms.items():
        v = float(c)
        D = E = 0.0
        for s, j in mono:
            v *= g[s - 1] ** j
            ratio = g[s] / g[s - 1]
            D -= j * ratio
            E += j * (g[s + 1] * g[s - 1] - g[s] ** 2) / g[s - 1] ** 2
        P[i] += v
        dP[i] += v * D
        d2P[i] += v * (D * D + E)
    return P, dP, d2P, lam


def b_values(m: int, rho: float):
    """B_{m,i} for i = 0..2m-2 on the scaled ladder (t-independent).

    Returns ``(B, B_mag, C_min, log_scale)``: scaled B values, the matching
    sums of absolute cross terms, and the smallest normalised C_{m,i,a,b},
    where C = P_a P''_b + P_b P''_a - 2 P'_a P'_b.
    """
    P, dP, d2P, lam = substitution_parts(m, rho)
    B, Bmag = [], []
    C_min = math.inf
    for i in range(2 * m - 1):
        acc = mag = 0.0
        for al in range(max(0, i - m + 1), min(i, m - 1) + 1):
            be = i - al
            acc += P[al] * d2P[be] - dP[al] * dP[be]
            mag += abs(P[al] * d2P[be]) + abs(dP[al] * dP[be])
            if al <= be:
                c = P[al] * d2P[be] + P[be] * d2P[al] - 2 * dP[al] * dP[be]
                cm = abs(P[al] * d2P[be]) + abs(P[be] * d2P[al]) + 2 * abs(dP[al] * dP[be])
                C_min = min(C_min, c / cm)
        B.append(float(acc))
        Bmag.append(float(mag))
    return np.array(B), np.array(Bmag), float(C_min), lam


def a_values(m: int, t, rho: float):
    """Scaled A = alpha alpha'' - alpha'^2 from the exact expansions, and |terms|."""
    jet = _jet(2 * m + 1, float(rho))
    a0, a1, a2, _ = jet.at(np.asarray(t, dtype=float))
    return a0 * a2 - a1 * a1, np.abs(a0 * a2) + a1 * a1


def proof_intermediates(m: int, t: float, rho: float) -> ProofIntermediates:
    if m < 1:
        raise UsageError("m must be >= 1")
    _check_n(2 * m + 1)
    _check_t(t)
    if not rho > 0:
        raise DomainError("rho must be positive")
    B, Bmag, C_min, lam = b_values(m, float(rho))
    A_s, A_mag = a_values(m, float(t), float(rho))
    down = math.exp(-(2 * m + 2) * lam)
    return ProofIntermediates(
        m=m, t=float(t), rho=float(rho),
        A=float(A_s) * down, B=tuple(float(b) * down for b in B),
        A_scaled=float(A_s), B_scaled=tuple(float(b) for b in B),
        A_mag=float(A_mag), B_mag=tuple(float(b) for b in Bmag),
        C_min=C_min, log_scale=lam,
    )
