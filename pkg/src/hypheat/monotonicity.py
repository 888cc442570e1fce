"""Weighted-volume monotonicity along exact mean curvature flows in hyperbolic space.

Geodesic n-spheres in H^{n+1} have mean curvature n coth r, so their radius
obeys r' = -n coth r, i.e. cosh r(t) = cosh r0 * exp(-n t).  Along such a flow

    F(t) = int_{Sigma_t} K_n(t0 - t, dist(p, p0)) dVol(p)

must be non-increasing, strictly for spheres.  Totally geodesic H^n through
p0 is static and gives F == 1, the equality case.

F underflows double precision once (t0 - t) is small, so everything is
carried as log F; slopes are judged on log F, which has the sign of dF/dt.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from .kernel import (
    _check_n,
    angular_nodes,
    law_of_cosines,
    log_kernel_value,
    log_sphere_area,
    normalization,
)
from .radial_basis import log_cosh, log_sinh
from .report import VerificationReport, axis

SCAN_GAP = 1e-4
RK4_FLOOR = 1e-3


class ExtinctFlow(ValueError):
    """The sphere has (or would have) shrunk to a point before the requested time."""


@dataclass(frozen=True)
class SphereFlowState:
    n: int
    r: float
    time: float


@dataclass(frozen=True)
class WeightedVolumeSample:
    time: float
    F: float
    dF_estimate: float
    log_F: float
    dlogF_estimate: float


def extinction_time(n: int, r0: float) -> float:
    return float(log_cosh(r0)) / n


def sphere_radius(n: int, r0: float, time: float) -> float:
    """Closed-form radius: log cosh r = log cosh r0 - n * time."""
    if n < 1 or r0 <= 0 or time < 0:
        raise ValueError("need n >= 1, r0 > 0, time >= 0")
    excess = float(log_cosh(r0)) - n * time
    if excess <= 0:
        raise ExtinctFlow(f"time {time} is past extinction {extinction_time(n, r0)}")
    # cosh r - 1 = expm1(excess) = 2 sinh^2(r/2)
    return 2.0 * math.asinh(math.sqrt(0.5 * math.expm1(excess)))


def sphere_state(n: int, r0: float, time: float) -> SphereFlowState:
    return SphereFlowState(n, sphere_radius(n, r0, time), time)


def rk4_sphere_radius(n: int, r0: float, time: float, step: float = 1e-4) -> float:
    """Classical RK4 on r' = -n coth r, used as an independent check."""
    if step <= 0:
        raise ValueError("step must be positive")
    if time >= extinction_time(n, r0):
        raise ExtinctFlow(f"time {time} is past extinction {extinction_time(n, r0)}")
    steps = max(1, math.ceil(time / step))
    h = time / steps

    def f(r):
        return -n / math.tanh(r)

    r = r0
    for _ in range(steps):
        k1 = f(r)
        k2 = f(r + 0.5 * h * k1)
        k3 = f(r + 0.5 * h * k2)
        k4 = f(r + h * k3)
        new = r + h / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
        if not math.isfinite(new) or new > r:
            raise ValueError(f"RK4 unstable at step {h}: radius increased")
        if new < RK4_FLOOR:
            raise ExtinctFlow("radius fell below the RK4 floor")
        r = new
    return r


# -- weighted volumes --------------------------------------------------------------------


def log_weighted_volume_centered(n: int, r: float, tau: float) -> float:
    n = _check_n(n)
    if r <= 0 or tau <= 0:
        raise ValueError("need r > 0 and tau > 0")
    return log_sphere_area(n) + n * float(log_sinh(r)) + float(log_kernel_value(n, tau, r))


def weighted_volume_centered(n: int, r: float, tau: float) -> float:
    """|S^n| sinh^n(r) K_n(tau, r): p0 at the sphere's centre."""
    return math.exp(log_weighted_volume_centered(n, r, tau))


def log_weighted_volume_offset(n: int, r: float, tau: float, d: float, order: int = 64) -> float:
    n = _check_n(n)
    if order < 8:
        raise ValueError("quadrature order must be at least 8")
    if r <= 0 or tau <= 0 or d < 0:
        raise ValueError("need r > 0, tau > 0, d >= 0")
    theta, w = angular_nodes(r, d, tau, order)
    rho = law_of_cosines(r, d, theta)
    logv = log_kernel_value(n, tau, rho) + (n - 1) * np.log(np.sin(theta))
    return log_sphere_area(n - 1) + n * float(log_sinh(r)) + float(logsumexp(logv, b=w))


def weighted_volume_offset(n: int, r: float, tau: float, d: float, order: int = 64) -> float:
    """int over the sphere of radius r about c of K_n(tau, dist(., p0)), dist(c, p0) = d.

    |S^{n-1}| sinh^n(r) int_0^pi K_n(tau, rho(theta)) sin^{n-1}(theta) dtheta with
    cosh rho = cosh d cosh r - sinh d sinh r cos theta, by Gauss-Legendre of
    ``order`` nodes per panel.
    """
    return math.exp(log_weighted_volume_offset(n, r, tau, d, order))


def monotonicity_scan(
    n: int,
    r0: float,
    t0: float,
    d: float = 0.0,
    samples: int = 200,
    order: int = 64,
    gap: float = SCAN_GAP,
) -> list[WeightedVolumeSample]:
    """Sample F on a uniform time grid in (0, min(t0, t*) - gap].

    Slopes are centred differences (one-sided at the two ends).
    """
    n = _check_n(n)
    if samples < 10:
        raise ValueError("samples must be at least 10")
    end = min(t0, extinction_time(n, r0)) - gap
    if end <= 0:
        raise ValueError("empty sampling window")
    times = np.linspace(0.0, end, samples + 1)[1:]
    logF = np.array([log_functional(n, r0, t0, float(tk), d, order) for tk in times])
    dlog = np.gradient(logF, times)
    out = []
    for t, lf, s in zip(times, logF, dlog):
        f = math.exp(lf)
        out.append(WeightedVolumeSample(float(t), f, f * float(s), float(lf), float(s)))
    return out


def log_functional(n: int, r0: float, t0: float, time: float, d: float = 0.0, order: int = 64) -> float:
    """log F(time) for the sphere flow started at radius r0, kernel centred at distance d."""
    if not time < t0:
        raise ValueError("need time < t0")
    r = sphere_radius(n, r0, time)
    if d == 0.0:
        return log_weighted_volume_centered(n, r, t0 - time)
    return log_weighted_volume_offset(n, r, t0 - time, d, order)


def scan_report(samples: list[WeightedVolumeSample], label: str) -> VerificationReport:
    """Strict decrease: every slope of log F < 0 and log F(t_{k+1}) < log F(t_k).

    ``worst_value`` is the largest slope of log F (must be negative).
    """
    times = np.array([s.time for s in samples])
    slopes = np.array([s.dlogF_estimate for s in samples])
    steps = np.diff([s.log_F for s in samples])
    k = int(np.argmax(slopes))
    ok = bool(np.all(slopes < 0) and np.all(steps < 0) and np.all(np.isfinite(slopes)))
    return VerificationReport(
        check_name=label,
        grid={"time": axis(times, "linear")},
        worst_value=float(slopes[k]),
        worst_location={"time": float(times[k])},
        tolerance=0.0,
        passed=ok,
    )


def geodesic_plane_functional(n: int, tau: float) -> float:
    """F for a totally geodesic H^n through p0: the kernel's total mass, == 1 for every tau."""
    return normalization(n, tau)


def samples_to_csv(samples: list[WeightedVolumeSample]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["time", "F", "dF_estimate"])
    for s in samples:
        w.writerow([f"{s.time:.16e}", f"{s.F:.16e}", f"{s.dF_estimate:.16e}"])
    return buf.getvalue()
