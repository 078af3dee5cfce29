"""Legendre functions of real degree on (-1, 1).

P_nu is summed from its Gauss hypergeometric series
P_nu(z) = 2F1(-nu, nu + 1; 1; (1 - z)/2). Derivatives come from the
term-wise differentiated series. The cone angle of the axisymmetric
pointed bubble is the unique root of P'_{3/2} in (-1, 0).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

MAX_TERMS = 100_000
REL_TOL = 1e-16


class LegendreDomainError(ValueError):
    """Argument outside the open interval (-1, 1)."""


class SeriesConvergenceError(ArithmeticError):
    """Hypergeometric series did not meet its truncation bound."""


class BracketError(ArithmeticError):
    """No sign change of P'_{3/2} was found in (-1, 0)."""


class PoleError(ZeroDivisionError):
    """Denominator of the w-ratio is too close to zero."""


@dataclass(frozen=True)
class LegendreEval:
    degree: float
    argument: float
    value: float
    derivative: float

    def ode_residual(self, second: float) -> float:
        z, nu = self.argument, self.degree
        return (1 - z * z) * second - 2 * z * self.derivative + nu * (nu + 1) * self.value


@dataclass(frozen=True)
class ConeAngle:
    """Root z* of P'_{3/2} and the matching polar angle theta* = arccos z*."""

    z_star: float
    theta_star: float

    @property
    def degrees(self) -> float:
        return math.degrees(self.theta_star)


def _check(nu: float, z: float) -> None:
    if not (-1.0 < z < 1.0):
        raise LegendreDomainError(f"z={z!r} outside (-1, 1)")
    if nu < 0:
        raise ValueError(f"degree must be >= 0, got {nu!r}")


def _series(nu: float, z: float, strict: bool = True) -> tuple[float, float, float]:
    """Return (P, dP/dz, d2P/dz2) from the 2F1 series in t = (1 - z)/2.

    With c_k = (-nu)_k (nu+1)_k / (k!)^2 the three sums are
    sum c_k t^k, sum k c_k t^(k-1) and sum k(k-1) c_k t^(k-2). Once k > nu
    the coefficient ratio is below 1 in modulus, so each tail is bounded by
    a geometric series in t; summation stops when every tail bound drops
    below REL_TOL times its partial sum.
    """
    t = 0.5 * (1.0 - z)
    a, b = -nu, nu + 1.0
    g = 1.0 / (1.0 - t)
    w0, w1 = 1.0, 0.0  # c_k t^k and c_k t^(k-1)
    s0, s1, s2 = 1.0, 0.0, 0.0
    k = 0
    while True:
        rho = (a + k) * (b + k) / ((k + 1.0) * (k + 1.0))
        w2 = rho * w1  # c_{k+1} t^(k-1)
        w1 = rho * w0
        w0 = w1 * t
        k += 1
        s0 += w0
        s1 += k * w1
        s2 += k * (k - 1) * w2
        if w1 == 0.0:
            break  # integer degree: the polynomial terminated
        if k > nu + 1:
            grow = g * (1.0 + 2.0 * g / k)
            if (
                abs(w0) * grow <= REL_TOL * abs(s0)
                and k * abs(w1) * grow <= REL_TOL * max(abs(s1), 1e-300)
                and k * k * abs(w2) * grow * (1.0 + 2.0 * g / k) <= REL_TOL * max(abs(s2), 1e-300)
            ):
                break
        if k >= MAX_TERMS:
            if strict:
                raise SeriesConvergenceError(
                    f"series for P_{nu}({z}) not converged after {MAX_TERMS} terms"
                )
            break
    return s0, -0.5 * s1, 0.25 * s2


def _series_array(
    nu: float, z: np.ndarray, strict: bool = True
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Vectorised form of `_series` with the same stopping rule per entry.

    Converged entries are retired from the working set. With strict=False,
    entries still live at MAX_TERMS keep their partial sums; for nu = 3/2
    the derivative terms share one sign from k = 2 on, so truncation keeps
    the sign of P' even where the value is inaccurate (z close to -1).
    """
    n = z.size
    out = np.empty((3, n))
    idx = np.arange(n)
    t = 0.5 * (1.0 - z)
    a, b = -nu, nu + 1.0
    g = 1.0 / (1.0 - t)
    w0 = np.ones(n)
    w1 = np.zeros(n)
    s0, s1, s2 = w0.copy(), w1.copy(), w1.copy()
    k = 0
    while idx.size:
        rho = (a + k) * (b + k) / ((k + 1.0) * (k + 1.0))
        w2 = rho * w1
        w1 = rho * w0
        w0 = w1 * t
        k += 1
        s0 += w0
        s1 += k * w1
        s2 += k * (k - 1) * w2
        if rho == 0.0:
            done = np.ones(idx.size, dtype=bool)
        elif k > nu + 1:
            grow = g * (1.0 + 2.0 * g / k)
            done = (
                (np.abs(w0) * grow <= REL_TOL * np.abs(s0))
                & (k * np.abs(w1) * grow <= REL_TOL * np.maximum(np.abs(s1), 1e-300))
                & (k * k * np.abs(w2) * grow * (1.0 + 2.0 * g / k)
                   <= REL_TOL * np.maximum(np.abs(s2), 1e-300))
            )
        else:
            continue
        if k >= MAX_TERMS and not done.all():
            if strict:
                raise SeriesConvergenceError(
                    f"series for P_{nu} not converged after {MAX_TERMS} terms"
                )
            done[:] = True
        if done.any():
            out[0, idx[done]] = s0[done]
            out[1, idx[done]] = s1[done]
            out[2, idx[done]] = s2[done]
            keep = ~done
            idx, t, g = idx[keep], t[keep], g[keep]
            w0, w1 = w0[keep], w1[keep]
            s0, s1, s2 = s0[keep], s1[keep], s2[keep]
    return out[0], -0.5 * out[1], 0.25 * out[2]


def _vectorize(nu, z, index, strict=True):
    if np.ndim(z) == 0:
        zf = float(z)
        _check(nu, zf)
        return _cached(float(nu), zf)[index]
    za = np.asarray(z, dtype=float)
    if za.size == 0:
        return np.zeros(za.shape)
    if not np.all((za > -1.0) & (za < 1.0)):
        raise LegendreDomainError("arguments outside (-1, 1)")
    if nu < 0:
        raise ValueError(f"degree must be >= 0, got {nu!r}")
    flat = za.ravel()
    uniq, inv = np.unique(flat, return_inverse=True)
    vals = _series_array(float(nu), uniq, strict)[index]
    return vals[inv].reshape(za.shape)


@lru_cache(maxsize=4096)
def _cached(nu: float, z: float) -> tuple[float, float, float]:
    return _series(nu, z)


def legendre_p(nu, z):
    """Legendre function of the first kind P_nu(z) for -1 < z < 1."""
    return _vectorize(nu, z, 0)


def legendre_p_prime(nu, z, strict: bool = True):
    """dP_nu/dz from the differentiated series.

    strict=False only matters for arrays reaching very close to z = -1 and
    returns truncated sums there instead of raising.
    """
    return _vectorize(nu, z, 1, strict)


def legendre_p_second(nu, z):
    """d2P_nu/dz2 from the twice differentiated series."""
    return _vectorize(nu, z, 2)


def legendre_eval(nu: float, z: float) -> LegendreEval:
    _check(nu, z)
    p, dp, _ = _cached(float(nu), float(z))
    return LegendreEval(float(nu), float(z), p, dp)


def legendre_q1(z):
    """Second-kind Legendre function of degree one, (z/2) log((1+z)/(1-z)) - 1."""
    za = np.asarray(z, dtype=float)
    if np.any(np.abs(za) >= 1.0):
        raise LegendreDomainError("legendre_q1 needs |z| < 1")
    out = 0.5 * za * (np.log1p(za) - np.log1p(-za)) - 1.0
    return float(out) if out.ndim == 0 else out


def legendre_q1_prime(z):
    za = np.asarray(z, dtype=float)
    if np.any(np.abs(za) >= 1.0):
        raise LegendreDomainError("legendre_q1 needs |z| < 1")
    out = 0.5 * (np.log1p(za) - np.log1p(-za)) + za / (1.0 - za * za)
    return float(out) if out.ndim == 0 else out


def _dp32(z: float) -> float:
    return _cached(1.5, z)[1]


def find_theta_star(tolerance: float = 1e-14, scan_points: int = 1000) -> ConeAngle:
    """Locate the root z* of P'_{3/2} in (-1, 0) by scan and bisection.

    The scan runs over (-0.95, 0) where the series is cheap; a missing sign
    change there means the series itself is broken.
    """
    if not tolerance > 0:
        raise ValueError("tolerance must be positive")
    zs = np.linspace(-0.95, 0.0, scan_points)
    vals = legendre_p_prime(1.5, zs)
    lo = hi = None
    for i in range(scan_points - 1):
        if vals[i] < 0.0 <= vals[i + 1]:
            lo, hi = float(zs[i]), float(zs[i + 1])
            break
    if lo is None:
        raise BracketError("P'_{3/2} has no sign change on (-0.95, 0)")
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if mid in (lo, hi):
            break
        if _dp32(mid) < 0.0:
            lo = mid
        else:
            hi = mid
        if hi - lo <= tolerance and min(abs(_dp32(lo)), abs(_dp32(hi))) <= tolerance:
            break
    z_star = lo if abs(_dp32(lo)) <= abs(_dp32(hi)) else hi
    if hi - lo > tolerance or abs(_dp32(z_star)) > tolerance:
        raise BracketError(f"bisection stalled at width {hi - lo:.3e}")
    return ConeAngle(z_star=z_star, theta_star=math.acos(z_star))


@lru_cache(maxsize=1)
def cone_angle() -> ConeAngle:
    """Cached cone angle at the default tolerance."""
    return find_theta_star()


def w_ratio(z: float, pole_tol: float = 1e-10) -> float:
    """P'_{3/2}(-z) / P'_{3/2}(z)."""
    _check(1.5, z)
    den = _dp32(float(z))
    if abs(den) < pole_tol:
        raise PoleError(f"P'_{{3/2}}({z}) = {den:.3e} is too close to zero")
    return _dp32(-float(z)) / den


def wronskian_scaled(nu: float, z: float) -> float:
    """(1 - z^2) [P(z) d/dz P(-z) - P(-z) d/dz P(z)]."""
    p, dp, _ = _cached(float(nu), float(z))
    pm, dpm, _ = _cached(float(nu), -float(z))
    return (1.0 - z * z) * (p * (-dpm) - pm * dp)
