"""Distribution tails needed by the group comparisons.

The F tail goes through a regularized incomplete beta evaluated by a
modified-Lentz continued fraction. The studentized range tail is a double
integral: a fixed Gauss-Legendre rule over the normal variable inside an
adaptive quadrature over the scaled chi variable.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.integrate import quad
from scipy.special import ndtr

_TINY = 1e-300
_EPS = 1e-16


def _beta_cf(a: float, b: float, x: float, max_iter: int = 10000) -> float:
    qab, qap, qam = a + b, a + 1.0, a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    d = _TINY if abs(d) < _TINY else d
    d = 1.0 / d
    h = d
    for m in range(1, max_iter + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        d = _TINY if abs(d) < _TINY else d
        c = 1.0 + aa / c
        c = _TINY if abs(c) < _TINY else c
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        d = _TINY if abs(d) < _TINY else d
        c = 1.0 + aa / c
        c = _TINY if abs(c) < _TINY else c
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _EPS:
            return h
    raise ArithmeticError(f"incomplete beta continued fraction did not converge (a={a}, b={b}, x={x})")


def betainc_reg(a: float, b: float, x: float) -> float:
    """Regularized incomplete beta I_x(a, b)."""
    if a <= 0 or b <= 0:
        raise ValueError(f"shape parameters must be positive, got a={a}, b={b}")
    if not 0.0 <= x <= 1.0:
        raise ValueError(f"x must lie in [0, 1], got {x}")
    if x == 0.0 or x == 1.0:
        return x
    log_front = (
        math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b) + a * math.log(x) + b * math.log1p(-x)
    )
    front = math.exp(log_front)
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _beta_cf(a, b, x) / a
    return 1.0 - front * _beta_cf(b, a, 1.0 - x) / b


def f_sf(F: float, dfn: float, dfd: float) -> float:
    """Upper tail P(X > F) of the F distribution."""
    if F <= 0:
        return 1.0
    if math.isinf(F):
        return 0.0
    return betainc_reg(dfd / 2.0, dfn / 2.0, dfd / (dfd + dfn * F))


_GL_Z, _GL_W = np.polynomial.legendre.leggauss(400)


def _range_sf_known_sigma(w: np.ndarray, k: int) -> np.ndarray:
    """P(range of k standard normals > w), for an array of w."""
    w = np.atleast_1d(np.asarray(w, dtype=float))
    lo, hi = -9.0, 9.0
    z = 0.5 * (hi - lo) * _GL_Z + 0.5 * (hi + lo)
    wt = 0.5 * (hi - lo) * _GL_W
    phi = np.exp(-0.5 * z**2) / math.sqrt(2 * math.pi)
    Pz = ndtr(z)
    inner = Pz[None, :] - ndtr(z[None, :] - w[:, None])
    # 1 - W(w) = k * int phi(z) [Phi(z)^(k-1) - (Phi(z) - Phi(z-w))^(k-1)] dz
    integrand = phi * (Pz[None, :] ** (k - 1) - inner ** (k - 1))
    return np.clip(k * integrand @ wt, 0.0, 1.0)


def studentized_range_sf(q: float, k: int, df: float) -> float:
    """Upper tail of the studentized range for ``k`` means and ``df`` error DoF."""
    if k < 2:
        raise ValueError(f"need at least two groups, got k={k}")
    if df <= 0:
        raise ValueError(f"df must be positive, got {df}")
    if q <= 0:
        return 1.0
    if math.isinf(q):
        return 0.0
    if math.isinf(df) or df > 1e5:
        return float(_range_sf_known_sigma(q, k)[0])
    # density of s = sqrt(chi2_df / df)
    log_c = df / 2 * math.log(df) - math.lgamma(df / 2) - (df / 2 - 1) * math.log(2)

    def integrand(s):
        if s <= 0:
            return 0.0
        dens = math.exp(log_c + (df - 1) * math.log(s) - df * s * s / 2)
        return dens * float(_range_sf_known_sigma(q * s, k)[0])

    mode = math.sqrt((df - 1) / df) if df > 1 else 0.5
    spread = 1.0 / math.sqrt(2 * df)
    lo = max(0.0, mode - 40 * spread)
    hi = mode + 40 * spread + 5.0
    brk = sorted({max(lo, mode - 4 * spread), mode, mode + 4 * spread} - {lo, hi})
    total, _ = quad(integrand, lo, hi, points=brk, epsabs=1e-12, epsrel=1e-10, limit=400)
    return min(max(total, 0.0), 1.0)
