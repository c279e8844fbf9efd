"""Scalar special functions used by the closed-form performance expressions.

Everything here is real-valued, double precision, pure and deterministic.
The exponential integral E1 is the workhorse: it shows up (in scaled form
``exp(x)*E1(x)``) in every rate expression, and the upper incomplete gamma
of non-positive integer order drives the SER integrands.
"""

from __future__ import annotations

import math

EULER_GAMMA = 0.5772156649015329

_MAX_ITER = 400
_TINY = 1e-300


def exp_integral_e1(x: float) -> float:
    """E1(x) = integral of exp(-t)/t from x to infinity, for x > 0.

    Series below 1, modified Lentz continued fraction above. Relative
    error is at machine-precision level across [1e-8, 700]; beyond the
    exp underflow threshold the unscaled value underflows to 0.
    """
    if x <= 0.0:
        raise ValueError(f"exp_integral_e1 requires x > 0, got {x}")
    if x < 1.0:
        return _e1_series(x)
    return _e1_cf_scaled(x) * math.exp(-x)


def exp_integral_e1_scaled(x: float) -> float:
    """exp(x) * E1(x), finite and accurate for arbitrarily large x."""
    if x <= 0.0:
        raise ValueError(f"exp_integral_e1_scaled requires x > 0, got {x}")
    if x < 1.0:
        return math.exp(x) * _e1_series(x)
    return _e1_cf_scaled(x)


def _e1_series(x: float) -> float:
    # E1(x) = -gamma - ln x + sum_{n>=1} (-1)^(n+1) x^n / (n n!)
    total = -EULER_GAMMA - math.log(x)
    term = 1.0
    for n in range(1, _MAX_ITER):
        term *= -x / n
        contrib = -term / n
        total += contrib
        if abs(contrib) < 1e-18 * abs(total):
            return total
    raise RuntimeError("E1 series failed to converge")  # pragma: no cover


def _e1_cf_scaled(x: float) -> float:
    # Lentz evaluation of the continued fraction for exp(x)*E1(x):
    #   1/(x+1 - 1/(x+3 - 4/(x+5 - 9/(...))))
    b = x + 1.0
    c = 1.0 / _TINY
    d = 1.0 / b
    h = d
    for i in range(1, _MAX_ITER):
        a = -i * i
        b += 2.0
        d = a * d + b
        if abs(d) < _TINY:
            d = _TINY
        c = b + a / c
        if abs(c) < _TINY:
            c = _TINY
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < 1e-16:
            return h
    raise RuntimeError("E1 continued fraction failed to converge")  # pragma: no cover


def upper_incomplete_gamma_int(a: int, x: float) -> float:
    """Gamma(a, x) for integer a <= 1 and x > 0."""
    return upper_incomplete_gamma_int_scaled(a, x) * math.exp(-x)


def upper_incomplete_gamma_int_scaled(a: int, x: float) -> float:
    """exp(x) * Gamma(a, x) for integer a <= 1 and x > 0.

    The scaled form stays representable for large x, where Gamma(a, x)
    itself underflows. For a = 1 this is 1, for a = 0 it is the scaled E1;
    negative orders use the continued fraction directly when x >= 1 and the
    downward recurrence (stable there) when x < 1.
    """
    if x <= 0.0:
        raise ValueError(f"upper_incomplete_gamma_int requires x > 0, got {x}")
    if a != int(a) or a > 1:
        raise ValueError(f"order must be an integer <= 1, got {a}")
    a = int(a)
    if a == 1:
        return 1.0
    if a == 0:
        return exp_integral_e1_scaled(x)
    if x >= 1.0:
        return _gamma_cf_scaled(a, x)
    # Downward recurrence Gamma(a-1,x) = (Gamma(a,x) - x^(a-1) e^(-x))/(a-1),
    # in scaled form. For x < 1 the power term dominates, so no cancellation.
    s = exp_integral_e1_scaled(x)
    for m in range(0, a, -1):
        s = (s - x ** (m - 1)) / (m - 1)
    return s


def _gamma_cf_scaled(a: int, x: float) -> float:
    # Continued fraction for exp(x) * x^(-a) * Gamma(a, x):
    #   1/(x+1-a - 1(1-a)/(x+3-a - 2(2-a)/(...))) ; valid for x > 0, a <= 0.
    b = x + 1.0 - a
    c = 1.0 / _TINY
    d = 1.0 / b
    h = d
    for i in range(1, _MAX_ITER):
        an = -i * (i - a)
        b += 2.0
        d = an * d + b
        if abs(d) < _TINY:
            d = _TINY
        c = b + an / c
        if abs(c) < _TINY:
            c = _TINY
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < 1e-16:
            return h * x**a
    raise RuntimeError("incomplete gamma continued fraction failed to converge")  # pragma: no cover


def digamma_int(n: int) -> float:
    """psi(n) for integer n >= 1: -EULER_GAMMA + sum_{m<n} 1/m."""
    if n < 1 or n != int(n):
        raise ValueError(f"digamma_int requires an integer n >= 1, got {n}")
    return -EULER_GAMMA + math.fsum(1.0 / m for m in range(1, int(n)))


def gamma_log_expectation(t: int, theta: float) -> float:
    """E[ln X] for X ~ Gamma(t, theta): psi(t) + ln(theta)."""
    return digamma_int(t) + math.log(theta)


def gamma_log1p_expectation(t: int, theta: float) -> float:
    """E[ln(1 + X)] for X ~ Gamma(integer t >= 1, scale theta > 0).

    Evaluated as sum_{m=0}^{t-1} mu^m exp(mu) Gamma(-m, mu) with mu = 1/theta.
    All terms are positive, so the alternating-sum cancellation of the
    textbook closed form is avoided for small theta.
    """
    if t < 1 or t != int(t):
        raise ValueError(f"shape must be a positive integer, got {t}")
    if theta < 0.0:
        raise ValueError(f"scale must be nonnegative, got {theta}")
    if theta == 0.0:
        return 0.0
    mu = 1.0 / theta
    terms = []
    mu_pow = 1.0
    for m in range(int(t)):
        terms.append(mu_pow * upper_incomplete_gamma_int_scaled(-m, mu))
        mu_pow *= mu
    return math.fsum(terms)
