"""Lower incomplete gamma and the confluent hypergeometric series.

Real arguments only. The series/continued-fraction split follows the usual
rule: series for x < a + 1, Lentz continued fraction for the complement.
"""

from __future__ import annotations

import math

_EPS = 1e-15
_TINY = 1e-300
_MAX_TERMS = 10_000


def hyp1f1_series(a: float, b: float, z: float, tol: float = 1e-14) -> float:
    """Kummer's 1F1(a; b; z) by direct summation.

    Truncates once the term ratio says the remaining tail is below ``tol``
    relative to the partial sum. Intended for moderate |z| (the circle
    reduction uses z = omega with |omega| of order 10 at most).
    """
    if b <= 0 and float(b).is_integer():
        raise ValueError("b must not be a non-positive integer")
    term = 1.0
    total = 1.0
    for k in range(_MAX_TERMS):
        ratio = (a + k) / (b + k) * z / (k + 1)
        term *= ratio
        total += term
        # once |ratio| < 1 the tail is bounded by a geometric series
        r = abs((a + k + 1) / (b + k + 1) * z / (k + 2))
        if r < 1 and abs(term) * r / (1 - r) <= tol * abs(total):
            return total
        if term == 0.0:
            return total
    raise ArithmeticError("1F1 series did not converge")


def _gamma_series(a: float, x: float) -> float:
    # regularized P(a, x) by the series x^a e^-x / Gamma(a+1) * sum x^n / (a+1)_n
    ap = a
    term = 1.0 / a
    total = term
    for _ in range(_MAX_TERMS):
        ap += 1.0
        term *= x / ap
        total += term
        if abs(term) < abs(total) * _EPS:
            return total * math.exp(-x + a * math.log(x) - math.lgamma(a))
    raise ArithmeticError("incomplete gamma series did not converge")


def _gamma_cf(a: float, x: float) -> float:
    # regularized Q(a, x) by modified Lentz
    b = x + 1.0 - a
    c = 1.0 / _TINY
    d = 1.0 / b
    h = d
    for i in range(1, _MAX_TERMS):
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
        if abs(delta - 1.0) < _EPS:
            return math.exp(-x + a * math.log(x) - math.lgamma(a)) * h
    raise ArithmeticError("incomplete gamma continued fraction did not converge")


def regularized_lower_gamma(a: float, x: float) -> float:
    """P(a, x) = gamma(a, x) / Gamma(a)."""
    if a <= 0:
        raise ValueError("a must be positive")
    if x < 0:
        raise ValueError("x must be non-negative")
    if x == 0:
        return 0.0
    if x < a + 1.0:
        return _gamma_series(a, x)
    return 1.0 - _gamma_cf(a, x)


def lower_incomplete_gamma(a: float, x: float) -> float:
    """Unregularized gamma(a, x) = int_0^x t^(a-1) e^-t dt."""
    if x == 0:
        return 0.0
    if x < a + 1.0:
        return regularized_lower_gamma(a, x) * math.gamma(a)
    # avoid cancellation in 1 - Q when Q is tiny relative to 1 is fine; keep direct form
    return (1.0 - _gamma_cf(a, x)) * math.gamma(a)


def lower_incomplete_gamma_kummer(a: float, x: float) -> float:
    """gamma(a, x) = a^-1 x^a 1F1(a; a+1; -x), the form used for the circle reduction."""
    return x**a / a * hyp1f1_series(a, a + 1.0, -x)
