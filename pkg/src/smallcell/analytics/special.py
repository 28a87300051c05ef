"""
Regularized incomplete gamma function and the discrete CDFs built on it.

``P(s, x)`` uses the power series for ``x < s + 1`` and ``Q(s, x)`` the Lentz
continued fraction otherwise; the other half is the complement.
"""
import math
import sys

from smallcell.core.errors import ConvergenceError, ParameterError

# Relative size of the last term or factor at which iteration stops.
_STOP = 1e-15
MAX_ITERATIONS = 10_000
_TINY = sys.float_info.min / sys.float_info.epsilon


def _prefactor(s: float, x: float) -> float:
    return math.exp(-x + s * math.log(x) - math.lgamma(s))


def _series_p(s: float, x: float) -> float:
    term = 1.0 / s
    total = term
    denom = s
    for _ in range(MAX_ITERATIONS):
        denom += 1.0
        term *= x / denom
        total += term
        if abs(term) < abs(total) * _STOP:
            return total * _prefactor(s, x)
    raise ConvergenceError(f"incomplete gamma series did not converge for s={s}, x={x}")


def _continued_fraction_q(s: float, x: float) -> float:
    b = x + 1.0 - s
    c = 1.0 / _TINY
    d = 1.0 / b
    h = d
    for i in range(1, MAX_ITERATIONS + 1):
        an = -i * (i - s)
        b += 2.0
        d = an * d + b
        if abs(d) < _TINY:
            d = _TINY
        c = b + an / c
        if abs(c) < _TINY:
            c = _TINY
        d = 1.0 / d
        step = d * c
        h *= step
        if abs(step - 1.0) < _STOP:
            return h * _prefactor(s, x)
    raise ConvergenceError(f"incomplete gamma fraction did not converge for s={s}, x={x}")


def _check(s: float, x: float) -> None:
    if s <= 0:
        raise ParameterError(f"shape must be positive, got {s}")
    if x < 0:
        raise ParameterError(f"argument must be non-negative, got {x}")


def regularized_gamma_p(s: float, x: float) -> float:
    """Lower regularized incomplete gamma ``P(s, x) = gamma(s, x) / Gamma(s)``."""
    _check(s, x)
    if x == 0.0:
        return 0.0
    if x < s + 1.0:
        return _series_p(s, x)
    return 1.0 - _continued_fraction_q(s, x)


def regularized_gamma_q(s: float, x: float) -> float:
    """Upper regularized incomplete gamma ``Q(s, x) = 1 - P(s, x)``."""
    _check(s, x)
    if x == 0.0:
        return 1.0
    if x < s + 1.0:
        return 1.0 - _series_p(s, x)
    return _continued_fraction_q(s, x)


def poisson_pmf(k: int, mean: float) -> float:
    """``P(X = k)`` for ``X ~ Poisson(mean)``."""
    if k < 0:
        return 0.0
    if mean == 0:
        return 1.0 if k == 0 else 0.0
    return math.exp(-mean + k * math.log(mean) - math.lgamma(k + 1))


def poisson_cdf(k: int, mean: float) -> float:
    """``P(X <= k) = Q(k + 1, mean)`` for ``X ~ Poisson(mean)``."""
    if mean < 0:
        raise ParameterError(f"Poisson mean must be non-negative, got {mean}")
    if k < 0:
        return 0.0
    return regularized_gamma_q(k + 1.0, mean)


def binomial_pmf(k: int, trials: int, p: float) -> float:
    """``P(X = k)`` for ``X ~ Binomial(trials, p)``."""
    if not 0.0 <= p <= 1.0:
        raise ParameterError(f"success probability must lie in [0, 1], got {p}")
    if k < 0 or k > trials:
        return 0.0
    if p == 0.0:
        return 1.0 if k == 0 else 0.0
    if p == 1.0:
        return 1.0 if k == trials else 0.0
    log_pmf = (
        math.lgamma(trials + 1)
        - math.lgamma(k + 1)
        - math.lgamma(trials - k + 1)
        + k * math.log(p)
        + (trials - k) * math.log1p(-p)
    )
    return math.exp(log_pmf)


def binomial_cdf(k: int, trials: int, p: float) -> float:
    """``P(X <= k)`` for ``X ~ Binomial(trials, p)``, by direct summation."""
    if k < 0:
        return 0.0
    if k >= trials:
        return 1.0
    return min(1.0, math.fsum(binomial_pmf(j, trials, p) for j in range(k + 1)))
