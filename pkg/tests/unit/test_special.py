"""
Unit tests for the incomplete gamma function and discrete CDFs.
"""
import math

import pytest
from scipy import special, stats

from smallcell.analytics.special import (
    binomial_cdf,
    binomial_pmf,
    poisson_cdf,
    poisson_pmf,
    regularized_gamma_p,
    regularized_gamma_q,
)
from smallcell.core.errors import ParameterError

SHAPES = [0.3, 1.0, 2.5, 7.0, 20.0, 51.0, 150.0]
ARGS = [0.0, 1e-3, 0.5, 1.0, 5.0, 19.0, 21.0, 50.0, 120.0, 400.0]


@pytest.mark.parametrize("s", SHAPES)
@pytest.mark.parametrize("x", ARGS)
def test_incomplete_gamma_matches_scipy(s, x):
    """Test both branches against scipy on either side of x = s + 1."""
    assert regularized_gamma_p(s, x) == pytest.approx(special.gammainc(s, x), abs=1e-12)
    assert regularized_gamma_q(s, x) == pytest.approx(special.gammaincc(s, x), abs=1e-12)
    assert regularized_gamma_p(s, x) + regularized_gamma_q(s, x) == pytest.approx(1.0, abs=1e-13)


def test_incomplete_gamma_rejects_bad_arguments():
    """Test the domain checks."""
    with pytest.raises(ParameterError):
        regularized_gamma_p(0.0, 1.0)
    with pytest.raises(ParameterError):
        regularized_gamma_q(1.0, -0.5)


def test_poisson_cdf_example():
    """Test e^-2 (1 + 2 + 2 + 4/3)."""
    expected = math.exp(-2.0) * (1.0 + 2.0 + 2.0 + 4.0 / 3.0)

    assert poisson_cdf(3, 2.0) == pytest.approx(expected, abs=1e-12)
    assert poisson_cdf(3, 2.0) == pytest.approx(0.857123460498547, abs=1e-12)


@pytest.mark.parametrize("mean", [0.5, 2.0, 10.0, 25.0, 50.0])
def test_poisson_cdf_matches_direct_sum(mean):
    """Test the incomplete-gamma path against direct summation."""
    for k in range(0, 120, 3):
        direct = math.fsum(poisson_pmf(j, mean) for j in range(k + 1))
        assert poisson_cdf(k, mean) == pytest.approx(direct, abs=1e-10)


def test_poisson_edge_cases():
    """Test empty counts, zero mean and invalid means."""
    assert poisson_cdf(0, 3.0) == pytest.approx(math.exp(-3.0))
    assert poisson_cdf(-1, 3.0) == 0.0
    assert poisson_cdf(0, 0.0) == 1.0
    assert poisson_pmf(2, 0.0) == 0.0
    with pytest.raises(ParameterError):
        poisson_cdf(1, -1.0)


def test_binomial_example():
    """Test P(m <= 2) for 10 trials at p = 1/5."""
    assert binomial_cdf(2, 10, 0.2) == pytest.approx(0.6777995264, abs=1e-9)
    assert binomial_pmf(1, 1, 1.0) == 1.0
    assert binomial_cdf(10, 10, 0.3) == 1.0
    with pytest.raises(ParameterError):
        binomial_pmf(1, 3, 1.5)


@pytest.mark.parametrize("trials,p", [(10, 0.2), (500, 0.01), (37, 0.5), (3000, 0.002)])
def test_binomial_matches_scipy(trials, p):
    """Test the lgamma pmf and summed CDF against scipy.stats."""
    for k in range(0, min(trials, 40)):
        assert binomial_pmf(k, trials, p) == pytest.approx(stats.binom.pmf(k, trials, p), rel=1e-9, abs=1e-300)
        assert binomial_cdf(k, trials, p) == pytest.approx(stats.binom.cdf(k, trials, p), abs=1e-12)
