"""
Unit tests for AP and user placement.
"""
import math

import numpy as np
import pytest
from scipy import stats

from smallcell.core.errors import ParameterError
from smallcell.core.models import Region
from smallcell.network.deployment import (
    deploy,
    interior_mask,
    pairwise_distance,
    sample_grid,
    sample_ppp,
)
from smallcell.utils.config import DeploymentMode


def test_ppp_is_reproducible():
    """Test that a fixed seed yields bit-identical points."""
    region = Region(radius=100.0)

    first = sample_ppp(1 / 200, region, 123)
    second = sample_ppp(1 / 200, region, 123)

    assert np.array_equal(first, second)
    assert region.contains(first).all()


def test_ppp_mean_count():
    """Test that the point count averages lambda * area."""
    region = Region(radius=100.0)
    counts = [len(sample_ppp(1 / 200, region, seed)) for seed in range(2000)]
    expected = region.area / 200

    assert np.mean(counts) == pytest.approx(expected, abs=4 * math.sqrt(expected / 2000))


def test_ppp_radius_is_area_uniform():
    """Test that the fraction of points within half the radius is one quarter."""
    region = Region(radius=50.0)
    pts = np.concatenate([sample_ppp(0.05, region, seed) for seed in range(50)])
    inner = np.hypot(pts[:, 0], pts[:, 1]) <= 25.0

    assert inner.mean() == pytest.approx(0.25, abs=0.01)


def test_ppp_counts_are_poisson():
    """Test AP counts of 1e4 drops against the Poisson law with a chi-square test."""
    region = Region(radius=100.0)
    mean = region.area / 200
    counts = np.array([len(sample_ppp(1 / 200, region, seed)) for seed in range(10_000)])

    spread = 2.5 * math.sqrt(mean)
    values = np.arange(math.ceil(mean - spread), math.floor(mean + spread) + 1)
    observed = np.concatenate((
        [np.sum(counts < values[0])],
        [np.sum(counts == k) for k in values],
        [np.sum(counts > values[-1])],
    ))
    probs = np.concatenate((
        [stats.poisson.cdf(values[0] - 1, mean)],
        stats.poisson.pmf(values, mean),
        [stats.poisson.sf(values[-1], mean)],
    ))
    expected = probs * len(counts)

    assert expected.min() >= 5
    assert stats.chisquare(observed, expected).pvalue > 0.01


def test_ppp_squared_radius_is_uniform():
    """Test r^2 / R^2 of pooled PPP points against Uniform[0, 1] with a KS test."""
    region = Region(radius=50.0)
    pts = np.concatenate([sample_ppp(0.05, region, seed) for seed in range(50)])
    r2 = (pts[:, 0] ** 2 + pts[:, 1] ** 2) / region.radius**2

    assert stats.kstest(r2, "uniform").pvalue > 0.01


def test_ppp_rejects_bad_density():
    """Test parameter validation."""
    with pytest.raises(ParameterError):
        sample_ppp(0.0, Region(radius=10.0), 1)


def test_grid_spacing_and_clipping():
    """Test that grid APs sit on a lattice of spacing 1/sqrt(lambda)."""
    region = Region(radius=30.0)
    pts = sample_grid(1 / 100, region)

    def has(point):
        return bool(np.any(np.all(np.isclose(pts, point), axis=1)))

    assert region.contains(pts).all()
    assert len(pts) == 29
    assert has([0.0, 0.0]) and has([10.0, 0.0]) and has([30.0, 0.0])
    assert not has([30.0, 10.0])


def test_deploy_regenerates_empty_drops():
    """Test that drops without APs are redrawn with the next seed."""
    region = Region(radius=10.0)
    real = deploy(0.002, 0.5, region, seed=0)

    assert real.n_aps >= 1
    assert real.n_users >= 1
    assert real.seed >= 0
    again = deploy(0.002, 0.5, region, seed=real.seed)
    assert np.array_equal(again.aps, real.aps)
    assert again.seed == real.seed


def test_deploy_fixed_count():
    """Test that fixed-count mode places round(lambda * area) points."""
    region = Region(radius=100.0)
    real = deploy(1 / 200, 3 / 200, region, seed=5, mode=DeploymentMode.FIXED_COUNT)

    assert real.n_aps == round(region.area / 200)
    assert real.n_users == round(3 * region.area / 200)


def test_deploy_streams_are_independent():
    """Test that AP positions do not depend on the user density."""
    region = Region(radius=100.0)

    low = deploy(1 / 200, 3 / 200, region, seed=9)
    high = deploy(1 / 200, 6 / 200, region, seed=9)

    assert np.array_equal(low.aps, high.aps)


def test_pairwise_distance():
    """Test the 3-4-5 triangle and zero distance."""
    assert pairwise_distance((0.0, 0.0), (3.0, 4.0)) == 5.0
    assert pairwise_distance((1.0, 1.0), (1.0, 1.0)) == 0.0


def test_interior_mask():
    """Test the boundary guard."""
    region = Region(radius=10.0)
    mask = interior_mask(np.array([[0.0, 0.0], [7.0, 0.0], [9.0, 0.0]]), region, guard=2.0)

    assert mask.tolist() == [True, True, False]
