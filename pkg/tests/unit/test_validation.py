"""
Unit tests for the validation helpers and the cheap checks.
"""
import numpy as np
import pytest

from smallcell.core.models import ResultRow, Schedule, Scheme
from smallcell.harness.validation import (
    best_assignment,
    check_analytic_outage,
    check_coloring_fixture,
    check_incomplete_gamma,
    check_scheduler,
    chromatic_number,
    ks_distance,
)
from smallcell.utils.config import ExperimentConfig


def test_ks_distance():
    """Test the KS statistic on a perfect and a shifted sample."""
    grid = (np.arange(100) + 0.5) / 100

    assert ks_distance(grid, lambda x: x) == pytest.approx(0.005)
    assert ks_distance(grid * 0.5, lambda x: np.clip(x, 0.0, 1.0)) == pytest.approx(0.5, abs=0.01)


def test_chromatic_number():
    """Test the exact oracle on small named graphs."""
    assert chromatic_number({}) == 0
    assert chromatic_number({0: set()}) == 1
    odd_cycle = {i: {(i - 1) % 5, (i + 1) % 5} for i in range(5)}
    assert chromatic_number(odd_cycle) == 3
    k4 = {i: {j for j in range(4) if j != i} for i in range(4)}
    assert chromatic_number(k4) == 4


def test_best_assignment_single_user():
    """Test that one user takes every PRB."""
    gains = np.array([[1.0, 3.0]])
    expected = 180e3 * (np.log2(1.0 + 0.5) + np.log2(1.0 + 1.5)) / 1e6

    assert best_assignment(gains, np.array([1e6]), 1.0, 1.0, 180e3) == pytest.approx(expected)


def test_cheap_checks_pass():
    """Test the fixture-based checks of the quick suite."""
    for result in (check_incomplete_gamma(), check_coloring_fixture()):
        assert result.passed, result.detail


def test_scheduler_check_passes_with_round_robin_floor():
    """Test that greedy never falls below round robin on the check's instances."""
    result = check_scheduler(instances=200)

    assert result.passed, result.detail
    assert "round-robin in 1.000" in result.detail


def test_scheduler_check_fails_below_round_robin(mocker):
    """Test that a scheduler starving the second user fails the check."""

    def everything_to_first(members, prbs, gains, demands, p_tot, sigma2, bandwidth):
        c = np.zeros((len(members), len(prbs)))
        c[0] = 1.0
        return Schedule(
            members=np.asarray(members), prbs=np.asarray(prbs), c=c, p=c * p_tot / len(prbs)
        )

    mocker.patch("smallcell.harness.validation.greedy_maxmin", side_effect=everything_to_first)
    result = check_scheduler(instances=50)

    assert not result.passed


def _shortfall_rows(shortfalls):
    return [
        ResultRow(
            scheme=Scheme.HIERARCHICAL,
            demand_bps=demand,
            lambda_f=0.005,
            lambda_u=0.025,
            drop_seed=i,
            outage_fraction=0.0,
            min_rate_bps=0.0,
            min_normalized=0.0,
            throughput_bps=0.0,
            mean_ap_load=0.0,
            colors_used=1,
            drop_index=i,
            ap_shortfall=value,
        )
        for demand, values in shortfalls.items()
        for i, value in enumerate(values)
    ]


@pytest.mark.asyncio
async def test_analytic_outage_accepts_zero_within_noise(mocker):
    """Test that a zero closed-form value matches a simulated mean inside two standard errors."""
    rows = _shortfall_rows({1e6: [0.0, 0.0, 0.0, 0.02], 2e6: [0.1, 0.1, 0.12, 0.08]})
    analytic = {1e6: 0.0, 2e6: 0.08}
    mocker.patch("smallcell.harness.validation._sweep", new=mocker.AsyncMock(return_value=rows))
    mocker.patch(
        "smallcell.harness.validation.outage_probability", side_effect=lambda acfg, r: analytic[r]
    )

    result = await check_analytic_outage(ExperimentConfig())

    assert result.passed, result.detail
    assert result.value == 0


@pytest.mark.asyncio
async def test_analytic_outage_flags_zero_against_clear_shortfall(mocker):
    """Test that every grid point is compared, including those with a zero on one side."""
    rows = _shortfall_rows({1e6: [0.2, 0.2, 0.2, 0.2], 2e6: [0.3, 0.3, 0.3, 0.3]})
    analytic = {1e6: 0.0, 2e6: 0.25}
    mocker.patch("smallcell.harness.validation._sweep", new=mocker.AsyncMock(return_value=rows))
    mocker.patch(
        "smallcell.harness.validation.outage_probability", side_effect=lambda acfg, r: analytic[r]
    )

    result = await check_analytic_outage(ExperimentConfig())

    assert not result.passed
    assert result.value == 1
