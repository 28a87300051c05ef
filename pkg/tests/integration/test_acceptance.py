"""
Monte Carlo acceptance checks. These take minutes; run with ``pytest -m slow``.
"""
import pytest

from smallcell.harness.validation import (
    check_analytic_outage,
    check_ap_load_cdf,
    check_connection_distance,
    check_csv_determinism,
    check_fixed_minimum,
    check_scheme_comparison,
    check_user_load_cdf,
    quick_checks,
)
from smallcell.utils.config import ExperimentConfig

pytestmark = pytest.mark.slow


def test_quick_suite_passes():
    """Test every check of ``smallcell validate``."""
    failed = [r for r in quick_checks() if not r.passed]

    assert failed == []


def test_connection_distance_matches_closed_form():
    """Test KS distance below 0.01 over 1e5 interior users."""
    result = check_connection_distance()

    assert result.passed, result.value


def test_user_load_matches_closed_form():
    """Test the equal-power user-load CDF and its steepening with density."""
    result = check_user_load_cdf()

    assert result.passed, result.detail


def test_grid_ap_load_matches_binomial():
    """Test AP loads of a regular deployment against the binomial CDF."""
    result = check_ap_load_cdf()

    assert result.passed, result.detail


@pytest.mark.asyncio
async def test_csv_output_is_reproducible(small_config):
    """Test byte-identical CSV files across runs."""
    result = await check_csv_determinism(small_config)

    assert result.passed


@pytest.fixture
def sweep_config(tmp_path):
    """Default network with enough drops for the sweep-level comparisons."""
    return ExperimentConfig(drops=100, output_dir=tmp_path / "results")


@pytest.mark.asyncio
async def test_fixed_allocation_has_interior_minimum(sweep_config):
    """Test that fixed-allocation outage is lowest strictly inside the N_AP range."""
    result = await check_fixed_minimum(sweep_config)

    assert result.passed, result.detail


@pytest.mark.asyncio
async def test_hierarchical_beats_fixed_allocation(sweep_config):
    """Test outage, minimum rate and throughput against the N_AP = 18 baseline."""
    result = await check_scheme_comparison(sweep_config)

    assert result.passed, result.detail
    assert result.value >= 1.5


@pytest.mark.asyncio
async def test_analytic_outage_tracks_simulation(sweep_config):
    """Test the closed-form outage against the simulated coloring shortfall."""
    result = await check_analytic_outage(sweep_config)

    assert result.passed, result.detail
    assert result.value == 0
