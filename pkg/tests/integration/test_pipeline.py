"""
Integration tests for one drop through all four steps.
"""
import numpy as np
import pytest

from smallcell.core.errors import DropError, ParameterError
from smallcell.core.models import Scheme
from smallcell.evaluation.metrics import ap_transmit_power
from smallcell.harness.pipeline import (
    drop_seed,
    prepare_drop,
    run_drop,
    run_fixed,
    run_hierarchical,
)
from smallcell.utils.config import Scenario


def test_drop_rows_cover_every_sweep_point(small_config):
    """Test one row per demand for the hierarchical scheme and per (demand, N_AP) for the baseline."""
    rows = run_drop(small_config, drop_seed(small_config, 0))

    assert len(rows) == len(small_config.demands_bps) * (1 + len(small_config.n_ap_values))
    assert {r.scheme for r in rows} == {Scheme.HIERARCHICAL, Scheme.FIXED}
    assert {r.n_ap for r in rows if r.scheme == Scheme.FIXED} == {6, 18}
    assert all(r.drop_seed == small_config.base_seed for r in rows)
    assert all(0.0 <= r.outage_fraction <= 1.0 for r in rows)


def test_drop_is_deterministic(small_config):
    """Test that a seed reproduces its rows exactly."""
    assert run_drop(small_config, 11) == run_drop(small_config, 11)
    assert run_drop(small_config, 11) != run_drop(small_config, 12)


def test_schemes_share_the_realization(small_config):
    """Test that both schemes see the same positions, fades and association."""
    first = prepare_drop(small_config, 21)
    second = prepare_drop(small_config, 21)

    assert np.array_equal(first.realization.aps, second.realization.aps)
    assert np.array_equal(first.realization.users, second.realization.users)
    assert np.array_equal(first.channel.inst_gain, second.channel.inst_gain)
    assert np.array_equal(first.association.serving_ap, second.association.serving_ap)

    hier = run_hierarchical(small_config, first, 1e6)
    fixed = run_fixed(small_config, first, 1e6, 18)
    assert np.array_equal(hier.loads, fixed.loads)


@pytest.mark.parametrize("seed", [3, 4, 5])
def test_hierarchical_scheme_is_orthogonal_between_neighbours(small_config, seed):
    """Test that interfering APs never transmit on a common PRB."""
    drop = prepare_drop(small_config, seed)
    outcome = run_hierarchical(small_config, drop, 1.5e6)
    power = ap_transmit_power(outcome.schedules, small_config.n_prbs)

    for i, j in outcome.graph.edges:
        assert not set(outcome.allocation.prbs[i]) & set(outcome.allocation.prbs[j])
        assert not ((power[i] > 0) & (power[j] > 0)).any()
    assert outcome.colors_used <= small_config.n_prbs


def test_fixed_baseline_grants_n_ap_prbs(small_config):
    """Test subset sizes and the PRB-usage count of the baseline."""
    drop = prepare_drop(small_config, 7)
    outcome = run_fixed(small_config, drop, 1e6, 6)

    assert set(outcome.allocation.granted) == {6}
    assert 6 <= outcome.colors_used <= small_config.n_prbs
    assert outcome.graph is None


def test_frozen_fixed_allocation(small_config):
    """Test that freezing reuses the same subsets in every drop."""
    frozen = small_config.model_copy(update={"freeze_fixed_allocation": True})
    a = run_fixed(frozen, prepare_drop(frozen, 1), 1e6, 6).allocation
    b = run_fixed(frozen, prepare_drop(frozen, 2), 1e6, 6).allocation
    n = min(len(a.prbs), len(b.prbs))

    assert a.prbs[:n] == b.prbs[:n]


def test_scenario_selects_schemes(small_config):
    """Test single-scheme scenarios and the analysis-only scenario."""
    hier_only = small_config.model_copy(update={"scenario": Scenario.HIERARCHICAL})
    rows = run_drop(hier_only, 1)
    assert len(rows) == len(small_config.demands_bps)
    assert {r.scheme for r in rows} == {Scheme.HIERARCHICAL}

    analyze = small_config.model_copy(update={"scenario": Scenario.ANALYZE})
    with pytest.raises(ParameterError):
        run_drop(analyze, 1)


def test_failures_carry_the_drop_seed(small_config, mocker):
    """Test that any error inside a drop surfaces as DropError with its seed."""
    mocker.patch("smallcell.harness.pipeline.associate", side_effect=RuntimeError("boom"))

    with pytest.raises(DropError) as info:
        run_drop(small_config, 99)

    assert info.value.seed == 99
    assert isinstance(info.value.cause, RuntimeError)
