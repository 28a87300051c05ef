"""
Unit tests for drop evaluation and the fixed-allocation baseline.
"""
import numpy as np
import pytest

from smallcell.core.errors import ParameterError
from smallcell.core.models import Association, ChannelAllocation, ChannelState, Schedule
from smallcell.evaluation import (
    ap_transmit_power,
    drop_metrics,
    evaluate_scheme,
    fixed_allocation,
    interference_map,
)

B = 180e3


def brute_force_interference(serving, power, gains):
    """I[k][n] by explicit loops over users, PRBs and interferers."""
    n_aps, n_users, n_prbs = gains.shape
    out = np.zeros((n_users, n_prbs))
    for k in range(n_users):
        for n in range(n_prbs):
            for i in range(n_aps):
                if i != serving[k]:
                    out[k, n] += power[i, n] * gains[i, k, n]
    return out


def test_orthogonal_allocations_see_no_interference():
    """Test that APs on disjoint PRBs do not interfere."""
    power = np.array([[1.0, 0.0, 0.0], [0.0, 2.0, 0.0]])
    gains = np.ones((2, 2, 3))

    interference = interference_map(np.array([0, 1]), power, gains)

    assert interference[0, 0] == 0.0
    assert interference[1, 1] == 0.0


def test_single_interferer():
    """Test I = p g for one interferer on a shared PRB."""
    power = np.array([[0.5, 0.0], [0.5, 0.0]])
    gains = np.zeros((2, 1, 2))
    gains[1, 0, 0] = 1e-9
    gains[0, 0, 0] = 7.0

    interference = interference_map(np.array([0]), power, gains)

    assert interference[0].tolist() == [0.5 * 1e-9, 0.0]


def test_interference_matches_brute_force():
    """Test the vectorized map against explicit summation."""
    rng = np.random.default_rng(5)
    gains = rng.exponential(1e-9, size=(4, 6, 5))
    power = rng.uniform(0.0, 0.02, size=(4, 5))
    serving = rng.integers(0, 4, size=6)

    assert interference_map(serving, power, gains) == pytest.approx(
        brute_force_interference(serving, power, gains), rel=1e-12
    )


def test_ap_transmit_power():
    """Test per-PRB radiated power from schedules."""
    sched = Schedule(
        members=np.array([0, 1]),
        prbs=np.array([2, 4]),
        c=np.array([[1.0, 0.0], [0.0, 1.0]]),
        p=np.array([[0.05, 0.0], [0.0, 0.05]]),
    )
    idle = Schedule.empty(np.array([], dtype=int), np.array([], dtype=int))

    power = ap_transmit_power([sched, idle], 5)

    assert power[0].tolist() == [0.0, 0.0, 0.05, 0.0, 0.05]
    assert power[1].tolist() == [0.0] * 5


def test_fixed_allocation_sizes():
    """Test subset sizes, full allocation and range checks."""
    rng = np.random.default_rng(0)
    alloc = fixed_allocation(5, 50, 18, rng)

    assert alloc.granted == [18] * 5
    assert alloc.requested == [18] * 5
    assert all(p == sorted(set(p)) for p in alloc.prbs)
    assert fixed_allocation(3, 50, 50, rng).prbs == [list(range(50))] * 3
    with pytest.raises(ParameterError):
        fixed_allocation(3, 50, 51, rng)
    with pytest.raises(ParameterError):
        fixed_allocation(3, 50, 0, rng)


def test_fixed_allocation_is_uniform():
    """Test that each PRB is drawn with frequency N_AP / N."""
    alloc = fixed_allocation(10_000, 50, 18, np.random.default_rng(1))
    counts = np.zeros(50)
    for prbs in alloc.prbs:
        counts[prbs] += 1

    # binomial std of a frequency over 1e4 draws is about 0.005
    assert np.abs(counts / 10_000 - 18 / 50).max() < 0.025


def test_fixed_allocation_prefix_is_stable():
    """Test that adding APs does not change the subsets of earlier ones."""
    few = fixed_allocation(3, 50, 10, 42)
    many = fixed_allocation(8, 50, 10, 42)

    assert many.prbs[:3] == few.prbs


def test_drop_metrics():
    """Test outage counting, minima and throughput."""
    demands = np.full(10, 1e6)
    rates = np.full(10, 2e6)
    assert drop_metrics(rates, demands).outage_fraction == 0.0

    rates[3] = 0.5e6
    metrics = drop_metrics(rates, demands)

    assert metrics.outage_fraction == pytest.approx(0.1)
    assert metrics.min_rate == 0.5e6
    assert metrics.min_normalized == 0.5
    assert metrics.throughput == pytest.approx(18.5e6)
    # a user exactly at its demand is not in outage
    assert drop_metrics([1e6], [1e6]).outage_fraction == 0.0
    assert drop_metrics([], []).throughput == 0.0
    with pytest.raises(ParameterError):
        drop_metrics([1.0, 2.0], [1.0])


def _two_cell_channel():
    gains = np.full((2, 2, 2), 1e-12)
    gains[0, 0] = 1e-8
    gains[1, 1] = 1e-8
    return ChannelState(avg_power=gains.mean(axis=2), inst_gain=gains, noise_power=1e-13)


def test_evaluate_scheme_orthogonal_and_shared():
    """Test that sharing PRBs lowers rates relative to orthogonal ones."""
    assoc = Association.from_serving(np.array([0, 1]), n_aps=2)
    channel = _two_cell_channel()
    demands = np.full(2, 1e6)

    orthogonal = ChannelAllocation(prbs=[[0], [1]], requested=[1, 1], n_prbs=2)
    shared = ChannelAllocation(prbs=[[0], [0]], requested=[1, 1], n_prbs=2)
    m_orth, _, i_orth = evaluate_scheme(assoc, channel, orthogonal, demands, 0.1, B)
    m_shared, schedules, i_shared = evaluate_scheme(assoc, channel, shared, demands, 0.1, B)

    expected = B * np.log2(1.0 + 0.1 * 1e-8 / 1e-13)
    assert m_orth.rates == pytest.approx([expected, expected])
    assert i_orth[0, 0] == 0.0 and i_orth[1, 1] == 0.0
    assert i_shared[0, 0] == pytest.approx(0.1 * 1e-12)
    assert (m_shared.rates < m_orth.rates).all()
    assert [s.total_power for s in schedules] == pytest.approx([0.1, 0.1])


def test_ap_without_prbs_serves_nothing():
    """Test zero rates for users of an AP with no PRBs."""
    assoc = Association.from_serving(np.array([0, 1]), n_aps=2)
    alloc = ChannelAllocation(prbs=[[0, 1], []], requested=[2, 1], n_prbs=2)

    metrics, _, _ = evaluate_scheme(assoc, _two_cell_channel(), alloc, np.full(2, 1e6), 0.1, B)

    assert metrics.rates[1] == 0.0
    assert metrics.outage_fraction == pytest.approx(0.5)
