"""
Unit tests for per-AP scheduling.
"""
import itertools

import numpy as np
import pytest

from smallcell.allocation.scheduling import (
    achieved_rates,
    fractional_refine,
    greedy_maxmin,
    min_normalized_rate,
    per_prb_rates,
    round_robin,
)
from smallcell.core.models import Schedule

B = 180e3
SIGMA2 = 1.0
P_TOT = 30.0


def exhaustive_best(gains, demands):
    """Max-min normalized rate over every whole-PRB assignment."""
    r = per_prb_rates(gains, P_TOT, SIGMA2, B)
    m, n_prbs = r.shape
    best = 0.0
    for owners in itertools.product(range(m), repeat=n_prbs):
        rates = np.zeros(m)
        for n, k in enumerate(owners):
            rates[k] += r[k, n]
        best = max(best, float(np.min(rates / demands)))
    return best


def lp_vertex_oracle(gains, demands):
    """
    Time-sharing optimum for two users on two PRBs.

    With x_n the share of user 0 on PRB n, the optimum of min(u0, u1) over the
    unit square sits at a corner or where u0 = u1 crosses an edge.
    """
    r = per_prb_rates(gains, P_TOT, SIGMA2, B)
    a = r[0] / demands[0]
    b = r[1] / demands[1]

    def value(x):
        u0 = a[0] * x[0] + a[1] * x[1]
        u1 = b[0] * (1 - x[0]) + b[1] * (1 - x[1])
        return min(u0, u1)

    candidates = [np.array(c, dtype=float) for c in itertools.product((0.0, 1.0), repeat=2)]
    # u0 - u1 = (a0 + b0) x0 + (a1 + b1) x1 - (b0 + b1)
    for fixed in (0, 1):
        free = 1 - fixed
        for v in (0.0, 1.0):
            x_free = ((b[0] + b[1]) - (a[fixed] + b[fixed]) * v) / (a[free] + b[free])
            if 0.0 <= x_free <= 1.0:
                x = np.zeros(2)
                x[fixed], x[free] = v, x_free
                candidates.append(x)
    return max(value(x) for x in candidates)


def test_single_user_takes_every_prb():
    """Test that one user is given all granted PRBs."""
    gains = np.array([[0.5, 2.0, 1.0]])
    sched = greedy_maxmin([7], [3, 8, 9], gains, [1e6], P_TOT, SIGMA2, B)

    assert sched.c.tolist() == [[1.0, 1.0, 1.0]]
    assert sched.p == pytest.approx(np.full((1, 3), P_TOT / 3))
    assert sched.iterations == 3
    assert sched.prbs.tolist() == [3, 8, 9]


def test_diagonal_gains_give_each_user_its_best_prb():
    """Test the diagonal-dominant two-user case against exhaustive assignment."""
    gains = np.array([[10.0, 0.1], [0.1, 10.0]])
    demands = np.array([1e6, 1e6])
    sched = greedy_maxmin([0, 1], [0, 1], gains, demands, P_TOT, SIGMA2, B)

    assert sched.c.tolist() == [[1.0, 0.0], [0.0, 1.0]]
    assert min_normalized_rate(sched, gains, demands, P_TOT, SIGMA2, B) == pytest.approx(
        exhaustive_best(gains, demands)
    )


def test_greedy_invariants_on_random_instances():
    """Test exclusivity, power budget, the round-robin floor and closeness to the optimum."""
    rng = np.random.default_rng(3)
    near_optimal = 0
    for _ in range(300):
        gains = rng.exponential(1.0, size=(2, 3))
        demands = rng.uniform(0.5e6, 2.0e6, size=2)
        sched = greedy_maxmin([0, 1], [0, 1, 2], gains, demands, P_TOT, SIGMA2, B)
        baseline = round_robin([0, 1], [0, 1, 2], demands, P_TOT)
        best = exhaustive_best(gains, demands)
        t = min_normalized_rate(sched, gains, demands, P_TOT, SIGMA2, B)
        t_rr = min_normalized_rate(baseline, gains, demands, P_TOT, SIGMA2, B)

        assert sched.iterations >= 3
        assert sched.c.sum(axis=0).tolist() == [1.0, 1.0, 1.0]
        assert sched.total_power == pytest.approx(P_TOT)
        assert t <= best * (1 + 1e-12)
        assert t >= t_rr
        near_optimal += t >= 0.9 * best

    assert near_optimal / 300 >= 0.95


def test_greedy_recovers_from_poor_first_pick():
    """Test an instance where plain greedy filling falls below round robin."""
    gains = np.array([[2.632, 1.158, 2.999], [0.919, 0.732, 0.223]])
    demands = np.array([1738406.0, 506746.0])
    sched = greedy_maxmin([0, 1], [0, 1, 2], gains, demands, P_TOT, SIGMA2, B)
    baseline = round_robin([0, 1], [0, 1, 2], demands, P_TOT)

    t = min_normalized_rate(sched, gains, demands, P_TOT, SIGMA2, B)
    assert t >= min_normalized_rate(baseline, gains, demands, P_TOT, SIGMA2, B)
    assert t == pytest.approx(exhaustive_best(gains, demands))


def test_greedy_three_users_never_below_round_robin():
    """Test the round-robin floor with three users and uneven PRB counts."""
    rng = np.random.default_rng(29)
    for n_prbs in (3, 4, 5):
        for _ in range(50):
            gains = rng.exponential(1.0, size=(3, n_prbs))
            demands = rng.uniform(0.2e6, 2.0e6, size=3)
            prbs = list(range(n_prbs))
            sched = greedy_maxmin([0, 1, 2], prbs, gains, demands, P_TOT, SIGMA2, B)
            baseline = round_robin([0, 1, 2], prbs, demands, P_TOT)

            t = min_normalized_rate(sched, gains, demands, P_TOT, SIGMA2, B)
            assert t >= min_normalized_rate(baseline, gains, demands, P_TOT, SIGMA2, B)
            assert t <= exhaustive_best(gains, demands) * (1 + 1e-12)
            assert sched.c.sum(axis=0).tolist() == [1.0] * n_prbs


def test_zero_demand_users_get_nothing():
    """Test that users without demand are left out."""
    gains = np.ones((3, 4))
    sched = greedy_maxmin([0, 1, 2], [0, 1, 2, 3], gains, [1e6, 0.0, 1e6], P_TOT, SIGMA2, B)

    assert sched.c[1].sum() == 0.0
    assert sched.c.sum(axis=1).tolist() == [2.0, 0.0, 2.0]


def test_empty_inputs_give_empty_schedules():
    """Test empty member and PRB sets."""
    no_members = greedy_maxmin([], [0, 1], np.zeros((0, 2)), [], P_TOT, SIGMA2, B)
    no_prbs = greedy_maxmin([0], [], np.zeros((1, 0)), [1e6], P_TOT, SIGMA2, B)

    assert no_members.c.shape == (0, 2)
    assert no_prbs.c.shape == (1, 0)
    assert no_prbs.total_power == 0.0
    rates = achieved_rates(no_prbs, np.zeros((1, 0)), np.zeros((1, 0)), SIGMA2, B, [1e6])
    assert rates.rate.tolist() == [0.0]


def test_round_robin_cycles_over_active_users():
    """Test the channel-blind baseline."""
    sched = round_robin([4, 5, 6], [0, 1, 2, 3], [1e6, 0.0, 1e6], P_TOT)

    assert sched.c.tolist() == [[1, 0, 1, 0], [0, 0, 0, 0], [0, 1, 0, 1]]
    assert sched.total_power == pytest.approx(P_TOT)


def test_refine_single_user():
    """Test that a lone user keeps every PRB whole."""
    gains = np.array([[1.0, 2.0]])
    sched = greedy_maxmin([0], [0, 1], gains, [1e6], P_TOT, SIGMA2, B)
    refined = fractional_refine(sched, gains, [1e6], P_TOT, SIGMA2, B)

    assert refined.c.tolist() == [[1.0, 1.0]]


def test_refine_splits_symmetric_prb():
    """Test c = 1/2 for two identical users on one PRB."""
    gains = np.array([[4.0], [4.0]])
    demands = np.array([1e6, 1e6])
    sched = greedy_maxmin([0, 1], [0], gains, demands, P_TOT, SIGMA2, B)
    refined = fractional_refine(sched, gains, demands, P_TOT, SIGMA2, B)
    r = per_prb_rates(gains, P_TOT, SIGMA2, B)[0, 0]

    assert refined.c[:, 0] == pytest.approx([0.5, 0.5], abs=1e-6)
    assert min_normalized_rate(refined, gains, demands, P_TOT, SIGMA2, B) == pytest.approx(
        r / 2e6, rel=1e-6
    )


@pytest.mark.parametrize("seed", range(20))
def test_refine_matches_vertex_oracle(seed):
    """Test refinement on two users and two PRBs against vertex enumeration."""
    rng = np.random.default_rng(100 + seed)
    gains = rng.exponential(1.0, size=(2, 2))
    demands = rng.uniform(0.5e6, 2.0e6, size=2)
    greedy = greedy_maxmin([0, 1], [0, 1], gains, demands, P_TOT, SIGMA2, B)
    refined = fractional_refine(greedy, gains, demands, P_TOT, SIGMA2, B)
    t_greedy = min_normalized_rate(greedy, gains, demands, P_TOT, SIGMA2, B)
    t_refined = min_normalized_rate(refined, gains, demands, P_TOT, SIGMA2, B)

    assert t_refined >= t_greedy * (1 - 1e-12)
    assert t_refined == pytest.approx(lp_vertex_oracle(gains, demands), rel=1e-6)
    assert refined.c.sum(axis=0) == pytest.approx([1.0, 1.0])


def test_achieved_rate_examples():
    """Test zero shares and the one-bit-per-hertz case."""
    idle = Schedule.empty(np.array([0]), np.array([0]))
    assert achieved_rates(idle, [[1.0]], [[0.0]], 1e-13, B, [1e6]).rate.tolist() == [0.0]

    sigma2 = 1e-13
    single = Schedule(
        members=np.array([0]), prbs=np.array([0]), c=np.ones((1, 1)), p=np.full((1, 1), 0.5)
    )
    rates = achieved_rates(single, [[sigma2 / 0.5]], [[0.0]], sigma2, B, [B / 2])

    assert rates.rate[0] == pytest.approx(B)
    assert rates.normalized[0] == pytest.approx(2.0)


def test_achieved_rates_with_interference():
    """Test SINR with interference and a time-shared PRB."""
    sched = Schedule(
        members=np.array([0, 1]),
        prbs=np.array([0]),
        c=np.array([[0.5], [0.5]]),
        p=np.array([[1.0], [1.0]]),
    )
    gains = np.array([[3.0], [1.0]])
    interference = np.array([[2.0], [0.0]])
    rates = achieved_rates(sched, gains, interference, 1.0, B, [1.0, 1.0])

    # user 0: 0.5 B log2(1 + 1*3 / (0.5 * 3)); user 1: 0.5 B log2(1 + 1 / 0.5)
    assert rates.rate == pytest.approx([0.5 * B * np.log2(3.0), 0.5 * B * np.log2(3.0)])
