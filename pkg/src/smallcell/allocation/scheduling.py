"""
Step 4: per-AP max-min normalized-rate scheduling over the granted PRBs.

Power is split equally over the granted PRBs, which makes every rate linear in
the PRB shares c[k][n]. The greedy scheduler hands out whole PRBs and then
improves the assignment by local search; the optional refinement solves the
time-sharing linear program.
"""
from typing import Optional, Sequence

import numpy as np
import structlog
from scipy.optimize import linprog

from smallcell.core.models import AchievedRates, Schedule

logger = structlog.get_logger(__name__)

# relative gain a local-search move must beat
IMPROVE_RTOL = 1e-12
MAX_ROUNDS_PER_PRB = 4


def per_prb_rates(
    gains: np.ndarray, p_tot: float, sigma2: float, bandwidth: float
) -> np.ndarray:
    """
    Rate coefficients ``r[k][n] = B log2(1 + (P_tot / Nbar) h[k][n] / sigma^2)``.

    Args:
        gains: Instantaneous gains of the members on the granted PRBs, shape (M, Nbar)
    """
    gains = np.asarray(gains, dtype=float)
    n_granted = gains.shape[1]
    if n_granted == 0:
        return np.zeros_like(gains)
    return bandwidth * np.log2(1.0 + (p_tot / n_granted) * gains / sigma2)


def _normalized(c: np.ndarray, r: np.ndarray, demands: np.ndarray) -> np.ndarray:
    rates = (c * r).sum(axis=1)
    out = np.full(len(demands), np.inf)
    active = demands > 0
    out[active] = rates[active] / demands[active]
    return out


def _equal_power(c: np.ndarray, p_tot: float) -> np.ndarray:
    n_granted = c.shape[1]
    return c * (p_tot / n_granted) if n_granted else np.zeros_like(c)


def _levels(owner: np.ndarray, w: np.ndarray, active: np.ndarray) -> np.ndarray:
    level = np.where(active, 0.0, np.inf)
    np.add.at(level, owner, w[owner, np.arange(len(owner))])
    return level


def _best_move(owner: np.ndarray, w: np.ndarray, level: np.ndarray, active: np.ndarray):
    """Best (value, move) over single hand-overs, swaps and one-for-two trades."""
    best_value, best = -np.inf, None
    idx = np.arange(len(level))
    for a in np.flatnonzero(active):
        own_a = np.flatnonzero(owner == a)
        if len(own_a) == 0:
            continue
        for b in np.flatnonzero(active):
            if b == a:
                continue
            rest = np.min(level[active & (idx != a) & (idx != b)], initial=np.inf)
            own_b = np.flatnonzero(owner == b)

            # a hands one PRB to b
            vals = np.minimum(np.minimum(level[a] - w[a, own_a], level[b] + w[b, own_a]), rest)
            i = int(np.argmax(vals))
            if vals[i] > best_value:
                best_value, best = vals[i], ((own_a[i], b),)

            if len(own_b) == 0:
                continue
            # a and b exchange one PRB each
            la = level[a] - w[a, own_a][:, None] + w[a, own_b][None, :]
            lb = level[b] + w[b, own_a][:, None] - w[b, own_b][None, :]
            vals = np.minimum(np.minimum(la, lb), rest)
            i, j = np.unravel_index(int(np.argmax(vals)), vals.shape)
            if vals[i, j] > best_value:
                best_value, best = vals[i, j], ((own_a[i], b), (own_b[j], a))

            if len(own_b) < 2:
                continue
            # a gives one PRB for two of b's
            j2, j3 = np.triu_indices(len(own_b), 1)
            gain_a = w[a, own_b][j2] + w[a, own_b][j3]
            loss_b = w[b, own_b][j2] + w[b, own_b][j3]
            la = level[a] - w[a, own_a][:, None] + gain_a[None, :]
            lb = level[b] + w[b, own_a][:, None] - loss_b[None, :]
            vals = np.minimum(np.minimum(la, lb), rest)
            i, j = np.unravel_index(int(np.argmax(vals)), vals.shape)
            if vals[i, j] > best_value:
                best_value = vals[i, j]
                best = ((own_a[i], b), (own_b[j2[j]], a), (own_b[j3[j]], a))
    return best_value, best


def _improve(owner: np.ndarray, w: np.ndarray, active: np.ndarray, max_rounds: int):
    """Best-improvement local search on the min normalized rate; returns (owner, moves)."""
    owner = owner.copy()
    level = _levels(owner, w, active)
    moves = 0
    while moves < max_rounds:
        current = float(np.min(level[active]))
        value, move = _best_move(owner, w, level, active)
        if move is None or value <= current + IMPROVE_RTOL * abs(current):
            break
        for n, k in move:
            level[owner[n]] -= w[owner[n], n]
            owner[n] = k
            level[k] += w[k, n]
        moves += 1
    return owner, moves


def _assignment(owner: np.ndarray, shape) -> np.ndarray:
    c = np.zeros(shape)
    c[owner, np.arange(len(owner))] = 1.0
    return c


def greedy_maxmin(
    members: Sequence[int],
    granted_prbs: Sequence[int],
    gains: np.ndarray,
    demands: Sequence[float],
    p_tot: float,
    sigma2: float,
    bandwidth: float,
) -> Schedule:
    """
    Greedy max-min normalized-rate assignment of whole PRBs with local search.

    Repeatedly the member with the lowest normalized rate (lowest index on ties)
    takes its best remaining PRB (lowest PRB position on ties) until every
    granted PRB is assigned. Starting from that assignment and from the
    round-robin one, PRBs are then handed over, swapped, or traded one for two
    between members while the smallest normalized rate strictly increases. The
    better of the two results is kept, so the schedule is never worse than
    round robin. Members with zero demand take part in nothing.

    Args:
        members: User indices served by the AP
        granted_prbs: PRB indices granted to the AP
        gains: h[k][n] for members (rows) on granted PRBs (columns)
        demands: R_k per member (bit/s)
        p_tot: AP power budget (W)
        sigma2: Noise power per PRB (W)
        bandwidth: PRB bandwidth B (Hz)

    Returns:
        Schedule with c in {0, 1} and p = P_tot / Nbar on assigned PRBs
    """
    members = np.asarray(members, dtype=int)
    prbs = np.asarray(granted_prbs, dtype=int)
    demands = np.asarray(demands, dtype=float)
    active = demands > 0
    if len(members) == 0 or len(prbs) == 0 or not active.any():
        return Schedule.empty(members, prbs)

    r = per_prb_rates(gains, p_tot, sigma2, bandwidth)
    w = np.zeros_like(r)
    w[active] = r[active] / demands[active, None]
    level = np.where(active, 0.0, np.inf)
    free = np.ones(len(prbs), dtype=bool)
    greedy_owner = np.zeros(len(prbs), dtype=int)

    for _ in range(len(prbs)):
        k = int(np.argmin(level))
        n = int(np.argmax(np.where(free, r[k], -np.inf)))
        greedy_owner[n] = k
        free[n] = False
        level[k] += w[k, n]

    cyclic_owner = np.flatnonzero(active)[np.arange(len(prbs)) % int(active.sum())]
    max_rounds = MAX_ROUNDS_PER_PRB * len(prbs)

    best_c, best_t, moves = None, -np.inf, 0
    for start in (greedy_owner, cyclic_owner):
        owner, taken = _improve(start, w, active, max_rounds)
        c = _assignment(owner, r.shape)
        t = float(np.min(_normalized(c, r, demands)))
        if t > best_t:
            best_c, best_t, moves = c, t, taken

    return Schedule(
        members=members,
        prbs=prbs,
        c=best_c,
        p=_equal_power(best_c, p_tot),
        iterations=len(prbs) + moves,
    )


def round_robin(
    members: Sequence[int],
    granted_prbs: Sequence[int],
    demands: Sequence[float],
    p_tot: float,
) -> Schedule:
    """Channel-blind baseline: the i-th granted PRB goes to the (i mod M)-th active member."""
    members = np.asarray(members, dtype=int)
    prbs = np.asarray(granted_prbs, dtype=int)
    active = np.flatnonzero(np.asarray(demands, dtype=float) > 0)
    c = np.zeros((len(members), len(prbs)))
    if len(active):
        for n in range(len(prbs)):
            c[active[n % len(active)], n] = 1.0
    return Schedule(members=members, prbs=prbs, c=c, p=_equal_power(c, p_tot))


def min_normalized_rate(
    schedule: Schedule, gains: np.ndarray, demands: Sequence[float], p_tot: float,
    sigma2: float, bandwidth: float,
) -> float:
    """Smallest noise-limited normalized rate among active members."""
    demands = np.asarray(demands, dtype=float)
    if not (demands > 0).any():
        return float("inf")
    r = per_prb_rates(gains, p_tot, sigma2, bandwidth)
    return float(np.min(_normalized(schedule.c, r, demands)))


def _shares_for(t: float, r: np.ndarray, demands: np.ndarray) -> Optional[np.ndarray]:
    """PRB shares reaching normalized rate ``t`` for every active member, or None."""
    m, n_prbs = r.shape
    active = np.flatnonzero(demands > 0)
    n_vars = m * n_prbs

    # -sum_n c[k][n] r[k][n] / R_k <= -t  for every active k
    rate_rows = np.zeros((len(active), n_vars))
    for row, k in enumerate(active):
        rate_rows[row, k * n_prbs : (k + 1) * n_prbs] = -r[k] / demands[k]
    # sum_k c[k][n] <= 1 for every PRB
    share_rows = np.zeros((n_prbs, n_vars))
    for n in range(n_prbs):
        share_rows[n, n::n_prbs] = 1.0

    res = linprog(
        c=np.zeros(n_vars),
        A_ub=np.vstack((rate_rows, share_rows)),
        b_ub=np.concatenate((np.full(len(active), -t), np.ones(n_prbs))),
        bounds=(0.0, 1.0),
        method="highs",
    )
    if res.status != 0:
        return None
    shares = np.clip(res.x.reshape(m, n_prbs), 0.0, 1.0)
    # solver tolerance can overfill a PRB slightly
    return shares / np.maximum(shares.sum(axis=0), 1.0)


def fractional_refine(
    schedule: Schedule,
    gains: np.ndarray,
    demands: Sequence[float],
    p_tot: float,
    sigma2: float,
    bandwidth: float,
    tol: float = 1e-9,
) -> Schedule:
    """
    Time-sharing refinement of a schedule under fixed equal power.

    Maximises ``t = min_k sum_n c[k][n] r[k][n] / R_k`` subject to
    ``sum_k c[k][n] = 1`` by bisection on t, each step an LP feasibility check.
    The input's min normalized rate is the lower bracket, the best single-user
    rate the upper one. Unused share on a PRB goes to the member with the best
    rate there. The input is returned when the LP cannot improve on it.
    """
    demands = np.asarray(demands, dtype=float)
    active = demands > 0
    if len(schedule.members) == 0 or len(schedule.prbs) == 0 or not active.any():
        return schedule

    r = per_prb_rates(gains, p_tot, sigma2, bandwidth)
    t_lo = float(np.min(_normalized(schedule.c, r, demands)))
    t_hi = float(np.min(r[active].sum(axis=1) / demands[active]))
    best_c = schedule.c.copy()

    while t_hi - t_lo > tol * max(1.0, t_hi):
        t_mid = 0.5 * (t_lo + t_hi)
        shares = _shares_for(t_mid, r, demands)
        if shares is None:
            t_hi = t_mid
        else:
            t_lo = t_mid
            best_c = shares

    spare = 1.0 - best_c.sum(axis=0)
    best_rows = np.argmax(np.where(active[:, None], r, -np.inf), axis=0)
    best_c[best_rows, np.arange(best_c.shape[1])] += np.clip(spare, 0.0, None)
    best_c = np.clip(best_c, 0.0, 1.0)

    refined = float(np.min(_normalized(best_c, r, demands)))
    baseline = float(np.min(_normalized(schedule.c, r, demands)))
    if refined < baseline:
        logger.debug("Refinement did not improve the schedule", baseline=baseline, refined=refined)
        return schedule
    return Schedule(
        members=schedule.members,
        prbs=schedule.prbs,
        c=best_c,
        p=_equal_power(best_c, p_tot),
        iterations=schedule.iterations,
    )


def achieved_rates(
    schedule: Schedule,
    gains: np.ndarray,
    interference: np.ndarray,
    sigma2: float,
    bandwidth: float,
    demands: Sequence[float],
) -> AchievedRates:
    """
    Rates under interference: ``sum_n c B log2(1 + p h / (c (I + sigma^2)))``.

    ``p`` is the share-weighted average power, so for whole PRBs (c = 1) this is
    the usual ``B log2(1 + p h / (I + sigma^2))``.

    Args:
        schedule: Shares and powers of the AP's members
        gains: h[k][n] for members on the schedule's PRBs
        interference: I[k][n] on the same grid (W)
        sigma2: Noise power per PRB (W)
        bandwidth: PRB bandwidth B (Hz)
        demands: R_k per member

    Returns:
        AchievedRates for the members in schedule order
    """
    demands = np.asarray(demands, dtype=float)
    c = schedule.c
    if c.size == 0:
        rate = np.zeros(len(schedule.members))
    else:
        on = c > 0
        sinr = np.zeros_like(c)
        sinr[on] = (
            schedule.p[on] * np.asarray(gains)[on]
            / (c[on] * (np.asarray(interference)[on] + sigma2))
        )
        rate = (c * bandwidth * np.log2(1.0 + sinr)).sum(axis=1)
    normalized = np.full(len(rate), np.inf)
    active = demands > 0
    normalized[active] = rate[active] / demands[active]
    return AchievedRates(rate=rate, normalized=normalized)
