"""
Realized performance of a drop under full cross-AP interference, and the
fixed-allocation baseline.
"""
from typing import List, Optional, Sequence, Tuple

import numpy as np
import structlog

from smallcell.allocation.scheduling import achieved_rates, fractional_refine, greedy_maxmin
from smallcell.core.errors import ParameterError
from smallcell.core.models import (
    Association,
    ChannelAllocation,
    ChannelState,
    DropMetrics,
    Schedule,
)
from smallcell.network.deployment import RngLike, as_generator
from smallcell.utils.config import SchedulingConfig

logger = structlog.get_logger(__name__)


def fixed_allocation(n_aps: int, n_prbs: int, n_ap: int, rng: RngLike) -> ChannelAllocation:
    """
    Uncoordinated baseline: every AP draws a uniform random ``n_ap``-subset of the PRBs.

    Subsets are drawn AP by AP from one generator, so the first L rows do not
    depend on how many APs follow.

    Raises:
        ParameterError: if ``n_ap`` is outside 1..N
    """
    if not 1 <= n_ap <= n_prbs:
        raise ParameterError(f"n_ap must lie in 1..{n_prbs}, got {n_ap}")
    gen = as_generator(rng)
    prbs = [sorted(int(n) for n in gen.choice(n_prbs, size=n_ap, replace=False)) for _ in range(n_aps)]
    return ChannelAllocation(prbs=prbs, requested=[n_ap] * n_aps, n_prbs=n_prbs)


def ap_transmit_power(schedules: Sequence[Schedule], n_prbs: int) -> np.ndarray:
    """
    Power each AP radiates on each PRB, shape (L, N).

    An AP transmits on a PRB iff one of its members holds a share of it.
    """
    power = np.zeros((len(schedules), n_prbs))
    for ap, schedule in enumerate(schedules):
        if schedule.c.size == 0:
            continue
        power[ap, schedule.prbs] = schedule.p.sum(axis=0)
    return power


def interference_map(
    serving_ap: np.ndarray, power: np.ndarray, inst_gain: np.ndarray
) -> np.ndarray:
    """
    Interference seen by every user on every PRB.

    ``I[k][n] = sum over APs i != serving(k) of power[i][n] * h[i][k][n]``.

    Args:
        serving_ap: Serving AP per user, shape (K,)
        power: Radiated power per AP and PRB, shape (L, N)
        inst_gain: h[l][k][n], shape (L, K, N)

    Returns:
        Interference power in watts, shape (K, N)
    """
    serving_ap = np.asarray(serving_ap, dtype=int)
    received = power[:, None, :] * inst_gain
    received[serving_ap, np.arange(len(serving_ap))] = 0.0
    return received.sum(axis=0)


def drop_metrics(rates: Sequence[float], demands: Sequence[float]) -> DropMetrics:
    """
    Outage, minimum rate and throughput of a drop.

    A user is in outage when its rate is strictly below its demand.
    """
    rates = np.asarray(rates, dtype=float)
    demands = np.asarray(demands, dtype=float)
    if rates.shape != demands.shape:
        raise ParameterError("one rate per demand is required")
    if rates.size == 0:
        return DropMetrics(
            outage_fraction=0.0,
            min_rate=0.0,
            min_normalized=0.0,
            throughput=0.0,
            rates=rates,
            outage=np.zeros(0, dtype=bool),
        )
    outage = rates < demands
    return DropMetrics(
        outage_fraction=float(outage.mean()),
        min_rate=float(rates.min()),
        min_normalized=float(np.min(rates / demands)),
        throughput=float(rates.sum()),
        rates=rates,
        outage=outage,
    )


def schedule_aps(
    assoc: Association,
    channel: ChannelState,
    allocation: ChannelAllocation,
    demands: np.ndarray,
    p_tot: float,
    bandwidth: float,
    cfg: Optional[SchedulingConfig] = None,
) -> List[Schedule]:
    """Run the Step-4 scheduler at every AP on its granted PRBs."""
    cfg = cfg or SchedulingConfig()
    schedules: List[Schedule] = []
    for ap, members in enumerate(assoc.members):
        prbs = np.asarray(allocation.prbs[ap], dtype=int)
        gains = channel.inst_gain[ap][np.ix_(members, prbs)]
        schedule = greedy_maxmin(
            members, prbs, gains, demands[members], p_tot, channel.noise_power, bandwidth
        )
        if cfg.refine:
            schedule = fractional_refine(
                schedule,
                gains,
                demands[members],
                p_tot,
                channel.noise_power,
                bandwidth,
                tol=cfg.refine_tol,
            )
        schedules.append(schedule)
    return schedules


def evaluate_scheme(
    assoc: Association,
    channel: ChannelState,
    allocation: ChannelAllocation,
    demands: np.ndarray,
    p_tot: float,
    bandwidth: float,
    cfg: Optional[SchedulingConfig] = None,
) -> Tuple[DropMetrics, List[Schedule], np.ndarray]:
    """
    Schedule every AP on its PRBs and evaluate the realized rates.

    Users of an AP without PRBs get rate zero.

    Args:
        assoc: User-to-AP association
        channel: Channel state of the drop
        allocation: PRBs per AP, from either scheme
        demands: R_k per user (bit/s)
        p_tot: AP power budget (W)
        bandwidth: PRB bandwidth B (Hz)
        cfg: Scheduler settings

    Returns:
        Tuple of (DropMetrics, schedules per AP, interference map (K, N))
    """
    demands = np.asarray(demands, dtype=float)
    n_prbs = channel.n_prbs
    if allocation.n_prbs > n_prbs:
        raise ParameterError("allocation uses more PRBs than the channel state holds")

    schedules = schedule_aps(assoc, channel, allocation, demands, p_tot, bandwidth, cfg)
    power = ap_transmit_power(schedules, n_prbs)
    interference = interference_map(assoc.serving_ap, power, channel.inst_gain)

    rates = np.zeros(len(demands))
    for ap, schedule in enumerate(schedules):
        members = schedule.members
        if len(members) == 0:
            continue
        grid = np.ix_(members, schedule.prbs)
        achieved = achieved_rates(
            schedule,
            channel.inst_gain[ap][grid],
            interference[grid],
            channel.noise_power,
            bandwidth,
            demands[members],
        )
        rates[members] = achieved.rate

    metrics = drop_metrics(rates, demands)
    logger.debug(
        "Scheme evaluated",
        outage_fraction=metrics.outage_fraction,
        min_rate=metrics.min_rate,
        throughput=metrics.throughput,
    )
    return metrics, schedules, interference
