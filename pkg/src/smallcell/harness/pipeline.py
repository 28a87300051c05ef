"""
One Monte Carlo drop through the four-step pipeline.

A drop is prepared once (positions, channel, association) and then evaluated
for every demand, for the hierarchical scheme and for the fixed-allocation
baseline at every N_AP, so all sweep points of a drop share the same
realization and fading.

Random streams are derived from the drop seed: positions from ``seed`` (see
:func:`smallcell.network.deployment.deploy`), per-link draws from
``(seed, 1)``, fades from ``(seed, 2)`` and baseline PRB subsets from
``(seed, 3, N_AP)``.
"""
from typing import List, Optional

import numpy as np
import structlog
from pydantic import Field

from smallcell.allocation.coloring import (
    Coloring,
    InterferenceGraph,
    allocation_from_coloring,
    ap_outage_from_allocation,
    build_interference_graph,
    dsatur_color,
    requested_prbs,
)
from smallcell.allocation.load import aggregate_ap_loads, estimate_ap_loads
from smallcell.core.errors import DropError, ParameterError
from smallcell.core.models import (
    ArrayModel,
    Association,
    ChannelAllocation,
    ChannelState,
    DropMetrics,
    NetworkRealization,
    Region,
    ResultRow,
    Schedule,
    Scheme,
    UserDemand,
)
from smallcell.evaluation.metrics import evaluate_scheme, fixed_allocation
from smallcell.network.association import associate
from smallcell.network.deployment import deploy
from smallcell.network.propagation import ChannelModel
from smallcell.utils.config import ExperimentConfig, Scenario

logger = structlog.get_logger(__name__)

LINK_STREAM = 1
FADING_STREAM = 2
FIXED_STREAM = 3


def stream(*key: int) -> np.random.Generator:
    """Generator for a named stream of a drop, e.g. ``stream(seed, FADING_STREAM)``."""
    return np.random.default_rng(np.random.SeedSequence(list(key)))


def drop_seed(cfg: ExperimentConfig, drop_index: int) -> int:
    """Seed of drop ``drop_index``: ``base_seed + drop_index`` at every sweep point."""
    return cfg.base_seed + drop_index


class PreparedDrop(ArrayModel):
    """Positions, channel and association shared by every scheme of a drop."""

    realization: NetworkRealization
    channel: ChannelState
    association: Association
    drop_index: int = Field(default=0, ge=0)

    @property
    def seed(self) -> int:
        """Seed the realization was drawn with."""
        return int(self.realization.seed)


class SchemeOutcome(ArrayModel):
    """Everything one scheme produced on one drop at one demand."""

    scheme: Scheme
    demand_bps: float
    n_ap: int = 0
    loads: np.ndarray = Field(description="N_l per AP")
    allocation: ChannelAllocation
    schedules: List[Schedule]
    interference: np.ndarray = Field(description="I[k][n], shape (K, N)")
    metrics: DropMetrics
    colors_used: int
    ap_shortfall: float
    graph: Optional[InterferenceGraph] = None
    coloring: Optional[Coloring] = None


def prepare_drop(
    cfg: ExperimentConfig, seed: int, lambda_u_ratio: Optional[float] = None, drop_index: int = 0
) -> PreparedDrop:
    """
    Deploy APs and users, realize the channel and associate users (Step 1).

    Args:
        cfg: Experiment settings
        seed: Drop seed
        lambda_u_ratio: User density as a multiple of lambda_f (first sweep value by default)
        drop_index: Position of the drop in the sweep

    Returns:
        PreparedDrop
    """
    ratio = lambda_u_ratio if lambda_u_ratio is not None else cfg.lambda_u_ratios[0]
    region = Region(radius=cfg.region_radius_m)
    realization = deploy(
        cfg.lambda_f, ratio * cfg.lambda_f, region, seed, mode=cfg.deployment_mode
    )
    used = int(realization.seed)
    channel = ChannelModel(cfg.propagation).realize(
        realization, cfg.n_prbs, stream(used, LINK_STREAM), stream(used, FADING_STREAM)
    )
    association = associate(realization, channel.association_metric)
    logger.debug(
        "Drop prepared",
        seed=used,
        n_aps=realization.n_aps,
        n_users=realization.n_users,
    )
    return PreparedDrop(
        realization=realization, channel=channel, association=association, drop_index=drop_index
    )


def estimate_loads(cfg: ExperimentConfig, drop: PreparedDrop, demand_bps: float) -> np.ndarray:
    """Step 2 at every AP for a common demand; returns N_l per AP."""
    demands = UserDemand.uniform(demand_bps, drop.realization.n_users).rates
    estimates = estimate_ap_loads(
        drop.association,
        drop.channel.avg_power,
        demands,
        cfg.tx_power_w,
        drop.channel.noise_power,
        cfg.propagation.prb_bandwidth_hz,
        cfg.n_prbs,
        cfg.load_estimation,
    )
    return aggregate_ap_loads(drop.association, estimates)


def _shortfall(loads: np.ndarray, allocation: ChannelAllocation) -> float:
    if len(loads) == 0:
        return 0.0
    return float(ap_outage_from_allocation(loads, allocation).mean())


def run_hierarchical(
    cfg: ExperimentConfig,
    drop: PreparedDrop,
    demand_bps: float,
    loads: Optional[np.ndarray] = None,
) -> SchemeOutcome:
    """Steps 2 to 4 of the hierarchical scheme, then evaluation under full interference."""
    if loads is None:
        loads = estimate_loads(cfg, drop, demand_bps)
    graph = build_interference_graph(drop.realization, cfg.d_tilde_m, loads)
    coloring = dsatur_color(graph, cfg.n_prbs)
    allocation = allocation_from_coloring(coloring, graph)
    demands = UserDemand.uniform(demand_bps, drop.realization.n_users).rates
    metrics, schedules, interference = evaluate_scheme(
        drop.association,
        drop.channel,
        allocation,
        demands,
        cfg.tx_power_w,
        cfg.propagation.prb_bandwidth_hz,
        cfg.scheduling,
    )
    return SchemeOutcome(
        scheme=Scheme.HIERARCHICAL,
        demand_bps=demand_bps,
        loads=loads,
        allocation=allocation,
        schedules=schedules,
        interference=interference,
        metrics=metrics,
        colors_used=coloring.colors_used,
        ap_shortfall=_shortfall(loads, allocation),
        graph=graph,
        coloring=coloring,
    )


def run_fixed(
    cfg: ExperimentConfig,
    drop: PreparedDrop,
    demand_bps: float,
    n_ap: int,
    loads: Optional[np.ndarray] = None,
) -> SchemeOutcome:
    """
    Fixed-allocation baseline: random N_AP PRBs per AP, same association and scheduler.

    With ``freeze_fixed_allocation`` the subsets come from the base seed and are
    the same in every drop.
    """
    if loads is None:
        loads = estimate_loads(cfg, drop, demand_bps)
    owner = cfg.base_seed if cfg.freeze_fixed_allocation else drop.seed
    allocation = fixed_allocation(
        drop.realization.n_aps, cfg.n_prbs, n_ap, stream(owner, FIXED_STREAM, n_ap)
    )
    demands = UserDemand.uniform(demand_bps, drop.realization.n_users).rates
    metrics, schedules, interference = evaluate_scheme(
        drop.association,
        drop.channel,
        allocation,
        demands,
        cfg.tx_power_w,
        cfg.propagation.prb_bandwidth_hz,
        cfg.scheduling,
    )
    in_use = set().union(*allocation.prbs) if allocation.prbs else set()
    shortfall = (
        float(np.mean([n_ap < requested_prbs(float(n)) for n in loads])) if len(loads) else 0.0
    )
    return SchemeOutcome(
        scheme=Scheme.FIXED,
        demand_bps=demand_bps,
        n_ap=n_ap,
        loads=loads,
        allocation=allocation,
        schedules=schedules,
        interference=interference,
        metrics=metrics,
        colors_used=len(in_use),
        ap_shortfall=shortfall,
    )


def to_row(drop: PreparedDrop, outcome: SchemeOutcome) -> ResultRow:
    """Flatten a scheme outcome into a result row."""
    realization = drop.realization
    metrics = outcome.metrics
    return ResultRow(
        scheme=outcome.scheme,
        demand_bps=outcome.demand_bps,
        lambda_f=realization.lambda_f,
        lambda_u=realization.lambda_u,
        drop_seed=drop.seed,
        outage_fraction=metrics.outage_fraction,
        min_rate_bps=metrics.min_rate,
        min_normalized=metrics.min_normalized,
        throughput_bps=metrics.throughput,
        mean_ap_load=float(np.mean(outcome.loads)) if len(outcome.loads) else 0.0,
        colors_used=outcome.colors_used,
        drop_index=drop.drop_index,
        n_ap=outcome.n_ap,
        ap_shortfall=outcome.ap_shortfall,
    )


def schemes_for(scenario: Scenario) -> List[Scheme]:
    """Schemes a scenario evaluates."""
    if scenario == Scenario.HIERARCHICAL:
        return [Scheme.HIERARCHICAL]
    if scenario == Scenario.FIXED:
        return [Scheme.FIXED]
    if scenario == Scenario.BOTH:
        return [Scheme.HIERARCHICAL, Scheme.FIXED]
    raise ParameterError(f"scenario {scenario.value} does not simulate drops")


def run_drop(
    cfg: ExperimentConfig,
    seed: int,
    lambda_u_ratio: Optional[float] = None,
    drop_index: int = 0,
) -> List[ResultRow]:
    """
    Run one drop at every demand and baseline N_AP of the configuration.

    Args:
        cfg: Experiment settings
        seed: Drop seed
        lambda_u_ratio: User density as a multiple of lambda_f (first sweep value by default)
        drop_index: Position of the drop in the sweep

    Returns:
        One row per (scheme, demand, N_AP)

    Raises:
        DropError: wrapping any failure, with the drop seed attached
    """
    schemes = schemes_for(cfg.scenario)
    try:
        drop = prepare_drop(cfg, seed, lambda_u_ratio, drop_index)
        rows: List[ResultRow] = []
        for demand in cfg.demands_bps:
            loads = estimate_loads(cfg, drop, demand)
            if Scheme.HIERARCHICAL in schemes:
                rows.append(to_row(drop, run_hierarchical(cfg, drop, demand, loads)))
            if Scheme.FIXED in schemes:
                for n_ap in cfg.n_ap_values:
                    rows.append(to_row(drop, run_fixed(cfg, drop, demand, n_ap, loads)))
    except DropError:
        raise
    except Exception as e:
        raise DropError(seed, e) from e

    logger.debug("Drop finished", seed=seed, drop_index=drop_index, rows=len(rows))
    return rows
