"""
Invariant and acceptance checks behind ``smallcell validate``.

The quick suite exercises each stage on small seeded fixtures in seconds. The
full suite adds Monte Carlo sweeps comparing the schemes with each other and
with the closed-form analysis.
"""
import itertools
import math
import tempfile
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence, Set

import networkx as nx
import numpy as np
import structlog
from pydantic import BaseModel, Field

from smallcell.allocation.coloring import dsatur, dsatur_color, expand_graph, is_proper
from smallcell.allocation.load import (
    LOG2E,
    estimate_load_equal_power,
    estimate_load_newton,
    kkt_jacobian,
    kkt_residual,
    user_load_at_power,
)
from smallcell.allocation.scheduling import greedy_maxmin, min_normalized_rate, round_robin
from smallcell.analytics.special import (
    poisson_cdf,
    poisson_pmf,
    regularized_gamma_p,
    regularized_gamma_q,
)
from smallcell.analytics.stochastic import (
    AnalyticsConfig,
    cdf_ap_load,
    cdf_connection_distance,
    cdf_user_load,
    outage_probability,
    rise_interval,
    typical_user_load,
    user_load_curve,
)
from smallcell.core.models import Region, ResultRow, Scheme
from smallcell.evaluation.metrics import ap_transmit_power
from smallcell.harness.pipeline import prepare_drop, run_drop, run_hierarchical
from smallcell.harness.sweep import SweepRunner, run_sweep
from smallcell.network.association import associate, connection_distances
from smallcell.network.deployment import deploy, distance_matrix, interior_mask
from smallcell.network.propagation import ChannelModel, noise_power
from smallcell.utils.config import (
    CarrierModel,
    DeploymentMode,
    ExperimentConfig,
    PropagationConfig,
    Scenario,
)

logger = structlog.get_logger(__name__)


class CheckResult(BaseModel):
    """Outcome of one validation check."""

    name: str
    passed: bool
    value: Optional[float] = Field(default=None, description="Measured quantity")
    threshold: Optional[float] = Field(default=None, description="Bound it was held to")
    detail: str = ""


def _check(name: str, passed: bool, value=None, threshold=None, detail: str = "") -> CheckResult:
    result = CheckResult(
        name=name,
        passed=bool(passed),
        value=None if value is None else float(value),
        threshold=threshold,
        detail=detail,
    )
    log = logger.info if result.passed else logger.warning
    log("Check finished", check=name, passed=result.passed, value=result.value)
    return result


def ks_distance(samples: np.ndarray, cdf: Callable[[np.ndarray], np.ndarray]) -> float:
    """Kolmogorov-Smirnov distance between samples and a continuous CDF."""
    x = np.sort(np.asarray(samples, dtype=float))
    n = len(x)
    f = np.asarray(cdf(x), dtype=float)
    upper = np.arange(1, n + 1) / n - f
    lower = f - np.arange(0, n) / n
    return float(max(upper.max(), lower.max()))


def chromatic_number(adjacency: Dict[int, Set[int]]) -> int:
    """Exact chromatic number by backtracking over k = 1, 2, ..."""
    vertices = sorted(adjacency, key=lambda v: -len(adjacency[v]))
    if not vertices:
        return 0

    def colorable(k: int) -> bool:
        colors: Dict[int, int] = {}

        def place(i: int) -> bool:
            if i == len(vertices):
                return True
            v = vertices[i]
            used = {colors[u] for u in adjacency[v] if u in colors}
            for c in range(k):
                if c not in used:
                    colors[v] = c
                    if place(i + 1):
                        return True
                    del colors[v]
            return False

        return place(0)

    return next(k for k in range(1, len(vertices) + 1) if colorable(k))


def best_assignment(gains: np.ndarray, demands: np.ndarray, p_tot: float, sigma2: float, bandwidth: float) -> float:
    """Max-min normalized rate over every whole-PRB assignment (exhaustive)."""
    m, n_prbs = gains.shape
    r = bandwidth * np.log2(1.0 + (p_tot / n_prbs) * gains / sigma2)
    best = 0.0
    for owners in itertools.product(range(m), repeat=n_prbs):
        rates = np.zeros(m)
        for n, k in enumerate(owners):
            rates[k] += r[k, n]
        best = max(best, float(np.min(rates / demands)))
    return best


# Quick checks


def check_incomplete_gamma() -> CheckResult:
    """P + Q = 1 and Poisson CDFs agree with direct summation."""
    worst = 0.0
    for s in (0.5, 1.0, 2.5, 7.0, 20.0, 51.0):
        for x in (0.0, 0.1, 1.0, 5.0, 19.0, 50.0, 120.0):
            worst = max(worst, abs(regularized_gamma_p(s, x) + regularized_gamma_q(s, x) - 1.0))
    for mean in (0.5, 2.0, 10.0, 50.0):
        for k in range(0, 80, 7):
            direct = math.fsum(poisson_pmf(j, mean) for j in range(k + 1))
            worst = max(worst, abs(poisson_cdf(k, mean) - direct))
    example = abs(poisson_cdf(3, 2.0) - 0.857123460498547)
    return _check(
        "incomplete_gamma",
        worst <= 1e-10 and example <= 1e-10,
        value=max(worst, example),
        threshold=1e-10,
        detail="P+Q=1, Poisson CDF vs direct sum, Pois(3; 2)",
    )


def check_coloring_fixture() -> CheckResult:
    """Three-AP fixture: 4 colors, the two outer APs reuse, the middle one is disjoint."""
    graph = expand_graph(3, {(0, 1), (0, 2)}, [0.6, 2.4, 2.7])
    coloring = dsatur_color(graph, max_colors=50)
    by_ap = [sorted(coloring.colors[v] for v in graph.nodes_of(ap)) for ap in range(3)]
    ok = (
        coloring.colors_used == 4
        and by_ap[1] == by_ap[2]
        and not set(by_ap[0]) & set(by_ap[1])
        and is_proper(graph, coloring)
    )
    return _check("coloring_fixture", ok, value=coloring.colors_used, threshold=4, detail=str(by_ap))


def check_dsatur_random(fixtures: int = 1000, seed: int = 7) -> CheckResult:
    """DSATUR is proper and never beats the exact chromatic number on small geometric graphs."""
    rng = np.random.default_rng(seed)
    bad = 0
    for i in range(fixtures):
        size = int(rng.integers(1, 10))
        g = nx.random_geometric_graph(size, float(rng.uniform(0.2, 0.7)), seed=int(rng.integers(2**31)))
        adjacency = {v: set(g.neighbors(v)) for v in g.nodes}
        colors = dsatur(adjacency, max_colors=max(size, 1))
        proper = all(colors[u] != colors[v] for u, v in g.edges)
        used = len(set(colors.values()))
        if not proper or None in colors.values() or used < chromatic_number(adjacency):
            bad += 1
    return _check("dsatur_random_graphs", bad == 0, value=bad, threshold=0, detail=f"{fixtures} fixtures")


def check_newton(instances: int = 200, seed: int = 11) -> CheckResult:
    """Newton meets the KKT tolerance, keeps rates tight, and never needs more than equal power."""
    rng = np.random.default_rng(seed)
    prop = PropagationConfig()
    sigma2 = noise_power(prop)
    bandwidth = prop.prb_bandwidth_hz
    p_tot, n_prbs = 0.1, 50
    worst_res = 0.0
    worst_rate = 0.0
    worse_than_equal = 0
    worst_jac = 0.0
    for _ in range(instances):
        m = int(rng.integers(1, 4))
        snr = 10.0 ** rng.uniform(2.0, 6.0, size=m)
        gains = snr * sigma2 / p_tot
        demands = rng.uniform(0.2e6, 2.0e6, size=m)
        equal = estimate_load_equal_power(demands, gains, p_tot, n_prbs, sigma2, bandwidth)
        estimate, state = estimate_load_newton(demands, gains, p_tot, sigma2, bandwidth, n_prbs)
        worst_res = max(worst_res, state.residual)
        achieved = estimate.n * bandwidth * np.log2(1.0 + estimate.power * gains / (estimate.n * sigma2))
        worst_rate = max(worst_rate, float(np.max(np.abs(achieved / demands - 1.0))))
        if equal.total <= n_prbs:
            reference = equal.total
        else:
            # P_tot / N per subchannel overbooks P_tot; price the booked split instead
            reference = float(np.sum(user_load_at_power(demands, gains, equal.power, sigma2, bandwidth)))
        if estimate.total > reference * (1.0 + 1e-6):
            worse_than_equal += 1

        a = p_tot * gains / sigma2
        c = bandwidth * LOG2E / demands
        x = np.concatenate((estimate.power / p_tot, estimate.n, state.x[2 * m :] * bandwidth * LOG2E))
        jac = kkt_jacobian(x, a, c)
        step = 1e-7
        for j in range(3 * m):
            dx = np.zeros(3 * m)
            dx[j] = step * max(abs(x[j]), 1.0)
            fd = (kkt_residual(x + dx, a, c) - kkt_residual(x - dx, a, c)) / (2 * dx[j])
            scale = max(float(np.max(np.abs(jac[:, j]))), 1.0)
            worst_jac = max(worst_jac, float(np.max(np.abs(fd - jac[:, j]))) / scale)

    ok = worst_res <= 1e-8 and worst_rate <= 1e-6 and worse_than_equal == 0 and worst_jac <= 1e-5
    return _check(
        "newton_load_estimation",
        ok,
        value=worst_res,
        threshold=1e-8,
        detail=(
            f"rate mismatch {worst_rate:.2e}, above equal power {worse_than_equal}/{instances}, "
            f"jacobian error {worst_jac:.2e}"
        ),
    )


def check_scheduler(instances: int = 1000, seed: int = 13) -> CheckResult:
    """Greedy against round-robin and the exhaustive optimum on M=2, Nbar=3 instances."""
    rng = np.random.default_rng(seed)
    p_tot, sigma2, bandwidth = 30.0, 1.0, 180e3
    not_below_rr = 0
    near_optimal = 0
    for _ in range(instances):
        gains = rng.exponential(1.0, size=(2, 3))
        demands = rng.uniform(0.5e6, 2.0e6, size=2)
        members, prbs = [0, 1], [0, 1, 2]
        greedy = greedy_maxmin(members, prbs, gains, demands, p_tot, sigma2, bandwidth)
        rr = round_robin(members, prbs, demands, p_tot)
        t_greedy = min_normalized_rate(greedy, gains, demands, p_tot, sigma2, bandwidth)
        t_rr = min_normalized_rate(rr, gains, demands, p_tot, sigma2, bandwidth)
        t_best = best_assignment(gains, demands, p_tot, sigma2, bandwidth)
        not_below_rr += t_greedy >= t_rr
        near_optimal += t_greedy >= 0.9 * t_best
    frac_rr = not_below_rr / instances
    frac_opt = near_optimal / instances
    return _check(
        "greedy_scheduler",
        frac_rr == 1.0 and frac_opt >= 0.95,
        value=frac_opt,
        threshold=0.95,
        detail=f"greedy >= round-robin in {frac_rr:.3f} of instances, within 10% of optimum in {frac_opt:.3f}",
    )


def _power_law_config(lambda_f: float, ratio: float, radius: float) -> ExperimentConfig:
    return ExperimentConfig(
        lambda_f=lambda_f,
        lambda_u_ratios=[ratio],
        region_radius_m=radius,
        propagation=PropagationConfig(carrier_model=CarrierModel.POWER_LAW),
        workers=1,
    )


def _guard(lambda_f: float) -> float:
    # Beyond this distance a user has a closer AP with probability 1 - e^-30.
    return math.sqrt(30.0 / (math.pi * lambda_f))


def sample_connection_distances(
    lambda_f: float, target: int, seed: int = 1, users_per_ap: float = 1.0
) -> np.ndarray:
    """
    Connection distances of interior users under power-law association.

    Users of one drop share its AP layout, so each drop contributes only about
    one user per AP and the sample pools many independent drops.
    """
    guard = _guard(lambda_f)
    radius = max(100.0, 3.0 * guard)
    cfg = _power_law_config(lambda_f, users_per_ap, radius)
    region = Region(radius=radius)
    model = ChannelModel(cfg.propagation)
    found: List[np.ndarray] = []
    total = 0
    drop = 0
    while total < target:
        real = deploy(cfg.lambda_f, users_per_ap * lambda_f, region, seed + drop)
        drop += 1
        score = model.association_gain_db(distance_matrix(real.aps, real.users))
        d = connection_distances(real, associate(real, score))
        d = d[interior_mask(real.users, region, guard)]
        found.append(d)
        total += len(d)
    logger.debug("Sampled connection distances", lambda_f=lambda_f, users=total, drops=drop)
    return np.concatenate(found)[:target]


def check_connection_distance(users: int = 100_000, threshold: float = 0.01) -> CheckResult:
    """Empirical connection distances against 1 - exp(-lambda_f pi d^2)."""
    lambda_f = 1.0 / 100.0
    d = sample_connection_distances(lambda_f, users)
    ks = ks_distance(d, lambda x: cdf_connection_distance(x, lambda_f))
    return _check("connection_distance_ks", ks < threshold, value=ks, threshold=threshold, detail=f"{len(d)} users")


def check_orthogonality(seed: int = 3) -> CheckResult:
    """Graph-adjacent APs never share a PRB and radiate nothing outside their grant."""
    cfg = ExperimentConfig(workers=1)
    drop = prepare_drop(cfg, seed)
    outcome = run_hierarchical(cfg, drop, 1.0e6)
    power = ap_transmit_power(outcome.schedules, cfg.n_prbs)
    violations = 0
    for i, j in outcome.graph.edges:
        violations += len(set(outcome.allocation.prbs[i]) & set(outcome.allocation.prbs[j]))
        violations += int(np.count_nonzero(power[i] * power[j]))
    for ap, prbs in enumerate(outcome.allocation.prbs):
        outside = np.ones(cfg.n_prbs, dtype=bool)
        outside[prbs] = False
        violations += int(np.count_nonzero(power[ap, outside]))
    return _check("hierarchical_orthogonality", violations == 0, value=violations, threshold=0)


def check_drop_determinism(seed: int = 5) -> CheckResult:
    """The same seed reproduces the same rows."""
    cfg = ExperimentConfig(workers=1, demands_bps=[1.0e6])
    first = run_drop(cfg, seed)
    second = run_drop(cfg, seed)
    same = [r.model_dump() for r in first] == [r.model_dump() for r in second]
    return _check("drop_determinism", same, detail=f"{len(first)} rows")


def quick_checks() -> List[CheckResult]:
    """Fast invariant suite."""
    return [
        check_incomplete_gamma(),
        check_coloring_fixture(),
        check_dsatur_random(),
        check_newton(),
        check_scheduler(),
        check_connection_distance(),
        check_orthogonality(),
        check_drop_determinism(),
    ]


# Full checks


async def _sweep(cfg: ExperimentConfig) -> List[ResultRow]:
    return await SweepRunner(cfg).run()


def _means(rows: Sequence[ResultRow], field: str, key: Callable[[ResultRow], float]) -> Dict[float, float]:
    groups: Dict[float, List[float]] = {}
    for row in rows:
        groups.setdefault(key(row), []).append(getattr(row, field))
    return {k: float(np.mean(v)) for k, v in sorted(groups.items())}


def check_user_load_cdf(users: int = 100_000, rate: float = 5.0e6) -> CheckResult:
    """Simulated equal-power user loads against the closed-form CDF at two AP densities."""
    prop = PropagationConfig(carrier_model=CarrierModel.POWER_LAW)
    base = ExperimentConfig(propagation=prop, workers=1)
    worst = 0.0
    widths = []
    for lambda_f in (1.0 / 100.0, 1.0 / 1000.0):
        acfg = AnalyticsConfig.from_experiment(base.model_copy(update={"lambda_f": lambda_f}), 10.0)
        d = sample_connection_distances(lambda_f, users)
        loads = rate / (acfg.bandwidth * np.log2(1.0 + acfg.gamma0 * d ** (-acfg.alpha)))
        worst = max(worst, ks_distance(loads, lambda n: cdf_user_load(n, rate, acfg)))
        grid, cdf = user_load_curve(rate, acfg, points=4000)
        widths.append(rise_interval(cdf, grid))
    ok = worst < 0.02 and widths[0] < widths[1]
    return _check(
        "user_load_cdf",
        ok,
        value=worst,
        threshold=0.02,
        detail=f"rise interval {widths[0]:.3f} at 1/100 vs {widths[1]:.3f} at 1/1000",
    )


def check_ap_load_cdf(drops: int = 50, rate: float = 1.0e6) -> CheckResult:
    """
    Grid-mode AP loads against the binomial AP-load CDF; the PPP deviation is reported.

    The closed form reads an AP load as the user count ``floor(N_l / n*)``, a
    step function. Both sides are therefore evaluated on its lattice ``m * n*``:
    the model against the share of interior APs serving at most ``m`` users.
    """
    prop = PropagationConfig(carrier_model=CarrierModel.POWER_LAW)
    distances = {}
    for mode in (DeploymentMode.GRID, DeploymentMode.PPP):
        cfg = ExperimentConfig(propagation=prop, deployment_mode=mode, workers=1)
        acfg = AnalyticsConfig.from_experiment(cfg)
        unit = typical_user_load(rate, acfg)
        region = Region(radius=cfg.region_radius_m)
        counts: List[int] = []
        for i in range(drops):
            drop = prepare_drop(cfg, cfg.base_seed + i)
            inner = np.flatnonzero(interior_mask(drop.realization.aps, region, 2.0 * cfg.d_tilde_m))
            counts.extend(len(drop.association.members[ap]) for ap in inner)
        counts_arr = np.asarray(counts)
        lattice = np.arange(int(counts_arr.max()) + 1)
        empirical = np.array([np.mean(counts_arr <= m) for m in lattice])
        analytic = np.array([cdf_ap_load(m * unit, acfg, rate) for m in lattice])
        distances[mode] = float(np.max(np.abs(empirical - analytic)))
    grid_gap = distances[DeploymentMode.GRID]
    return _check(
        "ap_load_cdf",
        grid_gap < 0.05,
        value=grid_gap,
        threshold=0.05,
        detail=f"PPP deviation {distances[DeploymentMode.PPP]:.3f}",
    )


async def check_fixed_minimum(cfg: ExperimentConfig) -> CheckResult:
    """Fixed-allocation outage over N_AP first falls, then rises."""
    sweep_cfg = cfg.model_copy(
        update={
            "scenario": Scenario.FIXED,
            "lambda_u_ratios": [3.0],
            "demands_bps": [1.5e6],
            "n_ap_values": list(range(2, min(cfg.n_prbs, 50) + 1, 4)),
        }
    )
    rows = await _sweep(sweep_cfg)
    means = _means(rows, "outage_fraction", lambda r: r.n_ap)
    values = np.array(list(means.values()))
    smooth = np.convolve(np.pad(values, 1, mode="edge"), np.ones(3) / 3.0, mode="valid")
    best = int(np.argmin(smooth))
    ok = 0 < best < len(smooth) - 1
    return _check(
        "fixed_allocation_minimum",
        ok,
        value=list(means)[best],
        detail=f"smoothed outage {np.round(smooth, 4).tolist()}",
    )


async def check_scheme_comparison(cfg: ExperimentConfig, resamples: int = 2000) -> CheckResult:
    """Hierarchical beats the N_AP = 18 baseline on outage, minimum rate and throughput."""
    sweep_cfg = cfg.model_copy(
        update={
            "scenario": Scenario.BOTH,
            "lambda_u_ratios": [3.0],
            "demands_bps": [0.5e6, 1.0e6],
            "n_ap_values": [min(18, cfg.n_prbs)],
        }
    )
    rows = await _sweep(sweep_cfg)
    rng = np.random.default_rng(cfg.base_seed)
    lower_bounds = []
    for demand in sweep_cfg.demands_bps:
        hier = {r.drop_index: r for r in rows if r.scheme == Scheme.HIERARCHICAL and r.demand_bps == demand}
        fixed = {r.drop_index: r for r in rows if r.scheme == Scheme.FIXED and r.demand_bps == demand}
        common = sorted(set(hier) & set(fixed))
        diff = np.array([fixed[i].outage_fraction - hier[i].outage_fraction for i in common])
        boot = rng.choice(diff, size=(resamples, len(diff))).mean(axis=1)
        lower_bounds.append(float(np.quantile(boot, 0.05)))

    top = max(sweep_cfg.demands_bps)
    min_rate = {
        s: float(np.mean([r.min_rate_bps for r in rows if r.scheme == s and r.demand_bps == top]))
        for s in (Scheme.HIERARCHICAL, Scheme.FIXED)
    }
    throughput = {
        s: float(np.mean([r.throughput_bps for r in rows if r.scheme == s])) for s in min_rate
    }
    ratio = min_rate[Scheme.HIERARCHICAL] / max(min_rate[Scheme.FIXED], 1e-12)
    ok = (
        min(lower_bounds) > 0.0
        and ratio >= 1.5
        and throughput[Scheme.HIERARCHICAL] >= throughput[Scheme.FIXED]
    )
    return _check(
        "scheme_comparison",
        ok,
        value=ratio,
        threshold=1.5,
        detail=(
            f"outage gain 95% lower bounds {np.round(lower_bounds, 4).tolist()}, "
            f"throughput {throughput[Scheme.HIERARCHICAL]:.4g} vs {throughput[Scheme.FIXED]:.4g}"
        ),
    )


async def check_analytic_outage(cfg: ExperimentConfig) -> CheckResult:
    """
    Closed-form outage probability against the Monte Carlo coloring shortfall.

    Every demand point is compared. A point agrees when the two values are
    within a factor of 2, or when they differ by no more than two standard
    errors of the simulated mean, which covers points where either side is 0.
    The simulated curve may dip by two standard errors of the difference of
    neighbouring means and still count as non-decreasing.
    """
    sweep_cfg = cfg.model_copy(
        update={
            "scenario": Scenario.HIERARCHICAL,
            "lambda_u_ratios": [5.0],
            "propagation": cfg.propagation.model_copy(update={"carrier_model": CarrierModel.POWER_LAW}),
        }
    )
    rows = await _sweep(sweep_cfg)
    groups: Dict[float, List[float]] = {}
    for row in rows:
        groups.setdefault(row.demand_bps, []).append(row.ap_shortfall)
    demands = sorted(groups)
    sim = np.array([np.mean(groups[r]) for r in demands])
    se = np.array([
        np.std(groups[r], ddof=1) / math.sqrt(len(groups[r])) if len(groups[r]) > 1 else 0.0
        for r in demands
    ])
    acfg = AnalyticsConfig.from_experiment(sweep_cfg, 5.0)
    ana = np.array([outage_probability(acfg, r) for r in demands])

    dip_allowed = 2.0 * np.sqrt(se[1:] ** 2 + se[:-1] ** 2)
    monotone = bool(np.all(np.diff(ana) >= -1e-12) and np.all(np.diff(sim) >= -dip_allowed))
    within_factor = np.maximum(sim, ana) <= 2.0 * np.minimum(sim, ana)
    within_noise = np.abs(sim - ana) <= 2.0 * se
    mismatches = int(np.count_nonzero(~(within_factor | within_noise)))
    return _check(
        "analytic_outage",
        monotone and mismatches == 0,
        value=mismatches,
        threshold=0,
        detail=(
            f"simulated {np.round(sim, 4).tolist()} (se {np.round(se, 4).tolist()}), "
            f"analytic {np.round(ana, 4).tolist()}"
        ),
    )


async def check_csv_determinism(cfg: ExperimentConfig) -> CheckResult:
    """Two runs of the same small sweep write byte-identical CSV files."""
    small = cfg.model_copy(update={"drops": min(cfg.drops, 3), "demands_bps": [1.0e6]})
    contents = []
    with tempfile.TemporaryDirectory() as tmp:
        for i in range(2):
            result = await run_sweep(small.model_copy(update={"output_dir": Path(tmp) / str(i)}))
            contents.append(result.results_csv.read_bytes())
    return _check("csv_determinism", contents[0] == contents[1], detail=f"{len(contents[0])} bytes")


async def full_checks(cfg: ExperimentConfig) -> List[CheckResult]:
    """Quick suite plus the sweep-level acceptance checks."""
    results = quick_checks()
    results.append(check_user_load_cdf())
    results.append(check_ap_load_cdf())
    results.append(await check_fixed_minimum(cfg))
    results.append(await check_scheme_comparison(cfg))
    results.append(await check_analytic_outage(cfg))
    results.append(await check_csv_determinism(cfg))
    return results
