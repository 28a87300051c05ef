"""
Closed-form distributions of the hierarchical scheme under Poisson AP and user
locations: connection distance, user load, AP load, system load and outage.

Every user is assumed to sit at the most probable connection distance when
loads are aggregated, so per-AP and per-neighbourhood loads are user counts
scaled by the typical user load n*.
"""
import math
from enum import Enum
from typing import Optional, Tuple

import numpy as np
import structlog
from pydantic import BaseModel, Field

from smallcell.analytics.special import binomial_cdf, binomial_pmf, poisson_cdf, poisson_pmf
from smallcell.core.errors import ParameterError
from smallcell.network.propagation import noise_power
from smallcell.utils.config import ExperimentConfig

logger = structlog.get_logger(__name__)

# Tail mass of the neighbour-count distribution below which the outage sum stops.
TAIL_MASS = 1e-12

# Guards floor(x) against x landing a rounding error below an integer.
FLOOR_SLACK = 1e-9


class CountModel(str, Enum):
    """Distribution of the number of APs or users in an area."""

    POISSON = "poisson"
    BINOMIAL = "binomial"


class AnalyticsConfig(BaseModel):
    """Parameters of the closed-form analysis."""

    lambda_f: float = Field(gt=0.0, description="AP density (1/m^2)")
    lambda_u: float = Field(gt=0.0, description="User density (1/m^2)")
    alpha: float = Field(gt=2.0, description="Path-loss exponent")
    gamma0: float = Field(gt=0.0, description="SNR scale P_tot L0 / (N sigma^2)")
    bandwidth: float = Field(default=180e3, gt=0.0, description="PRB bandwidth B (Hz)")
    n_prbs: int = Field(default=50, ge=1, description="PRB budget N")
    d_tilde: float = Field(default=20.0, gt=0.0, description="AP coverage radius (m)")
    region_radius: float = Field(default=100.0, gt=0.0, description="Region radius R_c (m)")

    @property
    def area(self) -> float:
        """Region area (m^2)."""
        return math.pi * self.region_radius**2

    @property
    def expected_users(self) -> float:
        """Expected user count K."""
        return self.lambda_u * self.area

    @property
    def expected_aps(self) -> float:
        """Expected AP count L."""
        return self.lambda_f * self.area

    @property
    def eta(self) -> float:
        """Users per AP, K / L."""
        return self.expected_users / self.expected_aps

    @property
    def r_tilde(self) -> float:
        """Interference range 2 * d_tilde (m)."""
        return 2.0 * self.d_tilde

    @classmethod
    def from_experiment(
        cls, cfg: ExperimentConfig, lambda_u_ratio: Optional[float] = None
    ) -> "AnalyticsConfig":
        """
        Derive the analysis parameters from an experiment configuration.

        Args:
            cfg: Experiment settings; the power-law exponent and L0 are used
            lambda_u_ratio: User density as a multiple of lambda_f (first sweep value by default)
        """
        ratio = lambda_u_ratio if lambda_u_ratio is not None else cfg.lambda_u_ratios[0]
        prop = cfg.propagation
        gamma0 = cfg.tx_power_w * prop.l0 / (cfg.n_prbs * noise_power(prop))
        return cls(
            lambda_f=cfg.lambda_f,
            lambda_u=ratio * cfg.lambda_f,
            alpha=prop.alpha,
            gamma0=gamma0,
            bandwidth=prop.prb_bandwidth_hz,
            n_prbs=cfg.n_prbs,
            d_tilde=cfg.d_tilde_m,
            region_radius=cfg.region_radius_m,
        )


def expected_ap_count(lambda_f: float, region_radius: float) -> float:
    """Mean number of APs on a disc, lambda_f * pi * R_c^2."""
    return lambda_f * math.pi * region_radius**2


def cdf_connection_distance(d, lambda_f: float):
    """``F_D(d) = 1 - exp(-lambda_f pi d^2)``; zero for negative distances."""
    d = np.asarray(d, dtype=float)
    out = np.where(d > 0, -np.expm1(-lambda_f * math.pi * np.square(np.maximum(d, 0.0))), 0.0)
    return float(out) if out.ndim == 0 else out


def pdf_connection_distance(d, lambda_f: float):
    """``f_D(d) = 2 pi lambda_f d exp(-lambda_f pi d^2)``."""
    d = np.asarray(d, dtype=float)
    out = np.where(
        d > 0, 2.0 * math.pi * lambda_f * d * np.exp(-lambda_f * math.pi * np.square(d)), 0.0
    )
    return float(out) if out.ndim == 0 else out


def most_probable_distance(lambda_f: float) -> float:
    """Mode of the connection-distance density, ``sqrt(1 / (2 pi lambda_f))``."""
    if lambda_f <= 0:
        raise ParameterError(f"lambda_f must be positive, got {lambda_f}")
    return math.sqrt(1.0 / (2.0 * math.pi * lambda_f))


def cdf_user_load(n, rate: float, cfg: AnalyticsConfig):
    """
    CDF of a user's load under equal power and power-law attenuation.

    A user needs at most ``n`` subchannels iff it lies within
    ``((2^(R / (n B)) - 1) / gamma0)^(-1/alpha)`` of its AP.
    """
    n = np.asarray(n, dtype=float)
    positive = n > 0
    safe_n = np.where(positive, n, 1.0)
    with np.errstate(over="ignore"):
        snr_needed = np.expm1(math.log(2.0) * rate / (safe_n * cfg.bandwidth))
    radius = np.power(snr_needed / cfg.gamma0, -1.0 / cfg.alpha)
    out = np.where(positive, cdf_connection_distance(radius, cfg.lambda_f), 0.0)
    return float(out) if out.ndim == 0 else out


def typical_user_load(rate: float, cfg: AnalyticsConfig) -> float:
    """Load n* of a user at the most probable distance d*."""
    d_star = most_probable_distance(cfg.lambda_f)
    return rate / (cfg.bandwidth * math.log2(1.0 + cfg.gamma0 * d_star ** (-cfg.alpha)))


def pmf_users_per_ap(m: int, users: int, aps: int) -> float:
    """Binomial probability that ``m`` of ``users`` users pick a given AP out of ``aps``."""
    if aps < 1:
        raise ParameterError(f"need at least one AP, got {aps}")
    return binomial_pmf(m, users, 1.0 / aps)


def _count_at(value: float, unit: float) -> int:
    return int(math.floor(value / unit + FLOOR_SLACK))


def cdf_ap_load(
    n_l: float, cfg: AnalyticsConfig, rate: float, model: CountModel = CountModel.BINOMIAL
) -> float:
    """
    CDF of an AP's load, read as a user count at ``floor(n_l / n*)``.

    ``BINOMIAL`` uses round(K) trials with success 1/round(L); ``POISSON`` the
    large-K approximation with mean eta.
    """
    if n_l < 0:
        return 0.0
    count = _count_at(n_l, typical_user_load(rate, cfg))
    if model == CountModel.POISSON:
        return poisson_cdf(count, cfg.eta)
    trials = max(1, round(cfg.expected_users))
    aps = max(1, round(cfg.expected_aps))
    return binomial_cdf(count, trials, 1.0 / aps)


def cdf_system_load(n_tilde: float, l_tilde: int, cfg: AnalyticsConfig, rate: float) -> float:
    """
    CDF of the load of ``l_tilde`` mutually interfering APs.

    The sum of ``l_tilde`` Poisson(eta) user counts is Poisson(l_tilde * eta),
    evaluated at ``floor(n_tilde / n*)`` through the incomplete gamma function.
    """
    if l_tilde < 1:
        raise ParameterError(f"l_tilde must be at least 1, got {l_tilde}")
    if n_tilde < 0:
        return 0.0
    return poisson_cdf(_count_at(n_tilde, typical_user_load(rate, cfg)), l_tilde * cfg.eta)


def neighbour_count_pmf(
    count: int, cfg: AnalyticsConfig, model: CountModel = CountModel.POISSON
) -> float:
    """Probability that ``count`` APs lie within r~ of a reference AP."""
    if model == CountModel.BINOMIAL:
        trials = max(1, round(cfg.expected_aps))
        p = min(1.0, (cfg.r_tilde / cfg.region_radius) ** 2)
        return binomial_pmf(count, trials, p)
    return poisson_pmf(count, cfg.lambda_f * math.pi * cfg.r_tilde**2)


def outage_probability(
    cfg: AnalyticsConfig, rate: float, model: CountModel = CountModel.POISSON
) -> float:
    """
    Probability that a reference AP and its interfering neighbours need more
    than the N available PRBs.

    ``P_o = 1 - sum_{L~=1..L} Pois(N / n*, L~ eta) P(L~ APs within r~)``; the sum
    stops once the remaining neighbour-count mass drops below ``TAIL_MASS``.
    """
    budget_count = _count_at(cfg.n_prbs, typical_user_load(rate, cfg))
    max_count = max(1, round(cfg.expected_aps))
    covered = 0.0
    seen = neighbour_count_pmf(0, cfg, model)
    for l_tilde in range(1, max_count + 1):
        weight = neighbour_count_pmf(l_tilde, cfg, model)
        seen += weight
        covered += poisson_cdf(budget_count, l_tilde * cfg.eta) * weight
        if 1.0 - seen < TAIL_MASS and weight < TAIL_MASS:
            break
    return float(min(1.0, max(0.0, 1.0 - covered)))


def user_load_curve(
    rate: float, cfg: AnalyticsConfig, grid: Optional[np.ndarray] = None, points: int = 200
) -> Tuple[np.ndarray, np.ndarray]:
    """User-load CDF on a grid spanning zero to eight times n*."""
    if grid is None:
        grid = np.linspace(0.0, 8.0 * typical_user_load(rate, cfg), points)
    return grid, np.asarray(cdf_user_load(grid, rate, cfg), dtype=float)


def ap_load_curve(
    rate: float,
    cfg: AnalyticsConfig,
    grid: Optional[np.ndarray] = None,
    model: CountModel = CountModel.BINOMIAL,
    points: int = 200,
) -> Tuple[np.ndarray, np.ndarray]:
    """AP-load CDF on a grid spanning zero to four times the mean AP load."""
    if grid is None:
        n_star = typical_user_load(rate, cfg)
        grid = np.linspace(0.0, 4.0 * max(cfg.eta, 1.0) * n_star, points)
    return grid, np.array([cdf_ap_load(float(x), cfg, rate, model) for x in grid])


def system_load_curve(
    rate: float,
    l_tilde: int,
    cfg: AnalyticsConfig,
    grid: Optional[np.ndarray] = None,
    points: int = 200,
) -> Tuple[np.ndarray, np.ndarray]:
    """System-load CDF for ``l_tilde`` interfering APs."""
    if grid is None:
        n_star = typical_user_load(rate, cfg)
        grid = np.linspace(0.0, 3.0 * l_tilde * max(cfg.eta, 1.0) * n_star, points)
    return grid, np.array([cdf_system_load(float(x), l_tilde, cfg, rate) for x in grid])


def outage_curve(
    rates, cfg: AnalyticsConfig, model: CountModel = CountModel.POISSON
) -> Tuple[np.ndarray, np.ndarray]:
    """Analytic outage probability for every demand in ``rates``."""
    rates = np.asarray(rates, dtype=float)
    return rates, np.array([outage_probability(cfg, float(r), model) for r in rates])


def rise_interval(cdf: np.ndarray, grid: np.ndarray, low: float = 0.05, high: float = 0.95) -> float:
    """
    Width of the grid interval over which a CDF climbs from ``low`` to ``high``.

    Crossings are linearly interpolated between grid points.
    """
    cdf = np.maximum.accumulate(np.asarray(cdf, dtype=float))
    grid = np.asarray(grid, dtype=float)
    if cdf[-1] < high or cdf[0] > low:
        raise ParameterError("grid does not cover the requested CDF levels")

    def crossing(level: float) -> float:
        i = int(np.searchsorted(cdf, level, side="left"))
        if i == 0:
            return float(grid[0])
        span = cdf[i] - cdf[i - 1]
        frac = (level - cdf[i - 1]) / span if span > 0 else 0.0
        return float(grid[i - 1] + frac * (grid[i] - grid[i - 1]))

    return crossing(high) - crossing(low)
