"""
Large-scale path loss, Rayleigh fading and receiver noise.

Two large-scale models are supported: the indoor LTE model
``PL = 38.46 + 20 log10(d_in) + 37.6 log10(d) + L_p + L_s`` used by the simulator,
and the analytical power law ``H = L0 * d^-alpha``. Gains returned here exclude
transmit power.
"""
from enum import Enum
from typing import Optional, Union

import numpy as np
import structlog
from pydantic import Field

from smallcell.core.errors import ParameterError
from smallcell.core.models import ArrayModel, ChannelState, NetworkRealization
from smallcell.network.deployment import RngLike, as_generator, distance_matrix
from smallcell.utils.config import CarrierModel, PropagationConfig
from smallcell.utils.units import db_to_linear, dbm_to_watt

logger = structlog.get_logger(__name__)

ASSOCIATION_FLOOR_M = 1e-9


class Penetration(str, Enum):
    """Building entry point of an indoor link."""

    WALL = "wall"
    WINDOW = "window"


def penetration_loss_db(
    penetration: Union[Penetration, np.ndarray],
    wall_loss_db: float = 10.0,
    window_loss_db: float = 3.0,
) -> Union[float, np.ndarray]:
    """Penetration loss L_p; arrays are read as a wall mask (True = wall)."""
    if isinstance(penetration, Penetration):
        return wall_loss_db if penetration == Penetration.WALL else window_loss_db
    return np.where(np.asarray(penetration, dtype=bool), wall_loss_db, window_loss_db)


def path_loss_lte(
    d,
    d_in,
    penetration: Union[Penetration, np.ndarray],
    shadow_db=0.0,
    min_distance: float = 1.0,
    wall_loss_db: float = 10.0,
    window_loss_db: float = 3.0,
):
    """
    Indoor LTE path loss in dB.

    Distances below ``min_distance`` are clamped to it and logged.

    Args:
        d: AP-user distance (m), scalar or array
        d_in: AP-to-wall distance (m)
        penetration: Penetration type, or wall mask for arrays
        shadow_db: Shadowing term L_s (dB)
        min_distance: Smallest admissible distance (m)

    Returns:
        Path loss in dB, same shape as ``d``
    """
    d = np.asarray(d, dtype=float)
    short = d < min_distance
    if short.any():
        logger.debug("Distance clamped to minimum", count=int(short.sum()), minimum=min_distance)
        d = np.maximum(d, min_distance)
    loss = (
        38.46
        + 20.0 * np.log10(np.asarray(d_in, dtype=float))
        + 37.6 * np.log10(d)
        + penetration_loss_db(penetration, wall_loss_db, window_loss_db)
        + np.asarray(shadow_db, dtype=float)
    )
    return float(loss) if np.ndim(loss) == 0 else loss


def avg_power_law(d, l0: float, alpha: float):
    """
    Power-law average channel gain ``L0 * d^-alpha``.

    Raises:
        ParameterError: if any distance is not positive
    """
    d = np.asarray(d, dtype=float)
    if (d <= 0).any():
        raise ParameterError("power-law gain is undefined at zero distance")
    gain = l0 * np.power(d, -alpha)
    return float(gain) if np.ndim(gain) == 0 else gain


def sample_fading(h_avg, n_prbs: int, rng: RngLike) -> np.ndarray:
    """
    Rayleigh fading powers: ``n_prbs`` i.i.d. exponential variates with mean ``h_avg``.

    ``h_avg`` may be an array; the PRB axis is appended last.
    """
    if np.any(np.asarray(h_avg) < 0):
        raise ParameterError("average gain must be non-negative")
    gen = as_generator(rng)
    h_avg = np.asarray(h_avg, dtype=float)
    return gen.exponential(1.0, size=h_avg.shape + (n_prbs,)) * h_avg[..., None]


def noise_power(cfg: PropagationConfig) -> float:
    """Thermal noise plus noise figure over one PRB, in watts."""
    dbm = (
        cfg.noise_psd_dbm_per_hz + 10.0 * np.log10(cfg.prb_bandwidth_hz) + cfg.noise_figure_db
    )
    return float(dbm_to_watt(dbm))


class LinkParameters(ArrayModel):
    """Per-link large-scale draws held fixed for a whole drop."""

    d_in: np.ndarray = Field(description="AP-to-wall distance per link (m)")
    wall: np.ndarray = Field(description="True where the link enters through a wall")
    shadow_db: np.ndarray = Field(description="Log-normal shadowing per link (dB)")


class ChannelModel:
    """
    Builds the channel state of a drop for a given propagation configuration.
    """

    def __init__(self, cfg: PropagationConfig):
        """
        Initialize the channel model.

        Args:
            cfg: Propagation parameters
        """
        self.cfg = cfg

    def draw_link_parameters(self, n_aps: int, n_users: int, rng: RngLike) -> LinkParameters:
        """Draw d_in, penetration and shadowing for every (AP, user) link."""
        gen = as_generator(rng)
        shape = (n_aps, n_users)
        low, high = self.cfg.d_in_range
        return LinkParameters(
            d_in=gen.uniform(low, high, size=shape),
            wall=gen.random(shape) < 0.5,
            shadow_db=gen.normal(0.0, self.cfg.shadowing_sigma_db, size=shape),
        )

    def average_power(
        self, distances: np.ndarray, links: Optional[LinkParameters] = None
    ) -> tuple[np.ndarray, np.ndarray]:
        """
        Average gain matrix H and the mask of clamped links.

        Args:
            distances: AP-user distances, shape (L, K)
            links: Per-link draws; required for the LTE model

        Returns:
            Tuple of (H, clamped)
        """
        clamped = distances < self.cfg.min_distance_m
        d = np.maximum(distances, self.cfg.min_distance_m)
        gain_db = self.cfg.antenna_gain_db
        if self.cfg.carrier_model == CarrierModel.POWER_LAW:
            h = avg_power_law(d, self.cfg.l0, self.cfg.alpha) * db_to_linear(gain_db)
        else:
            if links is None:
                raise ParameterError("the LTE model needs per-link parameters")
            loss = path_loss_lte(
                d,
                links.d_in,
                links.wall,
                links.shadow_db,
                min_distance=self.cfg.min_distance_m,
                wall_loss_db=self.cfg.wall_loss_db,
                window_loss_db=self.cfg.window_loss_db,
            )
            h = db_to_linear(gain_db - loss)
        return np.asarray(h, dtype=float).reshape(distances.shape), clamped

    def association_gain_db(
        self, distances: np.ndarray, links: Optional[LinkParameters] = None
    ) -> np.ndarray:
        """
        Average gain in dB at the true distances, the score users are associated on.

        No minimum distance is applied, so a user within ``min_distance_m`` of
        several APs still picks the nearest. Only a 1 nm floor keeps the
        logarithm finite.
        """
        d = np.maximum(distances, ASSOCIATION_FLOOR_M)
        gain_db = self.cfg.antenna_gain_db
        if self.cfg.carrier_model == CarrierModel.POWER_LAW:
            score = gain_db + 10.0 * np.log10(self.cfg.l0) - 10.0 * self.cfg.alpha * np.log10(d)
        else:
            if links is None:
                raise ParameterError("the LTE model needs per-link parameters")
            score = gain_db - path_loss_lte(
                d,
                links.d_in,
                links.wall,
                links.shadow_db,
                min_distance=ASSOCIATION_FLOOR_M,
                wall_loss_db=self.cfg.wall_loss_db,
                window_loss_db=self.cfg.window_loss_db,
            )
        return np.asarray(score, dtype=float).reshape(distances.shape)

    def realize(
        self,
        realization: NetworkRealization,
        n_prbs: int,
        link_rng: RngLike,
        fading_rng: RngLike,
    ) -> ChannelState:
        """
        Channel state of a drop: H for every link and an independent fade per PRB.

        Args:
            realization: AP and user positions
            n_prbs: Number of PRBs N
            link_rng: Stream for d_in, penetration and shadowing
            fading_rng: Stream for the Rayleigh fades

        Returns:
            ChannelState with avg_power (L, K), its unclamped dB score for
            association, and inst_gain (L, K, N)
        """
        distances = distance_matrix(realization.aps, realization.users)
        links = None
        if self.cfg.carrier_model == CarrierModel.LTE_INDOOR:
            links = self.draw_link_parameters(realization.n_aps, realization.n_users, link_rng)
        h_avg, clamped = self.average_power(distances, links)
        if clamped.any():
            logger.debug(
                "Links below minimum distance clamped",
                count=int(clamped.sum()),
                minimum_m=self.cfg.min_distance_m,
            )
        return ChannelState(
            avg_power=h_avg,
            association_db=self.association_gain_db(distances, links),
            inst_gain=sample_fading(h_avg, n_prbs, fading_rng),
            noise_power=noise_power(self.cfg),
            clamped=clamped,
        )
