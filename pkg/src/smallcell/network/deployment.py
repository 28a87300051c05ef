"""
AP and user placement on a disc.

Positions come from independent homogeneous Poisson point processes (count drawn
from Poisson(lambda * area), then placed uniformly), from a fixed count of
uniform points, or, for APs, from a square lattice with equal coverage areas.
"""
import math
from typing import Union

import numpy as np
import structlog
from scipy.spatial.distance import cdist

from smallcell.core.errors import ParameterError
from smallcell.core.models import NetworkRealization, Region
from smallcell.utils.config import DeploymentMode

logger = structlog.get_logger(__name__)

RngLike = Union[int, np.random.Generator]

# Give up after this many consecutive empty drops.
MAX_REGENERATIONS = 1000


def as_generator(rng: RngLike) -> np.random.Generator:
    """Wrap a seed in a PCG64 generator; pass generators through."""
    if isinstance(rng, np.random.Generator):
        return rng
    return np.random.default_rng(rng)


def sample_uniform_disc(count: int, region: Region, rng: RngLike) -> np.ndarray:
    """
    Place ``count`` i.i.d. uniform points on the disc.

    The radius is ``R_c * sqrt(U)`` so that the point density is flat in area.
    """
    if count < 0:
        raise ParameterError(f"point count must be non-negative, got {count}")
    gen = as_generator(rng)
    radius = region.radius * np.sqrt(gen.random(count))
    theta = 2.0 * math.pi * gen.random(count)
    cx, cy = region.center
    return np.column_stack((cx + radius * np.cos(theta), cy + radius * np.sin(theta)))


def sample_ppp(lam: float, region: Region, rng: RngLike) -> np.ndarray:
    """
    Sample a homogeneous Poisson point process on the disc.

    Args:
        lam: Density (points per m^2)
        region: Disc to sample on
        rng: Seed or generator; a fixed seed yields a bit-identical result

    Returns:
        Array of shape (n, 2) with n ~ Poisson(lam * pi * R_c^2)
    """
    if lam <= 0:
        raise ParameterError(f"density must be positive, got {lam}")
    gen = as_generator(rng)
    count = int(gen.poisson(lam * region.area))
    return sample_uniform_disc(count, region, gen)


def sample_grid(lam: float, region: Region) -> np.ndarray:
    """
    Square lattice of spacing 1/sqrt(lam) centred on the disc, clipped to it.

    Every interior AP owns the same square coverage area 1/lam.
    """
    if lam <= 0:
        raise ParameterError(f"density must be positive, got {lam}")
    spacing = 1.0 / math.sqrt(lam)
    half = int(math.floor(region.radius / spacing))
    offsets = np.arange(-half, half + 1) * spacing
    xs, ys = np.meshgrid(offsets, offsets, indexing="ij")
    pts = np.column_stack((xs.ravel() + region.center[0], ys.ravel() + region.center[1]))
    return pts[region.contains(pts, slack=0.0)]


def pairwise_distance(a, b) -> float:
    """Euclidean distance between two points (m)."""
    return float(math.hypot(b[0] - a[0], b[1] - a[1]))


def distance_matrix(aps: np.ndarray, users: np.ndarray) -> np.ndarray:
    """Distances between every AP (rows) and user (columns)."""
    if len(aps) == 0 or len(users) == 0:
        return np.zeros((len(aps), len(users)))
    return cdist(aps, users)


def interior_mask(points: np.ndarray, region: Region, guard: float) -> np.ndarray:
    """Points at least ``guard`` metres inside the region boundary."""
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    d = np.hypot(pts[:, 0] - region.center[0], pts[:, 1] - region.center[1])
    return d <= region.radius - guard


def _draw(
    mode: DeploymentMode, lambda_f: float, lambda_u: float, region: Region, seed: int
) -> tuple:
    ap_seq, user_seq = np.random.SeedSequence(seed).spawn(2)
    ap_rng = np.random.default_rng(ap_seq)
    user_rng = np.random.default_rng(user_seq)

    if mode == DeploymentMode.FIXED_COUNT:
        aps = sample_uniform_disc(round(lambda_f * region.area), region, ap_rng)
        users = sample_uniform_disc(round(lambda_u * region.area), region, user_rng)
    elif mode == DeploymentMode.GRID:
        aps = sample_grid(lambda_f, region)
        users = sample_ppp(lambda_u, region, user_rng)
    else:
        aps = sample_ppp(lambda_f, region, ap_rng)
        users = sample_ppp(lambda_u, region, user_rng)
    return aps, users


def deploy(
    lambda_f: float,
    lambda_u: float,
    region: Region,
    seed: int,
    mode: DeploymentMode = DeploymentMode.PPP,
) -> NetworkRealization:
    """
    Draw a non-empty network realization.

    A drop with no APs or no users is discarded and redrawn with ``seed + 1``;
    the realization records the seed that was finally used.

    Args:
        lambda_f: AP density (1/m^2)
        lambda_u: User density (1/m^2)
        region: Disc to deploy on
        seed: Drop seed
        mode: Sampling mode

    Returns:
        NetworkRealization with at least one AP and one user
    """
    if lambda_f <= 0 or lambda_u <= 0:
        raise ParameterError(f"densities must be positive, got {lambda_f}, {lambda_u}")

    current = seed
    for _ in range(MAX_REGENERATIONS):
        aps, users = _draw(mode, lambda_f, lambda_u, region, current)
        if len(aps) and len(users):
            return NetworkRealization(
                aps=aps,
                users=users,
                lambda_f=lambda_f,
                lambda_u=lambda_u,
                region=region,
                seed=current,
            )
        logger.warning(
            "Empty drop regenerated", seed=current, n_aps=len(aps), n_users=len(users)
        )
        current += 1
    raise ParameterError(
        f"no non-empty realization after {MAX_REGENERATIONS} seeds starting at {seed}"
    )
