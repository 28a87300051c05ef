"""
Step 1: cell association by highest long-term average received power.
"""
import numpy as np
import structlog

from smallcell.core.errors import ParameterError
from smallcell.core.models import Association, NetworkRealization

logger = structlog.get_logger(__name__)


def associate(realization: NetworkRealization, avg_power: np.ndarray) -> Association:
    """
    Attach every user to the AP with the largest average power.

    Any increasing transform of H ranks APs the same way, so the unclamped dB
    score of :class:`ChannelState` can be passed instead. ``np.argmax`` returns
    the first maximum, so ties go to the lowest AP index.

    Args:
        realization: AP and user positions
        avg_power: H[l][k] or its dB score, one row per AP and one column per user

    Returns:
        Association partition

    Raises:
        ParameterError: if there are no APs or H is malformed
    """
    h = np.asarray(avg_power, dtype=float)
    if realization.n_aps == 0:
        raise ParameterError("cannot associate users without access points")
    if h.shape != (realization.n_aps, realization.n_users):
        raise ParameterError(
            f"avg_power has shape {h.shape}, expected {(realization.n_aps, realization.n_users)}"
        )
    if not np.isfinite(h).all():
        raise ParameterError("avg_power contains non-finite entries")

    serving = np.argmax(h, axis=0) if realization.n_users else np.zeros(0, dtype=int)
    assoc = Association.from_serving(serving, realization.n_aps)
    logger.debug(
        "Users associated",
        n_users=realization.n_users,
        n_aps=realization.n_aps,
        idle_aps=sum(1 for m in assoc.members if len(m) == 0),
    )
    return assoc


def connection_distances(realization: NetworkRealization, assoc: Association) -> np.ndarray:
    """Distance from each user to its serving AP (m)."""
    serving_pos = realization.aps[assoc.serving_ap]
    return np.hypot(*(realization.users - serving_pos).T)
