"""
Radio network model: where APs and users are, what the channels look like, and
which AP serves which user (Step 1).
"""
from smallcell.network.association import associate, connection_distances
from smallcell.network.deployment import deploy, pairwise_distance, sample_ppp
from smallcell.network.propagation import ChannelModel, noise_power

__all__ = [
    "ChannelModel",
    "associate",
    "connection_distances",
    "deploy",
    "noise_power",
    "pairwise_distance",
    "sample_ppp",
]
