"""
Closed-form stochastic-geometry analysis used to cross-check the simulator.
"""
from smallcell.analytics.special import (
    binomial_cdf,
    poisson_cdf,
    regularized_gamma_p,
    regularized_gamma_q,
)
from smallcell.analytics.stochastic import (
    AnalyticsConfig,
    CountModel,
    ap_load_curve,
    cdf_ap_load,
    cdf_connection_distance,
    cdf_system_load,
    cdf_user_load,
    most_probable_distance,
    outage_curve,
    outage_probability,
    pdf_connection_distance,
    pmf_users_per_ap,
    rise_interval,
    system_load_curve,
    typical_user_load,
    user_load_curve,
)

__all__ = [
    "AnalyticsConfig",
    "CountModel",
    "ap_load_curve",
    "binomial_cdf",
    "cdf_ap_load",
    "cdf_connection_distance",
    "cdf_system_load",
    "cdf_user_load",
    "most_probable_distance",
    "outage_curve",
    "outage_probability",
    "pdf_connection_distance",
    "pmf_users_per_ap",
    "poisson_cdf",
    "regularized_gamma_p",
    "regularized_gamma_q",
    "rise_interval",
    "system_load_curve",
    "typical_user_load",
    "user_load_curve",
]
