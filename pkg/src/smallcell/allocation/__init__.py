"""
Spectrum allocation stages: per-AP load estimation (Step 2), centralized graph
coloring (Step 3) and per-AP max-min scheduling (Step 4).
"""
from smallcell.allocation.coloring import (
    allocation_from_coloring,
    ap_outage_from_allocation,
    build_interference_graph,
    dsatur_color,
)
from smallcell.allocation.load import (
    aggregate_ap_loads,
    estimate_ap_loads,
    estimate_load_equal_power,
    estimate_load_newton,
    user_load_equal_power,
)
from smallcell.allocation.scheduling import achieved_rates, fractional_refine, greedy_maxmin

__all__ = [
    "achieved_rates",
    "aggregate_ap_loads",
    "allocation_from_coloring",
    "ap_outage_from_allocation",
    "build_interference_graph",
    "dsatur_color",
    "estimate_ap_loads",
    "estimate_load_equal_power",
    "estimate_load_newton",
    "fractional_refine",
    "greedy_maxmin",
    "user_load_equal_power",
]
