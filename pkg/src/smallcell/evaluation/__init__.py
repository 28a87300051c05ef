"""
Realized rates under interference, outage metrics and the fixed-allocation baseline.
"""
from smallcell.evaluation.metrics import (
    ap_transmit_power,
    drop_metrics,
    evaluate_scheme,
    fixed_allocation,
    interference_map,
)

__all__ = [
    "ap_transmit_power",
    "drop_metrics",
    "evaluate_scheme",
    "fixed_allocation",
    "interference_map",
]
