"""
Experiment harness: per-drop pipeline, sweep runner and validation suite.
"""
from smallcell.harness.pipeline import prepare_drop, run_drop, run_fixed, run_hierarchical
from smallcell.harness.sweep import SweepRunner, aggregate, run_sweep
from smallcell.harness.validation import CheckResult, full_checks, quick_checks

__all__ = [
    "CheckResult",
    "SweepRunner",
    "aggregate",
    "full_checks",
    "prepare_drop",
    "quick_checks",
    "run_drop",
    "run_fixed",
    "run_hierarchical",
    "run_sweep",
]
