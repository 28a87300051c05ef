"""
Core module for smallcell.

This module contains:
- Domain models for realizations, channels, loads, allocations and schedules
- The exception hierarchy
"""

from smallcell.core.errors import (
    ConvergenceError,
    DropError,
    ParameterError,
    SingularMatrixError,
    SmallCellError,
)
from smallcell.core.models import (
    AchievedRates,
    AggregateRow,
    Association,
    ChannelAllocation,
    ChannelState,
    DropMetrics,
    KktState,
    LoadEstimate,
    NetworkRealization,
    Region,
    ResultRow,
    Schedule,
    Scheme,
    UserDemand,
)

__all__ = [
    "AchievedRates",
    "AggregateRow",
    "Association",
    "ChannelAllocation",
    "ChannelState",
    "ConvergenceError",
    "DropError",
    "DropMetrics",
    "KktState",
    "LoadEstimate",
    "NetworkRealization",
    "ParameterError",
    "Region",
    "ResultRow",
    "Schedule",
    "Scheme",
    "SingularMatrixError",
    "SmallCellError",
    "UserDemand",
]
