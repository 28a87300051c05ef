"""
Utility functions and helpers for the smallcell simulator.
"""

__all__ = ["config", "logging", "units"]
