"""
Adapters for result persistence and export.
"""
from smallcell.adapters.database import DatabaseManager, ResultDAO

__all__ = ["DatabaseManager", "ResultDAO"]
