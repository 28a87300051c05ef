"""
Unit conversions between decibel and linear scales.
"""
import numpy as np
import numpy.typing as npt

ArrayLike = npt.ArrayLike


def db_to_linear(value_db: ArrayLike) -> np.ndarray:
    """Convert a power ratio in dB to a linear ratio."""
    return np.power(10.0, np.asarray(value_db, dtype=float) / 10.0)


def linear_to_db(value: ArrayLike) -> np.ndarray:
    """Convert a linear power ratio to dB."""
    return 10.0 * np.log10(np.asarray(value, dtype=float))


def dbm_to_watt(value_dbm: ArrayLike) -> np.ndarray:
    """Convert dBm to watts."""
    return db_to_linear(value_dbm) * 1e-3


def watt_to_dbm(value_w: ArrayLike) -> np.ndarray:
    """Convert watts to dBm."""
    return linear_to_db(np.asarray(value_w, dtype=float) * 1e3)
