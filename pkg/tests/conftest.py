"""
Test configuration utilities.
"""
import os
import sys
from pathlib import Path

import pytest

# Add src directory to path for imports
src_path = Path(__file__).parent.parent / "src"
sys.path.insert(0, str(src_path))

from smallcell.utils.config import ExperimentConfig  # noqa: E402


@pytest.fixture(autouse=True)
def clean_env(monkeypatch):
    """Keep SMALLCELL_* variables of the calling shell out of the tests."""
    for name in list(os.environ):
        if name.startswith("SMALLCELL_"):
            monkeypatch.delenv(name)


@pytest.fixture
def small_config(tmp_path):
    """A network small enough for a drop to run in well under a second."""
    return ExperimentConfig(
        region_radius_m=50.0,
        demands_bps=[0.5e6, 1.5e6],
        n_ap_values=[6, 18],
        drops=3,
        base_seed=10,
        workers=1,
        output_dir=tmp_path / "results",
    )
