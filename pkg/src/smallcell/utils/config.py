"""
Configuration management for the smallcell simulator.
"""
import hashlib
import json
import os
from enum import Enum
from pathlib import Path
from typing import Any, List, Optional, Tuple

from pydantic import BaseModel, Field, field_validator, model_validator
from pydantic_settings import BaseSettings, SettingsConfigDict

# Distance-independent term of the indoor LTE path-loss model at 1 m.
LTE_REFERENCE_LOSS_DB = 38.46


class Scenario(str, Enum):
    """Which schemes a sweep evaluates."""

    HIERARCHICAL = "hierarchical"
    FIXED = "fixed"
    BOTH = "both"
    ANALYZE = "analyze"


class DeploymentMode(str, Enum):
    """How AP and user positions are drawn for a drop."""

    PPP = "ppp"
    FIXED_COUNT = "fixed_count"
    GRID = "grid"


class CarrierModel(str, Enum):
    """Large-scale propagation model."""

    LTE_INDOOR = "lte_indoor"
    POWER_LAW = "power_law"


class LoadSolver(str, Enum):
    """Per-AP load estimator."""

    EQUAL_POWER = "equal_power"
    NEWTON = "newton"


class PropagationConfig(BaseModel):
    """Radio propagation and receiver noise parameters."""

    carrier_model: CarrierModel = Field(
        default=CarrierModel.LTE_INDOOR, description="Path-loss model used by the simulator"
    )
    alpha: float = Field(default=3.0, gt=2.0, description="Power-law path-loss exponent")
    l0: float = Field(
        default=10.0 ** (-LTE_REFERENCE_LOSS_DB / 10.0),
        gt=0.0,
        description="Power-law gain at the 1 m reference distance (linear)",
    )
    shadowing_sigma_db: float = Field(
        default=10.0, ge=0.0, description="Log-normal shadowing standard deviation"
    )
    wall_loss_db: float = Field(default=10.0, description="External wall penetration loss")
    window_loss_db: float = Field(default=3.0, description="Window penetration loss")
    d_in_range: Tuple[float, float] = Field(
        default=(1.0, 5.0), description="Range of the AP-to-wall distance d_in in metres"
    )
    min_distance_m: float = Field(default=1.0, gt=0.0, description="Minimum AP-user distance")
    noise_psd_dbm_per_hz: float = Field(default=-174.0, description="Noise spectral density")
    noise_figure_db: float = Field(default=9.0, ge=0.0, description="UE noise figure")
    prb_bandwidth_hz: float = Field(default=180e3, gt=0.0, description="PRB bandwidth B")
    antenna_gain_db: float = Field(default=0.0, description="Antenna gain (no-op)")
    antenna_config: str = Field(default="1x1", description="Antenna configuration (no-op)")

    @field_validator("d_in_range")
    @classmethod
    def validate_d_in_range(cls, v: Tuple[float, float]) -> Tuple[float, float]:
        """d_in must be an increasing range of positive distances."""
        low, high = v
        if not 0.0 < low <= high:
            raise ValueError(f"d_in_range must satisfy 0 < min <= max, got {v}")
        return v


class LoadEstimationConfig(BaseModel):
    """Step 2 solver settings."""

    solver: LoadSolver = Field(default=LoadSolver.NEWTON, description="Load estimator")
    tol: float = Field(default=1e-8, gt=0.0, description="KKT residual tolerance (max-norm)")
    max_iter: int = Field(default=100, ge=1, description="Newton iteration limit")
    max_halvings: int = Field(default=40, ge=0, description="Backtracking step halvings")


class SchedulingConfig(BaseModel):
    """Step 4 scheduler settings."""

    refine: bool = Field(default=False, description="Run the fractional time-share refinement")
    refine_tol: float = Field(default=1e-9, gt=0.0, description="Bisection tolerance on t")


class ExperimentConfig(BaseSettings):
    """
    Configuration of one simulation experiment.

    Settings can be overridden via environment variables with the SMALLCELL_ prefix;
    nested sections use a double underscore (SMALLCELL_PROPAGATION__ALPHA=3.5).
    """

    model_config = SettingsConfigDict(
        env_prefix="SMALLCELL_",
        env_file=".env",
        env_file_encoding="utf-8",
        env_nested_delimiter="__",
    )

    scenario: Scenario = Field(default=Scenario.BOTH, description="Schemes to evaluate")

    # Radio resources
    n_prbs: int = Field(default=50, ge=1, description="PRBs available to the network (N)")
    tx_power_dbm: float = Field(default=20.0, description="AP transmit power P_tot")
    d_tilde_m: float = Field(default=20.0, gt=0.0, description="AP coverage radius d~")

    # Geometry and densities
    region_radius_m: float = Field(default=100.0, gt=0.0, description="Region radius R_c")
    lambda_f: float = Field(default=1.0 / 200.0, gt=0.0, description="AP density (1/m^2)")
    lambda_u_ratios: List[float] = Field(
        default_factory=lambda: [3.0], min_length=1, description="User density as a multiple of lambda_f"
    )
    deployment_mode: DeploymentMode = Field(
        default=DeploymentMode.PPP, description="Position sampling mode"
    )

    # Sweep
    demands_bps: List[float] = Field(
        default_factory=lambda: [0.5e6, 1.0e6, 1.5e6, 2.0e6, 2.5e6, 3.0e6],
        min_length=1,
        description="Common user demand R sweep (bit/s)",
    )
    n_ap_values: List[int] = Field(
        default_factory=lambda: [18], min_length=1, description="Fixed-allocation PRBs per AP"
    )
    freeze_fixed_allocation: bool = Field(
        default=False, description="Draw the baseline PRB subsets once per experiment"
    )
    drops: int = Field(default=200, ge=1, description="Monte Carlo drops per sweep point")
    base_seed: int = Field(default=1, ge=0, description="Seed of drop 0")

    # Stage settings
    propagation: PropagationConfig = Field(default_factory=PropagationConfig)
    load_estimation: LoadEstimationConfig = Field(default_factory=LoadEstimationConfig)
    scheduling: SchedulingConfig = Field(default_factory=SchedulingConfig)

    # Execution
    workers: int = Field(
        default_factory=lambda: os.cpu_count() or 1, ge=1, description="Worker processes"
    )
    output_dir: Path = Field(default=Path("results"), description="Directory for result files")

    # Logging
    log_level: str = Field(default="INFO", description="Logging level")
    log_format: str = Field(default="json", description="Log format (json or text)")

    @field_validator("demands_bps")
    @classmethod
    def validate_demands(cls, v: List[float]) -> List[float]:
        """Demands must be positive."""
        if any(r <= 0 for r in v):
            raise ValueError("all demands must be positive")
        return v

    @field_validator("lambda_u_ratios")
    @classmethod
    def validate_ratios(cls, v: List[float]) -> List[float]:
        """User-to-AP density ratios must be positive."""
        if any(r <= 0 for r in v):
            raise ValueError("all lambda_u ratios must be positive")
        return v

    @model_validator(mode="after")
    def validate_n_ap(self) -> "ExperimentConfig":
        """Every baseline N_AP must lie in 1..N."""
        bad = [n for n in self.n_ap_values if not 1 <= n <= self.n_prbs]
        if bad:
            raise ValueError(f"n_ap_values {bad} outside 1..{self.n_prbs}")
        return self

    @property
    def tx_power_w(self) -> float:
        """Transmit power P_tot in watts."""
        return 10.0 ** (self.tx_power_dbm / 10.0) * 1e-3

    def digest(self) -> str:
        """Short stable hash of everything that affects simulated results."""
        payload = self.model_dump(
            mode="json", exclude={"workers", "output_dir", "log_level", "log_format"}
        )
        blob = json.dumps(payload, sort_keys=True).encode("utf-8")
        return hashlib.sha256(blob).hexdigest()[:16]


def load_config(config_file: Optional[str] = None, **overrides: Any) -> ExperimentConfig:
    """
    Load configuration from environment, .env file, or JSON file.

    Args:
        config_file: Optional path to a JSON configuration file
        **overrides: Explicit values (e.g. CLI flags) that win over file and environment

    Returns:
        ExperimentConfig instance with loaded configuration
    """
    overrides = {k: v for k, v in overrides.items() if v is not None}
    if config_file and Path(config_file).exists():
        with open(config_file, "r") as f:
            config_data = json.load(f)
        config_data.update(overrides)
        return ExperimentConfig(**config_data)
    return ExperimentConfig(**overrides)
