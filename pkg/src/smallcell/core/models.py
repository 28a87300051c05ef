"""
Domain models shared by the simulation stages.

Array-valued fields hold numpy arrays; validators coerce inputs and enforce the
structural invariants of each type.
"""
import math
from enum import Enum
from typing import List, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

# Slack for floating-point comparisons in invariant checks.
EPS = 1e-9


class Scheme(str, Enum):
    """Spectrum allocation scheme."""

    HIERARCHICAL = "hierarchical"
    FIXED = "fixed"


class ArrayModel(BaseModel):
    """Base for models carrying numpy arrays."""

    model_config = ConfigDict(arbitrary_types_allowed=True)


def _as_points(v) -> np.ndarray:
    arr = np.asarray(v, dtype=float)
    if arr.size == 0:
        return np.zeros((0, 2))
    if arr.ndim != 2 or arr.shape[1] != 2:
        raise ValueError(f"expected an (n, 2) array of points, got shape {arr.shape}")
    return arr


class Region(BaseModel):
    """Disc on which APs and users are placed."""

    center: Tuple[float, float] = Field(default=(0.0, 0.0), description="Disc centre (m)")
    radius: float = Field(gt=0.0, description="Disc radius R_c (m)")

    @property
    def area(self) -> float:
        """Disc area in m^2."""
        return math.pi * self.radius**2

    def contains(self, points: np.ndarray, slack: float = 1e-9) -> np.ndarray:
        """Boolean mask of points lying inside the disc."""
        pts = _as_points(points)
        d = np.hypot(pts[:, 0] - self.center[0], pts[:, 1] - self.center[1])
        return d <= self.radius * (1.0 + slack)


class NetworkRealization(ArrayModel):
    """AP and user positions of one Monte Carlo drop."""

    aps: np.ndarray = Field(description="AP positions, shape (L, 2)")
    users: np.ndarray = Field(description="User positions, shape (K, 2)")
    lambda_f: float = Field(gt=0.0, description="AP density (1/m^2)")
    lambda_u: float = Field(gt=0.0, description="User density (1/m^2)")
    region: Region
    seed: Optional[int] = Field(default=None, description="Seed the drop was drawn with")

    @field_validator("aps", "users", mode="before")
    @classmethod
    def validate_points(cls, v):
        """Coerce to an (n, 2) float array."""
        return _as_points(v)

    @model_validator(mode="after")
    def validate_inside(self) -> "NetworkRealization":
        """Every point lies inside the region."""
        for name in ("aps", "users"):
            pts = getattr(self, name)
            if pts.size and not self.region.contains(pts).all():
                raise ValueError(f"{name} contain points outside the region")
        return self

    @property
    def n_aps(self) -> int:
        """Number of APs L."""
        return int(self.aps.shape[0])

    @property
    def n_users(self) -> int:
        """Number of users K."""
        return int(self.users.shape[0])


class ChannelState(ArrayModel):
    """Average and instantaneous channel power gains of a drop."""

    avg_power: np.ndarray = Field(description="H[l][k], shape (L, K)")
    inst_gain: np.ndarray = Field(description="h[l][k][n], shape (L, K, N)")
    noise_power: float = Field(gt=0.0, description="Noise power per PRB sigma^2 (W)")
    clamped: Optional[np.ndarray] = Field(
        default=None, description="Links whose distance was raised to the minimum"
    )
    association_db: Optional[np.ndarray] = Field(
        default=None, description="Unclamped average gain in dB that association ranks APs by"
    )

    @model_validator(mode="after")
    def validate_gains(self) -> "ChannelState":
        """Gains are non-negative and the tensors agree in shape."""
        if self.avg_power.ndim != 2 or self.inst_gain.ndim != 3:
            raise ValueError("avg_power must be 2-D and inst_gain 3-D")
        if self.inst_gain.shape[:2] != self.avg_power.shape:
            raise ValueError("inst_gain and avg_power disagree on (L, K)")
        if (self.avg_power < 0).any() or (self.inst_gain < 0).any():
            raise ValueError("channel gains must be non-negative")
        if self.association_db is not None and self.association_db.shape != self.avg_power.shape:
            raise ValueError("association_db and avg_power disagree on (L, K)")
        return self

    @property
    def n_prbs(self) -> int:
        """Number of PRBs N in the fading tensor."""
        return int(self.inst_gain.shape[2])

    @property
    def association_metric(self) -> np.ndarray:
        """Per-link score users are associated on; avg_power when no dB score was kept."""
        return self.avg_power if self.association_db is None else self.association_db


class Association(ArrayModel):
    """User-to-AP association partition {S_l}."""

    serving_ap: np.ndarray = Field(description="Serving AP index per user, shape (K,)")
    members: List[np.ndarray] = Field(description="User indices per AP")

    @model_validator(mode="after")
    def validate_partition(self) -> "Association":
        """Member sets are disjoint, cover all users, and agree with serving_ap."""
        self.serving_ap = np.asarray(self.serving_ap, dtype=int)
        self.members = [np.asarray(m, dtype=int) for m in self.members]
        flat = np.concatenate(self.members) if self.members else np.zeros(0, dtype=int)
        if len(flat) != len(self.serving_ap) or len(np.unique(flat)) != len(flat):
            raise ValueError("member sets do not partition the users")
        for ap, users in enumerate(self.members):
            if (self.serving_ap[users] != ap).any():
                raise ValueError(f"member set of AP {ap} disagrees with serving_ap")
        return self

    @classmethod
    def from_serving(cls, serving_ap: np.ndarray, n_aps: int) -> "Association":
        """Build the partition from a serving-AP vector."""
        serving_ap = np.asarray(serving_ap, dtype=int)
        members = [np.flatnonzero(serving_ap == ap) for ap in range(n_aps)]
        return cls(serving_ap=serving_ap, members=members)


class UserDemand(ArrayModel):
    """Requested rate per user."""

    rates: np.ndarray = Field(description="R_k in bit/s, shape (K,)")

    @field_validator("rates", mode="before")
    @classmethod
    def validate_rates(cls, v):
        """Rates must be positive."""
        arr = np.atleast_1d(np.asarray(v, dtype=float))
        if (arr <= 0).any():
            raise ValueError("requested rates must be positive")
        return arr

    @classmethod
    def uniform(cls, rate: float, n_users: int) -> "UserDemand":
        """Every user requests the same rate."""
        return cls(rates=np.full(n_users, float(rate)))


class KktState(ArrayModel):
    """Point of the Newton iteration on the load-estimation KKT system."""

    x: np.ndarray = Field(description="[P_1..P_M, n_1..n_M, mu_1..mu_M]")
    mu0: float = Field(description="Multiplier of the power constraint")
    residual: float = Field(ge=0.0, description="Max-norm of G(X) in scaled units")
    iterations: int = Field(default=0, ge=0)
    converged: bool = False


class LoadEstimate(ArrayModel):
    """Requested spectrum of one AP."""

    n: np.ndarray = Field(description="Fractional subchannels per member n_k")
    power: np.ndarray = Field(description="Power per member P_k (W)")
    solver: str = Field(default="equal_power", description="Estimator that produced the values")

    @model_validator(mode="after")
    def validate_nonnegative(self) -> "LoadEstimate":
        """Loads and powers are non-negative."""
        self.n = np.asarray(self.n, dtype=float)
        self.power = np.asarray(self.power, dtype=float)
        if (self.n < -EPS).any() or (self.power < -EPS).any():
            raise ValueError("loads and powers must be non-negative")
        return self

    @property
    def total(self) -> float:
        """AP load N_l = sum of member loads."""
        return float(self.n.sum())


class ChannelAllocation(BaseModel):
    """PRB sets granted to each AP."""

    prbs: List[List[int]] = Field(description="Sorted PRB indices per AP")
    requested: List[int] = Field(description="Requested PRB count per AP")
    n_prbs: int = Field(ge=1, description="PRB budget N")

    @model_validator(mode="after")
    def validate_indices(self) -> "ChannelAllocation":
        """PRB indices are in range and the lists agree in length."""
        if len(self.prbs) != len(self.requested):
            raise ValueError("prbs and requested must have one entry per AP")
        for ap, prbs in enumerate(self.prbs):
            if any(not 0 <= n < self.n_prbs for n in prbs):
                raise ValueError(f"AP {ap} holds a PRB index outside 0..{self.n_prbs - 1}")
            if len(set(prbs)) != len(prbs):
                raise ValueError(f"AP {ap} holds a PRB twice")
        return self

    @property
    def granted(self) -> List[int]:
        """Granted PRB count per AP."""
        return [len(p) for p in self.prbs]

    @property
    def satisfied(self) -> List[bool]:
        """Whether each AP got at least what it requested."""
        return [g >= r for g, r in zip(self.granted, self.requested)]


class Schedule(ArrayModel):
    """PRB shares and powers of one AP over its granted PRBs."""

    members: np.ndarray = Field(description="User indices, shape (M,)")
    prbs: np.ndarray = Field(description="Granted PRB indices, shape (Nbar,)")
    c: np.ndarray = Field(description="Fraction of PRB n given to member k, shape (M, Nbar)")
    p: np.ndarray = Field(
        description="Average power of member k on PRB n (W), shape (M, Nbar); time-shared "
        "PRBs carry p = c * P_tot / Nbar"
    )
    iterations: int = Field(
        default=0, ge=0, description="Greedy assignment steps plus accepted local-search moves"
    )

    @model_validator(mode="after")
    def validate_shares(self) -> "Schedule":
        """Shares lie in [0, 1], sum to at most one per PRB, and power sits on shares."""
        self.members = np.asarray(self.members, dtype=int)
        self.prbs = np.asarray(self.prbs, dtype=int)
        shape = (len(self.members), len(self.prbs))
        if self.c.shape != shape or self.p.shape != shape:
            raise ValueError(f"c and p must have shape {shape}")
        if (self.c < -EPS).any() or (self.c > 1 + EPS).any():
            raise ValueError("shares must lie in [0, 1]")
        if shape[0] and (self.c.sum(axis=0) > 1 + EPS).any():
            raise ValueError("a PRB is shared beyond its full capacity")
        if ((self.p > EPS) & (self.c <= 0)).any():
            raise ValueError("power allocated where no share is assigned")
        return self

    @property
    def total_power(self) -> float:
        """Sum of allocated power (W)."""
        return float(self.p.sum())

    @classmethod
    def empty(cls, members: np.ndarray, prbs: np.ndarray) -> "Schedule":
        """All-zero schedule."""
        shape = (len(members), len(prbs))
        return cls(members=members, prbs=prbs, c=np.zeros(shape), p=np.zeros(shape))


class AchievedRates(ArrayModel):
    """Rates achieved by a set of users."""

    rate: np.ndarray = Field(description="bit/s per user")
    normalized: np.ndarray = Field(description="rate / R_k per user")

    @field_validator("rate")
    @classmethod
    def validate_rate(cls, v):
        """Rates are non-negative."""
        arr = np.asarray(v, dtype=float)
        if (arr < 0).any():
            raise ValueError("rates must be non-negative")
        return arr


class DropMetrics(ArrayModel):
    """Per-drop performance of one scheme."""

    outage_fraction: float = Field(ge=0.0, le=1.0)
    min_rate: float = Field(ge=0.0, description="Minimum achieved rate (bit/s)")
    min_normalized: float = Field(ge=0.0)
    throughput: float = Field(ge=0.0, description="Sum of user rates (bit/s)")
    rates: np.ndarray = Field(description="Achieved rate per user")
    outage: np.ndarray = Field(description="Outage flag per user")


class ResultRow(BaseModel):
    """One (scheme, sweep point, drop) outcome; CSV column order follows field order."""

    scheme: Scheme
    demand_bps: float
    lambda_f: float
    lambda_u: float
    drop_seed: int
    outage_fraction: float
    min_rate_bps: float
    min_normalized: float
    throughput_bps: float
    mean_ap_load: float
    colors_used: int
    drop_index: int
    n_ap: int = Field(default=0, description="Baseline PRBs per AP; 0 for hierarchical")
    ap_shortfall: float = Field(
        default=0.0, description="Fraction of APs granted fewer PRBs than ceil(N_l)"
    )

    @classmethod
    def header(cls) -> List[str]:
        """CSV header in field order."""
        return list(cls.model_fields.keys())

    def sort_key(self) -> tuple:
        """Deterministic ordering for merged results."""
        return (self.scheme.value, self.lambda_u, self.demand_bps, self.n_ap, self.drop_index)


class AggregateRow(BaseModel):
    """Mean and standard error over the drops of one sweep point."""

    scheme: Scheme
    demand_bps: float
    lambda_f: float
    lambda_u: float
    n_ap: int
    drops: int = Field(ge=1)
    outage_mean: float
    outage_stderr: float
    min_rate_mean: float
    min_rate_stderr: float
    min_normalized_mean: float
    min_normalized_stderr: float
    throughput_mean: float
    throughput_stderr: float
    ap_shortfall_mean: float
    ap_shortfall_stderr: float
    mean_ap_load: float

    @classmethod
    def header(cls) -> List[str]:
        """CSV header in field order."""
        return list(cls.model_fields.keys())
