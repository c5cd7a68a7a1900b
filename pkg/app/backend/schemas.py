"""
Pydantic schemas for validated configuration and serialized results.
Separates the file/CLI contract from the numeric types in models.py.
"""
import math
from statistics import median
from typing import Optional, List, Literal

from pydantic import BaseModel, Field, field_validator, model_validator

MethodName = Literal["spline2", "spline0", "levant", "hgo"]
ScenarioName = Literal["full", "online"]

ALL_METHODS: List[str] = ["spline2", "spline0", "levant", "hgo"]

# Minimum prefix length before each method produces an estimate
METHOD_MIN_KNOTS = {"spline2": 5, "spline0": 2, "levant": 1, "hgo": 1}


# ============== Scenario ==============

class ScenarioSpec(BaseModel):
    """One sampling/noise configuration of the test signal."""
    h: float = Field(gt=0, description="Nominal sampling step (s)")
    sigma: float = Field(ge=0, description="Measurement noise standard deviation")
    horizon: float = Field(default=1.95, gt=0, description="Time horizon T (s)")
    seed: int = Field(default=0, ge=0, lt=2**64)
    signal_id: Literal["benchmark"] = "benchmark"

    class Config:
        frozen = True


# ============== Estimators ==============

class EstimatorConfig(BaseModel):
    """Settings for a single estimation run (CLI `estimate` or one grid cell)."""
    method: MethodName = "spline2"
    lam: float = Field(default=1e-4, ge=0)
    levant_L: float = Field(default=2.5, gt=0)
    hgo_eps: Optional[float] = Field(default=None, gt=0)
    hgo_sat: float = Field(default=2.5, gt=0)
    refactor_every: int = Field(default=0, ge=0)
    dense_per_interval: int = Field(default=10, ge=1)
    online: bool = False

    @property
    def is_spline(self) -> bool:
        return self.method in ("spline2", "spline0")

    @property
    def order(self) -> Optional[int]:
        return {"spline2": 1, "spline0": 0}.get(self.method)


class LevantParams(BaseModel):
    L: float = Field(default=2.5, gt=0, description="Bound on |x''| (signal/s^2)")


class HgoParams(BaseModel):
    eps: float = Field(gt=0, description="Bandwidth parameter (s)")
    sat: float = Field(default=2.5, gt=0, description="Saturation level on the derivative output")


# ============== Benchmark grid ==============

class BenchRow(BaseModel):
    """One (h, σ) row of the experiment grid, with optional per-row overrides."""
    h: float = Field(gt=0)
    sigma: float = Field(ge=0)
    label: Optional[str] = None
    lam: Optional[float] = Field(default=None, ge=0)
    lam_zero: Optional[float] = Field(default=None, ge=0)
    hgo_eps: Optional[float] = Field(default=None, gt=0)

    @model_validator(mode="after")
    def default_label(self):
        if not self.label:
            self.label = f"h={self.h:g}, sigma={self.sigma:g}"
        return self


class BenchConfig(BaseModel):
    rows: List[BenchRow]
    seeds: int = Field(default=10, ge=1)
    base_seed: int = Field(default=0, ge=0)
    tuning_seed: int = Field(default=9_999_991, ge=0)
    horizon: float = Field(default=1.95, gt=0)
    lam: float = Field(default=1e-4, ge=0)
    lam_zero: Optional[float] = Field(default=None, ge=0)
    levant_L: float = Field(default=2.5, gt=0)
    hgo_sat: float = Field(default=2.5, gt=0)
    hgo_eps: Optional[float] = Field(default=None, gt=0)
    methods: List[MethodName] = Field(default_factory=lambda: list(ALL_METHODS))
    scenarios: List[ScenarioName] = Field(default_factory=lambda: ["full", "online"])
    refactor_every: int = Field(default=0, ge=0)
    workers: int = Field(default=1, ge=1)

    @field_validator("rows")
    @classmethod
    def rows_not_empty(cls, v: List[BenchRow]) -> List[BenchRow]:
        if not v:
            raise ValueError("At least one grid row is required")
        return v

    @model_validator(mode="after")
    def tuning_seed_is_separate(self):
        if self.base_seed <= self.tuning_seed < self.base_seed + self.seeds:
            raise ValueError(
                f"tuning_seed {self.tuning_seed} overlaps evaluation seeds "
                f"{self.base_seed}..{self.base_seed + self.seeds - 1}"
            )
        return self

    @property
    def seed_list(self) -> List[int]:
        return list(range(self.base_seed, self.base_seed + self.seeds))

    def estimator_for(self, row: BenchRow, method: str, hgo_eps: Optional[float] = None) -> EstimatorConfig:
        """Resolve row overrides into the EstimatorConfig of one grid cell."""
        lam = row.lam if row.lam is not None else self.lam
        if method == "spline0":
            if row.lam_zero is not None:
                lam = row.lam_zero
            elif self.lam_zero is not None:
                lam = self.lam_zero
        return EstimatorConfig(
            method=method,
            lam=lam,
            levant_L=self.levant_L,
            hgo_eps=hgo_eps,
            hgo_sat=self.hgo_sat,
            refactor_every=self.refactor_every,
        )


# ============== Results ==============

def _nanmedian(values: List[float]) -> float:
    finite = [v for v in values if v is not None and not math.isnan(v)]
    return median(finite) if finite else float("nan")


class ExperimentResult(BaseModel):
    """Aggregated RMSEs of one method on one grid row."""
    label: str
    scenario: ScenarioSpec
    method: MethodName
    seeds: List[int]
    per_seed_full: List[float] = Field(default_factory=list)
    per_seed_online: List[float] = Field(default_factory=list)
    hgo_eps: Optional[float] = None
    error: Optional[str] = None

    @property
    def rmse_full(self) -> float:
        return _nanmedian(self.per_seed_full)

    @property
    def rmse_online(self) -> float:
        return _nanmedian(self.per_seed_online)


# ============== Recursive state snapshot ==============

class StateSnapshot(BaseModel):
    """Self-describing JSON form of a RecursiveState, for resuming a stream."""
    kind: Literal["spline-diff/recursive-state"] = "spline-diff/recursive-state"
    version: int = 1
    order: Literal[0, 1]
    lam: float
    knots: List[float]
    values: List[float]
    z_hat: List[float]
    a_inv: List[List[float]]
    b_vec: Optional[List[float]] = None
    last_row: Optional[List[float]] = None
    update_count: int = 0
    refactor_every: int = 0

    @model_validator(mode="after")
    def consistent_sizes(self):
        k = len(self.knots)
        if len(self.values) != k or len(self.z_hat) != k or len(self.a_inv) != k:
            raise ValueError("Snapshot arrays disagree with the knot count")
        if self.order == 0 and self.b_vec is None:
            raise ValueError("Zero-order snapshot requires b_vec")
        if self.order == 1 and self.last_row is None:
            raise ValueError("Quadratic snapshot requires last_row")
        return self
