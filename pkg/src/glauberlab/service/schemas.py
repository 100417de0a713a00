"""Request and response models for the experiment service."""

from __future__ import annotations

from typing import Optional, Union

from pydantic import BaseModel, ConfigDict, Field

Rational = Union[int, float, str]


class StrictModel(BaseModel):
    model_config = ConfigDict(extra="forbid")


class HealthResponse(StrictModel):
    status: str
    package: str
    version: str


class SimulateRequest(StrictModel):
    dim: int = Field(ge=1)
    side: int = Field(ge=1)
    p: float = Field(ge=0.0, le=1.0)
    alpha: float = Field(default=0.5, ge=0.0, le=1.0)
    seed: int = 0
    horizon: float = Field(gt=0.0)
    boundary: str = "torus"
    trace_points: int = Field(default=9, ge=2)


class SimulateResponse(StrictModel):
    config: dict
    outcome: str
    stabilized: bool
    settle_time: Optional[float]
    total_flips: int
    final_magnetization: float
    magnetization_trace: list


class BootstrapRequest(StrictModel):
    dim: int = Field(ge=1)
    side: int = Field(ge=1)
    r: Rational
    k: int = Field(default=0, ge=0)
    m: Rational = 0
    steps: Optional[int] = Field(default=None, ge=0)
    p: float = Field(default=0.1, ge=0.0, le=1.0)
    seed: int = 0


class BootstrapResponse(StrictModel):
    config: dict
    n_vertices: int
    initial_size: int
    final_size: int
    stage_sizes: list
    converged: bool
    percolates: bool


class CoupleRequest(StrictModel):
    dim: int = Field(ge=1)
    side: Optional[int] = Field(default=None, ge=1)
    p: Optional[float] = Field(default=None, gt=0.5, lt=1.0)
    eps: Optional[Rational] = None
    alpha: float = Field(default=0.5, ge=0.0, le=1.0)
    seed: int = 0
    replicas: int = Field(default=1, ge=1)
    time_d: Optional[float] = Field(default=None, ge=0.0)
    horizon_end: Optional[float] = Field(default=None, gt=0.0)
    inner_side: Optional[int] = Field(default=None, ge=1)
    outer_side: Optional[int] = Field(default=None, ge=1)
    T: Optional[float] = Field(default=None, gt=0.0)


class CoupleResult(StrictModel):
    replica: int
    leak: bool
    escape: bool
    growth_settled: bool
    enlarged_settled: bool
    counts: dict
    good: Optional[bool] = None
    breach: Optional[bool] = None
    core_plus_at_end: Optional[bool] = None


class CoupleResponse(StrictModel):
    config: dict
    mode: str
    results: list


class BlocksRequest(StrictModel):
    dim: int = Field(ge=1)
    global_side: int = Field(ge=1)
    inner_side: int = Field(ge=1)
    outer_side: Optional[int] = Field(default=None, ge=1)
    p: float = Field(gt=0.0, lt=1.0)
    eps: Optional[Rational] = None
    T: Optional[float] = Field(default=None, gt=0.0)
    seed: int = 0
    jobs: int = Field(default=1, ge=1)
    separation_trials: int = Field(default=400, ge=0)


class BlocksResponse(StrictModel):
    config: dict
    block_dims: list
    provenance: str
    p_effective: float
    n_blocks: int
    block_spins: list
    omega: Optional[dict]


class SweepRequest(StrictModel):
    process: str
    dim: int = Field(ge=1)
    side: int = Field(ge=1)
    ps: list
    replicas: int = Field(default=200, ge=1)
    seed: int = 0
    max_T: Optional[float] = Field(default=None, gt=0.0)
    r: Optional[int] = Field(default=None, ge=1)
    alpha: float = Field(default=0.5, ge=0.0, le=1.0)
    boundary: str = "torus"
    jobs: int = Field(default=1, ge=1)


class SweepResponse(StrictModel):
    config: dict
    records: list


class BisectRequest(StrictModel):
    process: str
    dim: int = Field(ge=1)
    side: int = Field(ge=1)
    lo: float = Field(default=0.0, ge=0.0, le=1.0)
    hi: float = Field(default=1.0, ge=0.0, le=1.0)
    target: float = Field(default=0.5, gt=0.0, lt=1.0)
    tol: float = Field(default=1 / 64, gt=0.0)
    replicas: int = Field(default=200, ge=1)
    seed: int = 0
    max_T: Optional[float] = Field(default=None, gt=0.0)
    r: Optional[int] = Field(default=None, ge=1)
    alpha: float = Field(default=0.5, ge=0.0, le=1.0)
    boundary: str = "torus"
    jobs: int = Field(default=1, ge=1)


class BisectResponse(StrictModel):
    config: dict
    p_hat: float
    bracket: list
    target: float
    tol: float
    probes: list


class VerifyBoundsRequest(StrictModel):
    d_min: int = Field(default=5, ge=1)
    d_max: int = Field(default=2000, ge=1)
    detail: bool = False


class VerifyBoundsResponse(StrictModel):
    config: dict
    all_hold: bool
    by_family: dict
    failures: list
    references: dict
    checks: Optional[list] = None


class LocalityRequest(StrictModel):
    event: str
    trials: int = Field(default=200, ge=1)
    seed: int = 0
    dim: Optional[int] = Field(default=None, ge=1)
    side: Optional[int] = Field(default=None, ge=1)
    p: Optional[float] = Field(default=None, gt=0.0, lt=1.0)
    eps: Optional[Rational] = None
    radius: Optional[int] = Field(default=None, ge=0)
    inner_side: Optional[int] = Field(default=None, ge=1)
    outer_side: Optional[int] = Field(default=None, ge=1)
    T: Optional[float] = Field(default=None, gt=0.0)


class LocalityResponse(StrictModel):
    config: dict
    event: str
    trials: int
    changes: int
    changed_trials: list
