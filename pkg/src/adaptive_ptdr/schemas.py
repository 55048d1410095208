"""Request and response models of the HTTP service."""

from __future__ import annotations

from typing import Optional

from pydantic import BaseModel, ConfigDict, Field

from .errormodel import DEFAULT_LEVELS


class _Base(BaseModel):
    model_config = ConfigDict(extra="forbid")


class ConstraintIn(_Base):
    epsilon: float = Field(0.06, gt=0, lt=1)
    confidence: float = Field(0.99, gt=0, lt=1)
    percentile: float = Field(95.0, gt=0, lt=100)


class Health(_Base):
    status: str
    version: str


class GenRequest(_Base):
    out_dir: str
    seed: int = Field(2024, ge=0)
    segment_count: Optional[int] = Field(None, ge=1)
    profile_count: Optional[int] = Field(None, ge=1)
    path_count: Optional[int] = Field(None, ge=0)
    path_length: Optional[tuple[int, int]] = None


class GenResponse(_Base):
    out_dir: str
    segments: int
    profiles: int
    paths: int
    content_hash: str


class RouteRequest(_Base):
    network_dir: str
    model: str
    path_id: str
    departure: int = Field(ge=0)
    constraint: ConstraintIn = ConstraintIn()
    seed: int = Field(0, ge=0)
    include_samples: bool = False


class RouteResponse(_Base):
    path_id: str
    departure: int
    level: int
    clamped: bool
    u: float
    tau: float
    stats: dict
    total_samples: int
    pilot_reused: int
    timing: dict
    samples: Optional[list[float]] = None


class TrainRequest(_Base):
    network_dir: str
    out_dir: str
    requests: int = Field(150, ge=30)
    workload: str = "profiling"
    levels: list[int] = list(DEFAULT_LEVELS)
    repetitions: int = Field(30, ge=10)
    percentile: float = Field(95.0, gt=0, lt=100)
    quantiles: list[float] = [0.5, 0.75, 0.95]
    seed: int = Field(0, ge=0)


class TrainResponse(_Base):
    records_file: str
    models: dict[str, str]
    record_count: int
    spearman: dict[str, float]
    lines: dict[str, dict[str, list[float]]]


class ValidateRequest(_Base):
    network_dir: str
    model: str
    out_dir: str
    requests: int = Field(500, ge=1)
    workload: str = "traffic"
    constraint: ConstraintIn = ConstraintIn()
    truth_samples: int = Field(200_000, ge=100_000)
    training_records: Optional[str] = None
    cache_dir: Optional[str] = None
    seed: int = Field(0, ge=0)


class ValidateResponse(_Base):
    report_file: str
    summary_file: str
    summary: dict
    all_clamped: bool


class CompareRequest(_Base):
    network_dir: str
    training_records: str
    out_dir: str
    requests: int = Field(500, ge=1)
    workload: str = "traffic"
    epsilons: list[float] = [0.03, 0.06]
    quantiles: list[float] = [0.5, 0.75, 0.95]
    confidence: float = Field(0.99, gt=0, lt=1)
    truth_samples: int = Field(200_000, ge=100_000)
    cache_dir: Optional[str] = None
    seed: int = Field(0, ge=0)


class CompareResponse(_Base):
    report_file: str
    summary_file: str
    rows: list[dict]


class SweepRequest(_Base):
    network_dir: str
    model: str
    path_id: str
    out_dir: str
    constraint: ConstraintIn = ConstraintIn()
    seed: int = Field(0, ge=0)


class SweepResponse(_Base):
    report_file: str
    intervals: int
    level_counts: dict[str, int]
    all_clamped: bool


class OverheadRequest(_Base):
    out_dir: str
    network_dir: Optional[str] = None
    model: Optional[str] = None
    path_ids: Optional[list[str]] = None
    segments: int = Field(300, ge=1)
    path_count: int = Field(3, ge=1)
    repeats: int = Field(5, ge=1)
    seed: int = Field(0, ge=0)


class OverheadResponse(_Base):
    report_file: str
    rows: list[dict]


class CapacityRequest(_Base):
    config: str
    out_dir: str
    comparison_report: Optional[str] = None
    epsilon: float = Field(0.06, gt=0, lt=1)
    quantile: float = Field(0.95, gt=0, lt=1)
    simulate: bool = True
    seed: int = Field(0, ge=0)


class CapacityResponse(_Base):
    summary_file: str
    planning: list[dict]
    simulation: Optional[dict] = None
    timeseries_file: Optional[str] = None
    note: str
