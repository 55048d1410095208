"""Capacity planning for the navigation pipeline.

The pipeline has three stages: candidate path generation, a fork-join of K
travel-time evaluations, and a reordering stage. :func:`simulate_pipeline`
runs an event-driven simulation of it. :func:`size_stage` and
:func:`planning_experiment` give the analytic server counts used to compare
a static sample count against the adaptive one.
"""

from __future__ import annotations

import csv
import heapq
import math
import sys
from collections import deque
from dataclasses import asdict, dataclass, field

import numpy as np

from . import rng

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover
    import tomli as tomllib

__all__ = [
    "StageConfig",
    "PipelineConfig",
    "StageReport",
    "CapacityReport",
    "simulate_pipeline",
    "size_stage",
    "calibrate_scale",
    "planning_experiment",
    "load_config",
    "level_ratio_from_report",
]

DISTRIBUTIONS = ("exponential", "deterministic")
CALIBRATION_NOTE = (
    "per-stage service times are calibrated so that the static configuration "
    "matches the reference core totals; absolute counts depend on that step"
)


@dataclass(frozen=True)
class StageConfig:
    name: str
    mean_service: float
    servers: int = 1
    distribution: str = "exponential"

    def __post_init__(self):
        if self.mean_service <= 0:
            raise ValueError(f"stage {self.name}: mean_service must be positive")
        if self.servers < 1:
            raise ValueError(f"stage {self.name}: servers must be >= 1")
        if self.distribution not in DISTRIBUTIONS:
            raise ValueError(f"stage {self.name}: unknown distribution {self.distribution!r}")


@dataclass(frozen=True)
class PipelineConfig:
    """Pipeline layout. Stages run in order; ``fork_stage`` (if set) gets K tasks per request."""

    arrival_rate: float
    stages: tuple[StageConfig, ...]
    branches: int = 1
    fork_stage: str | None = None
    horizon: float = 10_000.0
    warmup: float = 1_000.0
    utilization_cap: float = 0.7
    sample_interval: float | None = None
    min_completions: int = 1000

    def __post_init__(self):
        object.__setattr__(self, "stages", tuple(self.stages))
        if self.arrival_rate <= 0:
            raise ValueError("arrival_rate must be positive")
        if self.branches < 1:
            raise ValueError("branches must be >= 1")
        if not self.stages:
            raise ValueError("at least one stage is required")
        names = [s.name for s in self.stages]
        if len(set(names)) != len(names):
            raise ValueError(f"duplicate stage names: {names}")
        if self.fork_stage is not None and self.fork_stage not in names:
            raise ValueError(f"fork stage {self.fork_stage!r} is not a stage")
        if self.warmup < 0 or self.horizon <= self.warmup:
            raise ValueError("need 0 <= warmup < horizon")
        if not 0 < self.utilization_cap <= 1:
            raise ValueError("utilization_cap must lie in (0, 1]")

    def tasks_per_request(self, stage: StageConfig) -> int:
        return self.branches if stage.name == self.fork_stage else 1

    def offered_load(self, stage: StageConfig) -> float:
        """Utilization implied by the arrival rate: lambda * tasks * S / c."""
        return self.arrival_rate * self.tasks_per_request(stage) * stage.mean_service / stage.servers


@dataclass(frozen=True)
class StageReport:
    name: str
    servers: int
    offered_load: float
    utilization: float
    mean_in_station: float
    mean_queue_length: float
    mean_response: float
    arrival_rate: float
    little_residual: float


@dataclass
class CapacityReport:
    stages: list[StageReport]
    e2e_mean: float
    e2e_p95: float
    throughput: float
    completed: int
    unstable: bool
    low_confidence: bool
    seed: int
    timeseries: list[dict] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "stages": [asdict(s) for s in self.stages],
            "e2e_mean": self.e2e_mean,
            "e2e_p95": self.e2e_p95,
            "throughput": self.throughput,
            "completed": self.completed,
            "unstable": self.unstable,
            "low_confidence": self.low_confidence,
            "seed": self.seed,
        }

    def stage(self, name: str) -> StageReport:
        for s in self.stages:
            if s.name == name:
                return s
        raise KeyError(name)


# ---------------------------------------------------------------------------
# Simulation
# ---------------------------------------------------------------------------


class _Station:
    def __init__(self, cfg: StageConfig, gen: np.random.Generator, warmup: float, horizon: float):
        self.cfg = cfg
        self.gen = gen
        self.free = cfg.servers
        self.queue: deque = deque()
        self.n = 0
        self.last = 0.0
        self.area = 0.0
        self.busy_area = 0.0
        self.t0, self.t1 = warmup, horizon
        self.arrivals = 0
        self.sojourn_sum = 0.0
        self.sojourn_count = 0

    def draw(self) -> float:
        if self.cfg.distribution == "deterministic":
            return self.cfg.mean_service
        return float(self.gen.exponential(self.cfg.mean_service))

    def advance(self, t: float) -> None:
        lo, hi = max(self.last, self.t0), min(t, self.t1)
        if hi > lo:
            self.area += self.n * (hi - lo)
            self.busy_area += (self.cfg.servers - self.free) * (hi - lo)
        self.last = t


def simulate_pipeline(config: PipelineConfig, seed: int = 0) -> CapacityReport:
    """Event-driven run with Poisson arrivals; statistics cover [warmup, horizon].

    Every station draws service times from its own random stream, so a fork
    stage with one branch reproduces the plain tandem line draw for draw.
    """
    H, W = config.horizon, config.warmup
    stations = [
        _Station(s, np.random.default_rng(rng.derive_seed(seed, "stage", s.name)), W, H) for s in config.stages
    ]
    arrivals_gen = np.random.default_rng(rng.derive_seed(seed, "arrivals"))
    fork_index = next((i for i, s in enumerate(config.stages) if s.name == config.fork_stage), -1)

    # event: (time, seq, kind, station index, job, task entry time)
    events: list = []
    seq = 0

    def push(t, kind, k=-1, job=None, entered=0.0):
        nonlocal seq
        heapq.heappush(events, (t, seq, kind, k, job, entered))
        seq += 1

    def enter(t, k, job):
        st = stations[k]
        st.advance(t)
        st.n += 1
        if W <= t <= H:
            st.arrivals += 1
        if st.free > 0:
            st.free -= 1
            push(t + st.draw(), 1, k, job, t)
        else:
            st.queue.append((job, t))

    def start_stage(t, k, job):
        if k == len(stations):
            finish(t, job)
            return
        tasks = config.branches if k == fork_index else 1
        job[1] = tasks
        for _ in range(tasks):
            enter(t, k, job)

    e2e = []
    completed = 0

    def finish(t, job):
        nonlocal completed
        if W <= t <= H:
            completed += 1
        if job[0] >= W and t <= H:
            e2e.append(t - job[0])

    sample_dt = config.sample_interval
    series = []
    if sample_dt:
        for j in range(1, int(H / sample_dt) + 1):
            push(j * sample_dt, 2)

    push(float(arrivals_gen.exponential(1.0 / config.arrival_rate)), 0)
    while events:
        t, _, kind, k, job, entered = heapq.heappop(events)
        if t > H:
            break
        if kind == 0:
            push(t + float(arrivals_gen.exponential(1.0 / config.arrival_rate)), 0)
            start_stage(t, 0, [t, 0, 0])  # [arrival time, pending tasks, stage index]
        elif kind == 1:
            st = stations[k]
            st.advance(t)
            st.n -= 1
            if entered >= W:
                st.sojourn_sum += t - entered
                st.sojourn_count += 1
            if st.queue:
                nxt, t_in = st.queue.popleft()
                push(t + st.draw(), 1, k, nxt, t_in)
            else:
                st.free += 1
            job[1] -= 1
            if job[1] == 0:
                job[2] = k + 1
                start_stage(t, k + 1, job)
        else:
            row = {"time": t}
            for st in stations:
                row[st.cfg.name] = st.n
            series.append(row)

    span = H - W
    reports = []
    unstable = False
    for st in stations:
        st.advance(H)
        offered = config.offered_load(st.cfg)
        unstable |= offered >= 1.0
        L = st.area / span
        lam = st.arrivals / span
        Wr = st.sojourn_sum / st.sojourn_count if st.sojourn_count else float("nan")
        util = st.busy_area / (span * st.cfg.servers)
        Lq = max(0.0, L - util * st.cfg.servers)
        resid = abs(L - lam * Wr) / (lam * Wr) if lam * Wr > 0 else float("nan")
        reports.append(StageReport(st.cfg.name, st.cfg.servers, offered, util, L, Lq, Wr, lam, resid))

    e2e_arr = np.asarray(e2e)
    return CapacityReport(
        stages=reports,
        e2e_mean=float(e2e_arr.mean()) if e2e_arr.size else float("nan"),
        e2e_p95=float(np.percentile(e2e_arr, 95)) if e2e_arr.size else float("nan"),
        throughput=completed / span,
        completed=int(e2e_arr.size),
        unstable=unstable,
        low_confidence=e2e_arr.size < config.min_completions,
        seed=seed,
        timeseries=series,
    )


# ---------------------------------------------------------------------------
# Sizing
# ---------------------------------------------------------------------------


def _ceil(x: float) -> int:
    # tolerate float noise such as 833.33 * 0.48 = 399.99999999999994
    return math.ceil(x - 1e-9 * max(1.0, abs(x)))


def size_stage(arrival_rate: float, mean_service: float, utilization_cap: float = 1.0) -> int:
    """Smallest server count c with arrival_rate * mean_service / c <= utilization_cap."""
    if arrival_rate < 0 or mean_service < 0:
        raise ValueError("arrival_rate and mean_service must be non-negative")
    if not 0 < utilization_cap <= 1:
        raise ValueError("utilization_cap must lie in (0, 1]")
    return max(1, _ceil(arrival_rate * mean_service / utilization_cap))


def _total(demands: dict, scale: float, cap: float) -> int:
    return sum(max(1, _ceil(scale * d / cap)) for d in demands.values())


def calibrate_scale(demands: dict, utilization_cap: float, target_total: int) -> float:
    """Smallest factor on every stage's demand (lambda * tasks * S) that sizes to ``target_total`` servers.

    Raises ValueError when ceiling effects make the exact total unreachable.
    """
    if _total(demands, 1e-12, utilization_cap) > target_total:
        raise ValueError("target below the one-server-per-stage floor")
    lo, hi = 0.0, 1.0
    while _total(demands, hi, utilization_cap) < target_total:
        hi *= 2
    for _ in range(200):
        mid = (lo + hi) / 2
        if _total(demands, mid, utilization_cap) >= target_total:
            hi = mid
        else:
            lo = mid
    if _total(demands, hi, utilization_cap) != target_total:
        raise ValueError(f"no scale gives exactly {target_total} servers")
    return hi


def planning_experiment(
    arrival_rate: float,
    stage_means: dict,
    sample_ratio: float,
    *,
    fork_stage: str = "ptdr",
    branches: int = 1,
    utilization_cap: float = 1.0,
    static_total: int | None = None,
) -> dict:
    """Servers per stage for the static and the adaptive sample count.

    The fork stage's service mean is multiplied by ``sample_ratio`` (adaptive
    average samples over the static level) for the adaptive variant. With
    ``static_total`` set, every stage mean is first scaled by one common
    factor so that the static total matches it.
    """
    if not 0 < sample_ratio:
        raise ValueError("sample_ratio must be positive")
    if fork_stage not in stage_means:
        raise ValueError(f"unknown fork stage {fork_stage!r}")
    tasks = {name: branches if name == fork_stage else 1 for name in stage_means}
    demands = {name: arrival_rate * tasks[name] * s for name, s in stage_means.items()}
    scale = 1.0 if static_total is None else calibrate_scale(demands, utilization_cap, static_total)
    static = {n: size_stage(arrival_rate * tasks[n], scale * s, utilization_cap) for n, s in stage_means.items()}
    adaptive = {
        n: size_stage(arrival_rate * tasks[n], scale * s * (sample_ratio if n == fork_stage else 1.0), utilization_cap)
        for n, s in stage_means.items()
    }
    st, ad = sum(static.values()), sum(adaptive.values())
    return {
        "utilization_cap": utilization_cap,
        "sample_ratio": sample_ratio,
        "scale": scale,
        "static": static,
        "adaptive": adaptive,
        "static_total": st,
        "adaptive_total": ad,
        "reduction": 1.0 - ad / st,
        "note": CALIBRATION_NOTE,
    }


# ---------------------------------------------------------------------------
# Config and report files
# ---------------------------------------------------------------------------


def level_ratio_from_report(file, epsilon: float, quantile: float) -> float:
    """Adaptive average samples over the baseline level for one row of a comparison CSV."""
    with open(file, newline="") as fh:
        for row in csv.DictReader(fh):
            if math.isclose(float(row["epsilon"]), epsilon) and math.isclose(float(row["quantile"]), quantile):
                return float(row["adaptive_avg_samples"]) / float(row["baseline_avg_samples"])
    raise KeyError(f"no comparison row for epsilon={epsilon}, quantile={quantile}")


def config_from_dict(data: dict) -> PipelineConfig:
    try:
        stages = tuple(
            StageConfig(
                name,
                float(s["mean_service"]),
                int(s.get("servers", 1)),
                str(s.get("distribution", "exponential")),
            )
            for name, s in data["stages"].items()
        )
        return PipelineConfig(
            arrival_rate=float(data["arrival_rate"]),
            stages=stages,
            branches=int(data.get("branches", 1)),
            fork_stage=data.get("fork_stage"),
            horizon=float(data.get("horizon", 10_000.0)),
            warmup=float(data.get("warmup", 1_000.0)),
            utilization_cap=float(data.get("utilization_cap", 0.7)),
            sample_interval=data.get("sample_interval"),
            min_completions=int(data.get("min_completions", 1000)),
        )
    except (KeyError, TypeError) as exc:
        raise ValueError(f"invalid capacity config: {exc!r}") from None


def load_config(file) -> tuple[PipelineConfig, dict]:
    """Read a TOML pipeline config; returns the config and the raw table."""
    with open(file, "rb") as fh:
        data = tomllib.load(fh)
    return config_from_dict(data), data
