"""Training, validation, comparison, week-sweep and overhead campaigns.

Every campaign is deterministic in its inputs and seed. Wall-clock columns
carry a ``_s`` suffix and are the only fields that change between reruns.
"""

from __future__ import annotations

import csv
import hashlib
import json
import logging
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path as FsPath

import numpy as np

from . import rng
from .errormodel import (
    DEFAULT_LEVELS,
    PILOT_SAMPLES,
    ErrorModel,
    ProfileRecord,
    collect_profile_data,
    expected_errors,
    train,
)
from .mcsim import run_mcs
from .roadnet import INTERVAL_S, INTERVALS_PER_DAY, INTERVALS_PER_WEEK, Network, Request
from .stats import KEY_PERCENTILES, SummaryStats, coeff_variation, summarize
from .tuner import Constraint, adaptive_route_query, n_of_ci, select_level, static_baseline_level

log = logging.getLogger(__name__)

__all__ = [
    "HOUR_WEIGHTS",
    "WEEKEND_WEIGHT",
    "PROFILING_HOUR_WEIGHTS",
    "PROFILING_WEEKEND_WEIGHT",
    "UNIFORM_HOUR_WEIGHTS",
    "WORKLOADS",
    "sample_requests",
    "GroundTruthCache",
    "ground_truth",
    "measure_error",
    "ValidationRecord",
    "ValidationReport",
    "run_training",
    "run_validation",
    "ComparisonRow",
    "savings",
    "run_comparison",
    "run_week_sweep",
    "run_overhead",
    "write_csv",
]

DEFAULT_TRUTH_N = 200_000

# Relative request volume per hour of day, shaped like typical road traffic
# counts: morning and afternoon peaks, a broad daytime plateau, a quiet night.
# Weekend days are scaled by WEEKEND_WEIGHT. Used for validation workloads.
HOUR_WEIGHTS = (
    0.8, 0.5, 0.4, 0.4, 0.6, 1.5,
    3.8, 7.2, 7.6, 5.9, 5.6, 5.9,
    6.1, 6.1, 6.3, 7.1, 7.9, 8.0,
    6.1, 4.3, 3.2, 2.6, 2.0, 1.3,
)  # fmt: skip
WEEKEND_WEIGHT = 0.7

# Profiling workload: weekdays only, with most requests in the 7-8 and 16-17
# peak hours so the training set covers the unpredictable end of the feature
# range densely. Off-peak hours keep a thin share for the predictable end.
PROFILING_HOUR_WEIGHTS = (
    0.5, 0.5, 0.5, 0.5, 0.5, 1.0,
    1.0, 30.0, 1.0, 1.0, 1.0, 1.0,
    1.0, 1.0, 1.0, 1.0, 30.0, 1.0,
    1.0, 1.0, 1.0, 0.5, 0.5, 0.5,
)  # fmt: skip
PROFILING_WEEKEND_WEIGHT = 0.0

# Every slot of the week equally likely.
UNIFORM_HOUR_WEIGHTS = (1.0,) * 24


def departure_weights(hour_weights=HOUR_WEIGHTS, weekend_weight=WEEKEND_WEIGHT) -> np.ndarray:
    k = np.arange(INTERVALS_PER_WEEK)
    w = np.asarray(hour_weights, dtype=float)[(k % INTERVALS_PER_DAY) // 4]
    w = w * np.where(k // INTERVALS_PER_DAY < 5, 1.0, weekend_weight)
    return w / w.sum()


WORKLOADS = {
    "traffic": (HOUR_WEIGHTS, WEEKEND_WEIGHT),
    "profiling": (PROFILING_HOUR_WEIGHTS, PROFILING_WEEKEND_WEIGHT),
    "uniform": (UNIFORM_HOUR_WEIGHTS, 1.0),
}


def sample_requests(
    network: Network,
    n: int,
    seed: int,
    *,
    prefix: str = "q",
    workload: str | None = None,
    hour_weights=HOUR_WEIGHTS,
    weekend_weight: float = WEEKEND_WEIGHT,
) -> list[Request]:
    """Random (path, departure) requests; paths uniform, departures by hour weight.

    Within an hour the departure is uniform to the second.
    """
    if workload is not None:
        if workload not in WORKLOADS:
            raise ValueError(f"unknown workload {workload!r}; choose from {sorted(WORKLOADS)}")
        hour_weights, weekend_weight = WORKLOADS[workload]
    gen = np.random.default_rng(rng.derive_seed(seed, "requests", prefix))
    w = departure_weights(hour_weights, weekend_weight)
    path_ids = sorted(network.paths)
    if not path_ids:
        raise ValueError("network has no paths")
    slots = gen.choice(INTERVALS_PER_WEEK, size=n, p=w)
    offsets = gen.integers(0, INTERVAL_S, size=n)
    picks = gen.integers(0, len(path_ids), size=n)
    width = len(str(max(n - 1, 0)))
    return [
        Request(f"{prefix}{i:0{width}d}", path_ids[int(picks[i])], int(slots[i] * INTERVAL_S + offsets[i]))
        for i in range(n)
    ]


# ---------------------------------------------------------------------------
# Ground truth
# ---------------------------------------------------------------------------


class GroundTruthCache:
    """Memory cache of ground-truth statistics, optionally mirrored to disk as JSON."""

    def __init__(self, directory=None):
        self.directory = FsPath(directory) if directory else None
        if self.directory:
            self.directory.mkdir(parents=True, exist_ok=True)
        self._mem: dict[str, SummaryStats] = {}
        self._lock = threading.Lock()
        self.hits = 0
        self.computed = 0

    @staticmethod
    def key(network: Network, path_id: str, departure: int, N: int, seed: int) -> str:
        text = f"{network.content_hash}|{path_id}|{departure}|{N}|{seed}"
        return hashlib.sha256(text.encode()).hexdigest()

    def get(self, key: str) -> SummaryStats | None:
        with self._lock:
            if key in self._mem:
                self.hits += 1
                return self._mem[key]
        if self.directory:
            f = self.directory / f"{key}.json"
            if f.exists():
                stats = SummaryStats.from_dict(json.loads(f.read_text()))
                with self._lock:
                    self._mem[key] = stats
                    self.hits += 1
                return stats
        return None

    def put(self, key: str, stats: SummaryStats) -> None:
        with self._lock:
            self._mem[key] = stats
            self.computed += 1
        if self.directory:
            tmp = self.directory / f"{key}.json.tmp"
            tmp.write_text(json.dumps(stats.to_dict()))
            tmp.replace(self.directory / f"{key}.json")


def ground_truth(
    network: Network,
    path,
    departure: int,
    N: int = DEFAULT_TRUTH_N,
    seed: int = 0,
    cache: GroundTruthCache | None = None,
) -> SummaryStats:
    """Key-percentile statistics of a large reference run (stream 1 of ``seed``)."""
    if N < 100_000:
        raise ValueError("ground truth needs N >= 100000")
    path_id = path if isinstance(path, str) else path.path_id
    key = GroundTruthCache.key(network, path_id, departure, N, seed) if cache else None
    if cache:
        hit = cache.get(key)
        if hit is not None:
            return hit
    stats = summarize(run_mcs(network, path, departure, N, seed, stream=1).samples)
    if cache:
        cache.put(key, stats)
    return stats


def measure_error(estimate: SummaryStats, truth: SummaryStats) -> tuple[float, dict[int, float]]:
    """Max relative error over the key percentiles, and the per-percentile errors."""
    if set(estimate.percentiles) != set(truth.percentiles):
        raise ValueError("percentile tables do not match")
    per = {}
    for y, t in truth.percentiles.items():
        if t == 0:
            raise ValueError(f"zero ground-truth value at percentile {y}")
        per[y] = abs(t - estimate.percentiles[y]) / abs(t)
    return max(per.values()), per


# ---------------------------------------------------------------------------
# Training
# ---------------------------------------------------------------------------


@dataclass
class TrainingResult:
    records: list[ProfileRecord]
    models: dict[float, ErrorModel]


def run_training(
    network: Network,
    requests,
    *,
    quantiles=(0.5, 0.75, 0.95),
    levels=DEFAULT_LEVELS,
    R: int = 30,
    y: float = 95,
    seed: int = 0,
    workers: int = 1,
) -> TrainingResult:
    records = collect_profile_data(network, requests, levels, R, y, seed, workers=workers)
    models = {float(q): train(records, q, seed=seed) for q in quantiles}
    return TrainingResult(records, models)


# ---------------------------------------------------------------------------
# Validation
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ValidationRecord:
    request_id: str
    path_id: str
    departure: int
    u: float
    level: int
    clamped: bool
    error: float
    errors: dict[int, float]
    epsilon: float
    confidence: float
    quantile: float
    violated: bool
    query_s: float = 0.0

    def row(self) -> dict:
        out = {
            "request_id": self.request_id,
            "path_id": self.path_id,
            "departure": self.departure,
            "u": self.u,
            "level": self.level,
            "clamped": int(self.clamped),
            "error": self.error,
        }
        for y in KEY_PERCENTILES:
            out[f"error_p{y}"] = self.errors[y]
        out.update(
            epsilon=self.epsilon,
            confidence=self.confidence,
            quantile=self.quantile,
            violated=int(self.violated),
            query_s=self.query_s,
        )
        return out


@dataclass
class ValidationReport:
    records: list[ValidationRecord]
    summary: dict = field(default_factory=dict)


def summarize_validation(records) -> dict:
    n = len(records)
    levels = {}
    for r in records:
        levels[str(r.level)] = levels.get(str(r.level), 0) + 1
    return {
        "requests": n,
        "violations": sum(r.violated for r in records),
        "violation_rate": sum(r.violated for r in records) / n if n else 0.0,
        "average_samples": sum(r.level for r in records) / n if n else 0.0,
        "clamped": sum(r.clamped for r in records),
        "level_counts": dict(sorted(levels.items(), key=lambda kv: int(kv[0]))),
        "max_error": max((r.error for r in records), default=0.0),
    }


def _pool_map(fn, items, workers: int):
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(fn, items))
    return [fn(x) for x in items]


def _check_disjoint(requests, training_ids):
    if training_ids is None:
        return
    clash = sorted({r.request_id for r in requests} & set(training_ids))
    if clash:
        raise ValueError(f"validation requests overlap the training set: {clash[:5]}")


def run_validation(
    network: Network,
    requests,
    constraint: Constraint,
    model: ErrorModel,
    N_truth: int = DEFAULT_TRUTH_N,
    seed: int = 0,
    *,
    training_ids=None,
    cache: GroundTruthCache | None = None,
    workers: int = 1,
) -> ValidationReport:
    """Adaptive query per request, scored against a large-N reference run."""
    requests = list(requests)
    _check_disjoint(requests, training_ids)
    cache = cache or GroundTruthCache()

    def one(req: Request) -> ValidationRecord:
        qseed = rng.derive_seed(seed, "query", req.request_id)
        t0 = time.perf_counter()
        est = adaptive_route_query(network, req.path_id, req.departure, constraint, model, qseed)
        dt = time.perf_counter() - t0
        truth = ground_truth(network, req.path_id, req.departure, N_truth, rng.derive_seed(seed, "truth", req.request_id), cache)
        err, per = measure_error(est.stats, truth)
        return ValidationRecord(
            req.request_id,
            req.path_id,
            req.departure,
            est.u,
            est.level,
            est.clamped,
            err,
            per,
            constraint.epsilon,
            constraint.confidence,
            model.quantile,
            err > constraint.epsilon,
            dt,
        )

    records = _pool_map(one, requests, workers)
    records.sort(key=lambda r: r.request_id)
    return ValidationReport(records, summarize_validation(records))


# ---------------------------------------------------------------------------
# Adaptive vs static comparison
# ---------------------------------------------------------------------------


def savings(baseline: float, adaptive: float) -> float:
    """Fraction of samples saved: 1 - adaptive / baseline."""
    if baseline <= 0:
        raise ValueError("baseline must be positive")
    return 1.0 - adaptive / baseline


@dataclass(frozen=True)
class ComparisonRow:
    epsilon: float
    quantile: float
    baseline_level: int
    baseline_clamped: bool
    baseline_avg_samples: float
    adaptive_avg_samples: float
    savings_pct: float
    adaptive_violation_rate: float
    baseline_violation_rate: float
    speedup: float
    requests: int
    level_counts: dict

    def row(self) -> dict:
        d = asdict(self)
        d["baseline_clamped"] = int(self.baseline_clamped)
        d["level_counts"] = json.dumps(self.level_counts, sort_keys=True)
        return d


def comparison_row(epsilon, quantile, baseline_level, adaptive_levels, adaptive_violations, baseline_violations,
                   baseline_clamped=False) -> ComparisonRow:
    adaptive_levels = list(adaptive_levels)
    n = len(adaptive_levels)
    avg = sum(adaptive_levels) / n
    counts = {}
    for L in adaptive_levels:
        counts[str(L)] = counts.get(str(L), 0) + 1
    return ComparisonRow(
        float(epsilon),
        float(quantile),
        int(baseline_level),
        bool(baseline_clamped),
        float(baseline_level),
        avg,
        100.0 * savings(baseline_level, avg),
        sum(adaptive_violations) / n,
        sum(baseline_violations) / n,
        baseline_level / avg,
        n,
        dict(sorted(counts.items(), key=lambda kv: int(kv[0]))),
    )


def run_comparison(
    network: Network,
    requests,
    configs,
    models: dict,
    training_errors: dict,
    seed: int = 0,
    *,
    confidence: float = 0.99,
    N_truth: int = DEFAULT_TRUTH_N,
    training_ids=None,
    cache: GroundTruthCache | None = None,
    workers: int = 1,
) -> list[ComparisonRow]:
    """Adaptive selection vs a fixed level picked from the training error CDF.

    ``configs`` holds (epsilon, quantile) pairs; ``models`` maps quantile to a
    trained model; ``training_errors`` maps level to that level's training
    errors (see :func:`errormodel.expected_errors`). The quantile doubles as
    the CDF threshold of the static baseline.
    """
    requests = list(requests)
    _check_disjoint(requests, training_ids)
    cache = cache or GroundTruthCache()
    rows = []
    for eps, q in configs:
        model = models[float(q)]
        constraint = Constraint(eps, confidence, model.percentile)
        base_level, base_clamped = static_baseline_level(training_errors, eps, 100.0 * q)

        def one(req: Request):
            qseed = rng.derive_seed(seed, "query", req.request_id)
            truth = ground_truth(network, req.path_id, req.departure, N_truth, rng.derive_seed(seed, "truth", req.request_id), cache)
            est = adaptive_route_query(network, req.path_id, req.departure, constraint, model, qseed)
            a_err, _ = measure_error(est.stats, truth)
            base = run_mcs(network, req.path_id, req.departure, base_level, qseed)
            b_err, _ = measure_error(summarize(base.samples), truth)
            return est.level, a_err > eps, b_err > eps

        out = _pool_map(one, requests, workers)
        rows.append(
            comparison_row(eps, q, base_level, [o[0] for o in out], [o[1] for o in out], [o[2] for o in out], base_clamped)
        )
    return rows


# ---------------------------------------------------------------------------
# Week sweep
# ---------------------------------------------------------------------------


def run_week_sweep(network: Network, path, constraint: Constraint, model: ErrorModel, seed: int = 0) -> list[dict]:
    """One adaptive query at the start of every 15-minute slot of the week."""
    path_id = path if isinstance(path, str) else path.path_id
    rows = []
    for k in range(INTERVALS_PER_WEEK):
        dep = k * INTERVAL_S
        est = adaptive_route_query(network, path_id, dep, constraint, model, rng.derive_seed(seed, "sweep", path_id, k))
        rows.append(
            {
                "interval": k,
                "day": k // INTERVALS_PER_DAY,
                "hour": (k % INTERVALS_PER_DAY) / 4.0,
                "departure": dep,
                "u": est.u,
                "level": est.level,
                "clamped": int(est.clamped),
                "tau": est.tau,
            }
        )
    return rows


# ---------------------------------------------------------------------------
# Overhead
# ---------------------------------------------------------------------------


def _best_time(fn, repeats: int) -> float:
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def run_overhead(
    network: Network,
    paths,
    seed: int = 0,
    *,
    model: ErrorModel | None = None,
    constraint: Constraint | None = None,
    levels=DEFAULT_LEVELS,
    repeats: int = 7,
) -> list[dict]:
    """Wall time of feature extraction + selection against plain sampling runs.

    Times are the best of ``repeats`` runs. Without a model, selection is timed
    against a flat placeholder model with the default levels.
    """
    from .errormodel import ErrorModel as _EM
    from .stats import RegressionLine

    if model is None:
        model = _EM(95.0, 0.95, {L: RegressionLine(0.0, 0.38 / np.sqrt(L / 100), 0.95, 2) for L in levels})
    constraint = constraint or Constraint(0.06, 0.99, model.percentile)
    rows = []
    for path in paths:
        path_id = path if isinstance(path, str) else path.path_id
        n_seg = len(network.path(path_id).segments)
        dep = 8 * 3600
        run_mcs(network, path_id, dep, PILOT_SAMPLES, seed)  # warm-up (JIT, caches)
        pilot = run_mcs(network, path_id, dep, PILOT_SAMPLES, seed).samples

        def feature_and_select():
            u = coeff_variation(pilot)
            select_level(model, u, constraint)

        def select_only():
            select_level(model, 0.05, constraint)

        overhead = _best_time(feature_and_select, repeats * 20)
        selection = _best_time(select_only, repeats * 20)
        row = {"path_id": path_id, "segments": n_seg, "overhead_s": overhead, "selection_s": selection}
        for L in levels:
            row[f"mcs_{L}_s"] = _best_time(lambda: run_mcs(network, path_id, dep, L, seed), repeats)
        row["overhead_ratio_s"] = overhead / row[f"mcs_{levels[0]}_s"]
        rows.append(row)
    return rows


# ---------------------------------------------------------------------------
# Output
# ---------------------------------------------------------------------------


def write_csv(rows, file, columns=None) -> None:
    rows = list(rows)
    if columns is None:
        columns = list(rows[0]) if rows else []
    with open(file, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=columns, lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow({k: _fmt(r[k]) for k in columns})


def _fmt(v):
    if isinstance(v, float):
        return repr(v)
    return v


def read_records_csv(file) -> list[ProfileRecord]:
    out = []
    with open(file, newline="") as fh:
        for row in csv.DictReader(fh):
            out.append(
                ProfileRecord(
                    row["request_id"],
                    row["path_id"],
                    int(row["departure"]),
                    int(row["level"]),
                    float(row["u"]),
                    float(row["nu"]),
                    float(row["tau_mean"]),
                    int(row["repetitions"]),
                    float(row["percentile"]),
                )
            )
    return out


def records_rows(records) -> list[dict]:
    return [asdict(r) for r in records]


def training_errors_from_records(records, confidence: float) -> dict[int, list[float]]:
    return expected_errors(records, n_of_ci(confidence))
