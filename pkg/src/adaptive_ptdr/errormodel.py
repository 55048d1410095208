"""Offline profiling and the per-level error model.

For every training request and sampling level the sampler is run R times.
Each run yields one percentile estimate; the spread of those estimates (their
coefficient of variation, ``nu``) is the quantity the model learns to predict
from the unpredictability ``u`` of a 100-sample pilot.
"""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from . import rng
from .mcsim import run_mcs
from .roadnet import Network, Request
from .stats import RegressionLine, coeff_variation, percentiles, quantile_regression

__all__ = [
    "DEFAULT_LEVELS",
    "PILOT_SAMPLES",
    "MODEL_VERSION",
    "ModelError",
    "ProfileRecord",
    "ErrorModel",
    "check_levels",
    "collect_profile_data",
    "train",
    "predict_nu",
    "expected_errors",
    "save_model",
    "load_model",
]

DEFAULT_LEVELS = (100, 300, 1000, 3000)
PILOT_SAMPLES = 100
MODEL_VERSION = 1
MIN_REPETITIONS = 10
MIN_TRAINING_REQUESTS = 30
MIN_RECORDS_PER_LEVEL = 10


class ModelError(ValueError):
    pass


def check_levels(levels) -> tuple[int, ...]:
    levels = tuple(int(x) for x in levels)
    if not levels:
        raise ValueError("at least one sampling level is required")
    if any(b <= a for a, b in zip(levels, levels[1:])):
        raise ValueError(f"sampling levels must be strictly ascending: {levels}")
    if levels[0] < PILOT_SAMPLES:
        raise ValueError(f"smallest sampling level must be >= {PILOT_SAMPLES} (pilot size)")
    return levels


@dataclass(frozen=True)
class ProfileRecord:
    request_id: str
    path_id: str
    departure: int
    level: int
    u: float
    nu: float
    tau_mean: float
    repetitions: int
    percentile: float

    def __post_init__(self):
        if self.u < 0 or self.nu < 0:
            raise ValueError("u and nu must be non-negative")
        if self.repetitions < MIN_REPETITIONS:
            raise ValueError(f"repetitions must be >= {MIN_REPETITIONS}")


def _profile_request(network: Network, req: Request, levels, R: int, y: float, seed: int) -> list[ProfileRecord]:
    out = []
    for level in levels:
        # the R runs of one level are consecutive blocks of a single stream
        sub = rng.derive_seed(seed, req.request_id, level)
        samples = run_mcs(network, req.path_id, req.departure, R * level, sub).samples.reshape(R, level)
        taus = np.array([percentiles(run, [y])[0] for run in samples])
        pilots = [coeff_variation(run[:PILOT_SAMPLES]) for run in samples]
        out.append(
            ProfileRecord(
                req.request_id,
                req.path_id,
                req.departure,
                level,
                float(np.mean(pilots)),
                float(coeff_variation(taus)),
                float(taus.mean()),
                R,
                float(y),
            )
        )
    return out


def collect_profile_data(
    network: Network,
    training_requests,
    levels=DEFAULT_LEVELS,
    R: int = 30,
    y: float = 95,
    seed: int = 0,
    *,
    workers: int = 1,
) -> list[ProfileRecord]:
    """Profile every (request, level) pair; records come back in request order."""
    levels = check_levels(levels)
    requests = list(training_requests)
    if len(requests) < MIN_TRAINING_REQUESTS:
        raise ValueError(f"need at least {MIN_TRAINING_REQUESTS} training requests, got {len(requests)}")
    if R < MIN_REPETITIONS:
        raise ValueError(f"R must be >= {MIN_REPETITIONS}")

    def work(req):
        return _profile_request(network, req, levels, R, y, seed)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            chunks = list(pool.map(work, requests))
    else:
        chunks = [work(r) for r in requests]
    return [rec for chunk in chunks for rec in chunk]


@dataclass(frozen=True)
class ErrorModel:
    percentile: float
    quantile: float
    lines: dict[int, RegressionLine]
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.lines:
            raise ModelError("model has no regression lines")
        ordered = dict(sorted((int(k), v) for k, v in self.lines.items()))
        check_levels(ordered)
        object.__setattr__(self, "lines", ordered)

    @property
    def levels(self) -> tuple[int, ...]:
        return tuple(self.lines)


def train(records, q: float, *, seed: int | None = None) -> ErrorModel:
    """Fit one quantile-regression line of nu against u per sampling level."""
    records = list(records)
    by_level: dict[int, list[ProfileRecord]] = {}
    for r in records:
        by_level.setdefault(r.level, []).append(r)
    if not by_level:
        raise ModelError("no training records")
    percents = {r.percentile for r in records}
    if len(percents) != 1:
        raise ModelError(f"records mix percentiles {sorted(percents)}")
    for level, recs in sorted(by_level.items()):
        if len(recs) < MIN_RECORDS_PER_LEVEL:
            raise ModelError(f"level {level}: {len(recs)} records, need >= {MIN_RECORDS_PER_LEVEL}")

    lines = {}
    for level, recs in sorted(by_level.items()):
        pts = np.array([(r.u, r.nu) for r in recs])
        line = quantile_regression(pts, q)
        if line.slope < 0:
            raise ModelError(f"level {level}: negative slope {line.slope:.4g}; training set is broken")
        lines[level] = line

    u_all = np.array([r.u for r in records])
    u_mid = float(np.median(u_all))
    levels = sorted(lines)
    pred = [max(0.0, lines[L](u_mid)) for L in levels]
    if any(b >= a for a, b in zip(pred, pred[1:])):
        raise ModelError(f"predicted nu not strictly decreasing in level at the training-u median ({u_mid:.4g}): {pred}")

    reps = sorted({r.repetitions for r in records})
    meta = {
        "seed": seed,
        "levels": levels,
        "repetitions": reps[0] if len(reps) == 1 else reps,
        "record_count": len(records),
        "u_range": [float(u_all.min()), float(u_all.max())],
    }
    return ErrorModel(float(percents.pop()), float(q), lines, meta)


def predict_nu(model: ErrorModel, u: float, level: int) -> float:
    """Predicted coefficient of variation of the percentile estimate, clamped at 0.

    Lines are fitted per level and may cross far from the bulk of the training
    data; the prediction for a level is capped by those of the smaller levels
    so that more samples never predict a larger spread.
    """
    level = int(level)
    if level not in model.lines:
        raise KeyError(f"unknown sampling level {level}; model has {model.levels}")
    if u < 0:
        raise ValueError("u must be non-negative")
    best = float("inf")
    for L, line in model.lines.items():
        best = min(best, line.intercept + line.slope * u)
        if L == level:
            break
    return max(0.0, best)


def expected_errors(records, multiplier: float) -> dict[int, list[float]]:
    """Per-level expected errors multiplier * nu of the training records."""
    out: dict[int, list[float]] = {}
    for r in records:
        out.setdefault(r.level, []).append(multiplier * r.nu)
    return dict(sorted(out.items()))


# ---------------------------------------------------------------------------
# model.json
# ---------------------------------------------------------------------------


def model_to_dict(model: ErrorModel) -> dict:
    return {
        "version": MODEL_VERSION,
        "percentile_y": model.percentile,
        "regression_quantile": model.quantile,
        "levels": [
            {
                "samples": L,
                "intercept": line.intercept,
                "slope": line.slope,
                "point_count": line.point_count,
            }
            for L, line in model.lines.items()
        ],
        "metadata": dict(model.metadata),
    }


def model_from_dict(data) -> ErrorModel:
    if not isinstance(data, dict):
        raise ModelError("model file must hold a JSON object")
    version = data.get("version")
    if version != MODEL_VERSION:
        raise ModelError(f"unsupported model version {version!r} (expected {MODEL_VERSION})")
    try:
        y = float(data["percentile_y"])
        q = float(data["regression_quantile"])
        entries = data["levels"]
        meta = data["metadata"]
    except (KeyError, TypeError, ValueError) as exc:
        raise ModelError(f"schema violation: {exc}") from None
    if not isinstance(entries, list) or not isinstance(meta, dict):
        raise ModelError("schema violation: 'levels' must be a list and 'metadata' an object")
    for key in ("seed", "repetitions", "record_count"):
        if key not in meta:
            raise ModelError(f"schema violation: metadata.{key} missing")
    lines = {}
    for k, e in enumerate(entries):
        try:
            L = int(e["samples"])
            line = RegressionLine(float(e["intercept"]), float(e["slope"]), q, int(e.get("point_count", 2)))
        except (KeyError, TypeError, ValueError) as exc:
            raise ModelError(f"schema violation in levels[{k}]: {exc}") from None
        if L in lines:
            raise ModelError(f"schema violation: duplicate level {L}")
        lines[L] = line
    declared = meta.get("levels")
    if declared is not None and sorted(int(x) for x in declared) != sorted(lines):
        missing = sorted(set(int(x) for x in declared) - set(lines))
        raise ModelError(f"schema violation: no regression line for level(s) {missing}")
    try:
        return ErrorModel(y, q, lines, meta)
    except ValueError as exc:
        raise ModelError(f"schema violation: {exc}") from None


def save_model(model: ErrorModel, file) -> None:
    with open(file, "w") as fh:
        json.dump(model_to_dict(model), fh, indent=2)
        fh.write("\n")


def load_model(file) -> ErrorModel:
    with open(file) as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ModelError(f"invalid JSON: {exc}") from None
    return model_from_dict(data)


def records_to_rows(records) -> list[dict]:
    return [asdict(r) for r in records]
