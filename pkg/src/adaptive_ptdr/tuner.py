"""Runtime sample-count selection and the adaptive route query."""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from .errormodel import PILOT_SAMPLES, ErrorModel, predict_nu
from .mcsim import run_mcs
from .roadnet import Network
from .stats import SummaryStats, coeff_variation, normal_quantile, percentile, summarize

__all__ = [
    "Constraint",
    "RouteEstimate",
    "n_of_ci",
    "select_level",
    "static_baseline_level",
    "adaptive_route_query",
]

# sigma multipliers used for the usual confidence levels; anything else goes
# through the two-sided normal quantile
_CI_TABLE = {0.68: 1.0, 0.95: 2.0, 0.99: 3.0, 0.997: 3.0}


def n_of_ci(confidence: float) -> float:
    if not 0 < confidence < 1:
        raise ValueError(f"confidence must lie in (0, 1), got {confidence}")
    for ci, n in _CI_TABLE.items():
        if math.isclose(confidence, ci, rel_tol=0, abs_tol=1e-12):
            return n
    return normal_quantile((1 + confidence) / 2)


@dataclass(frozen=True)
class Constraint:
    epsilon: float = 0.06
    confidence: float = 0.99
    percentile: float = 95

    def __post_init__(self):
        if not 0 < self.epsilon < 1:
            raise ValueError("epsilon must lie in (0, 1)")
        if not 0 < self.confidence < 1:
            raise ValueError("confidence must lie in (0, 1)")
        if not 0 < self.percentile < 100:
            raise ValueError("percentile must lie in (0, 100)")

    @property
    def multiplier(self) -> float:
        return n_of_ci(self.confidence)


def select_level(model: ErrorModel, u: float, constraint: Constraint) -> tuple[int, bool]:
    """Smallest level whose predicted error n(CI) * nu_hat is within epsilon.

    Returns ``(max level, True)`` when no level qualifies.
    """
    if model.percentile != constraint.percentile:
        raise ValueError(
            f"model predicts the {model.percentile:g}th percentile, constraint asks for {constraint.percentile:g}th"
        )
    if u < 0:
        raise ValueError("u must be non-negative")
    n = constraint.multiplier
    for level in model.levels:
        if n * predict_nu(model, u, level) <= constraint.epsilon:
            return level, False
    return model.levels[-1], True


def static_baseline_level(errors_per_level: dict, epsilon: float, threshold_percentile: float) -> tuple[int, bool]:
    """Smallest level whose empirical error CDF at ``epsilon`` reaches the threshold.

    Returns ``(max level, True)`` when no level gets there.
    """
    if not errors_per_level:
        raise ValueError("no error samples")
    levels = sorted(int(k) for k in errors_per_level)
    need = threshold_percentile / 100.0
    for level in levels:
        errs = np.asarray(errors_per_level[level], dtype=float)
        if errs.size == 0:
            raise ValueError(f"level {level}: empty error list")
        if (errs <= epsilon).mean() >= need:
            return level, False
    return levels[-1], True


@dataclass(frozen=True, eq=False)
class RouteEstimate:
    path_id: str
    departure: int
    level: int
    clamped: bool
    u: float
    tau: float
    stats: SummaryStats
    total_samples: int
    pilot_reused: int
    timing: dict = field(default_factory=dict)  # seconds: pilot, selection, topup
    samples: np.ndarray | None = None

    def to_dict(self, *, timing: bool = True) -> dict:
        out = {
            "path_id": self.path_id,
            "departure": self.departure,
            "level": self.level,
            "clamped": self.clamped,
            "u": self.u,
            "tau": self.tau,
            "stats": self.stats.to_dict(),
            "total_samples": self.total_samples,
            "pilot_reused": self.pilot_reused,
        }
        if timing:
            out["timing"] = dict(self.timing)
        return out


def adaptive_route_query(
    network: Network,
    path,
    departure: int,
    constraint: Constraint,
    model: ErrorModel,
    seed: int,
    *,
    workers: int = 1,
) -> RouteEstimate:
    """Pilot run, unpredictability, level selection, top-up run, merged statistics.

    The pilot occupies sample indices [0, 100) of the request's stream and the
    top-up continues at index 100, so the merged set holds exactly ``level``
    samples with the pilot included.
    """
    t0 = time.perf_counter()
    pilot = run_mcs(network, path, departure, PILOT_SAMPLES, seed, workers=workers)
    t1 = time.perf_counter()
    u = coeff_variation(pilot.samples)
    level, clamped = select_level(model, u, constraint)
    t2 = time.perf_counter()
    if level > PILOT_SAMPLES:
        topup = run_mcs(network, path, departure, level - PILOT_SAMPLES, seed, offset=PILOT_SAMPLES, workers=workers)
        merged = np.concatenate([topup.samples, pilot.samples])
    else:
        merged = pilot.samples
    t3 = time.perf_counter()
    stats = summarize(merged)
    tau = stats.percentiles.get(int(constraint.percentile)) if float(constraint.percentile).is_integer() else None
    if tau is None:
        tau = percentile(merged, constraint.percentile)
    return RouteEstimate(
        path_id=pilot.path_id,
        departure=pilot.departure,
        level=level,
        clamped=clamped,
        u=u,
        tau=float(tau),
        stats=stats,
        total_samples=int(merged.size),
        pilot_reused=PILOT_SAMPLES,
        timing={"pilot": t1 - t0, "selection": t2 - t1, "topup": t3 - t2},
        samples=merged,
    )
