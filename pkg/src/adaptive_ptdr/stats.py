"""Percentiles, coefficient of variation, Spearman correlation, quantile regression."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.stats import rankdata

__all__ = [
    "KEY_PERCENTILES",
    "RegressionLine",
    "SummaryStats",
    "percentile",
    "percentiles",
    "coeff_variation",
    "summarize",
    "spearman",
    "spearman_permutation_pvalue",
    "pinball_loss",
    "quantile_regression",
    "normal_quantile",
]

KEY_PERCENTILES = (5, 10, 25, 50, 75, 90, 95)


def _as_samples(samples) -> np.ndarray:
    a = np.asarray(samples, dtype=float).ravel()
    if a.size == 0:
        raise ValueError("empty sample")
    return a


def percentiles(samples, ys) -> np.ndarray:
    """Linear-interpolation percentiles at rank h = (n - 1) * y / 100."""
    a = np.sort(_as_samples(samples))
    ys = np.asarray(ys, dtype=float)
    if ((ys <= 0) | (ys >= 100)).any():
        raise ValueError("percentile must lie in (0, 100)")
    h = (a.size - 1) * ys / 100.0
    lo = np.floor(h).astype(int)
    hi = np.minimum(lo + 1, a.size - 1)
    return a[lo] + (h - lo) * (a[hi] - a[lo])


def percentile(samples, y: float) -> float:
    return float(percentiles(samples, [y])[0])


def coeff_variation(samples) -> float:
    """Sample standard deviation (n - 1 denominator) over the mean."""
    a = np.asarray(samples, dtype=float).ravel()
    if a.size < 2:
        raise ValueError("coefficient of variation needs at least 2 samples")
    m = a.sum() / a.size
    if not m > 0:
        raise ValueError(f"coefficient of variation needs a positive mean, got {m}")
    d = a - m
    return math.sqrt(float(d @ d) / (a.size - 1)) / m


@dataclass(frozen=True)
class SummaryStats:
    count: int
    mean: float
    std: float
    cov: float
    percentiles: dict[int, float]

    def to_dict(self) -> dict:
        return {
            "count": self.count,
            "mean": self.mean,
            "std": self.std,
            "cov": self.cov,
            "percentiles": {str(k): v for k, v in self.percentiles.items()},
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SummaryStats":
        return cls(
            int(d["count"]),
            float(d["mean"]),
            float(d["std"]),
            float(d["cov"]),
            {int(k): float(v) for k, v in d["percentiles"].items()},
        )


def summarize(samples, ys=KEY_PERCENTILES) -> SummaryStats:
    a = _as_samples(samples)
    mean = float(a.mean())
    std = float(a.std(ddof=1)) if a.size > 1 else 0.0
    cov = std / mean if mean > 0 else float("nan")
    table = percentiles(a, ys)
    return SummaryStats(int(a.size), mean, std, cov, {int(y): float(v) for y, v in zip(ys, table)})


def spearman(xs, ys) -> float:
    """Pearson correlation of average ranks."""
    x = np.asarray(xs, dtype=float).ravel()
    y = np.asarray(ys, dtype=float).ravel()
    if x.size != y.size:
        raise ValueError(f"length mismatch: {x.size} vs {y.size}")
    if x.size < 3:
        raise ValueError("spearman needs at least 3 pairs")
    rx = rankdata(x)
    ry = rankdata(y)
    rx -= rx.mean()
    ry -= ry.mean()
    den = math.sqrt(float(rx @ rx) * float(ry @ ry))
    if den == 0:
        raise ValueError("zero rank variance")
    return max(-1.0, min(1.0, float(rx @ ry) / den))


def spearman_permutation_pvalue(xs, ys, n_perm: int = 2000, seed: int = 0) -> tuple[float, float]:
    """Two-sided permutation test; returns (rho, p) with p = (hits + 1) / (n_perm + 1)."""
    rho = spearman(xs, ys)
    rx = rankdata(np.asarray(xs, dtype=float))
    ry = rankdata(np.asarray(ys, dtype=float))
    rx = rx - rx.mean()
    ry = ry - ry.mean()
    den = math.sqrt(float(rx @ rx) * float(ry @ ry))
    gen = np.random.default_rng(seed)
    perms = np.array([gen.permutation(ry) for _ in range(n_perm)])
    null = perms @ rx / den
    hits = int((np.abs(null) >= abs(rho) - 1e-12).sum())
    return rho, (hits + 1) / (n_perm + 1)


# ---------------------------------------------------------------------------
# Quantile regression
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RegressionLine:
    intercept: float
    slope: float
    quantile: float
    point_count: int
    loss: float = float("nan")

    def __post_init__(self):
        if not math.isfinite(self.slope):
            raise ValueError("slope must be finite")
        if self.point_count < 2:
            raise ValueError("point_count must be >= 2")

    def __call__(self, u):
        return self.intercept + self.slope * u


def pinball_loss(residuals, q: float):
    """Sum of rho_q(r) = q r (r >= 0) or (q - 1) r (r < 0) along the last axis."""
    r = np.asarray(residuals, dtype=float)
    return np.where(r >= 0, q * r, (q - 1) * r).sum(axis=-1)


def quantile_regression(points, q: float, *, chunk: int = 4096) -> RegressionLine:
    """Exact linear quantile regression by enumerating lines through point pairs.

    Some optimal line of the two-parameter pinball-loss problem passes through
    two data points, so scanning every pair is exact. Ties are broken by
    smaller slope, then smaller intercept.
    """
    if not 0 < q < 1:
        raise ValueError("quantile must lie in (0, 1)")
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2:
        raise ValueError("points must be a sequence of (u, nu) pairs")
    if pts.shape[0] < 2:
        raise ValueError("quantile regression needs at least 2 points")
    u, v = pts[:, 0], pts[:, 1]
    if np.unique(u).size < 2:
        raise ValueError("degenerate u: all points share one abscissa (vertical line)")

    i, j = np.triu_indices(u.size, k=1)
    du = u[j] - u[i]
    keep = du != 0
    i, j, du = i[keep], j[keep], du[keep]
    with np.errstate(over="ignore", invalid="ignore"):
        slopes = (v[j] - v[i]) / du
        intercepts = v[i] - slopes * u[i]
    lines = np.column_stack([slopes, intercepts])
    # near-equal abscissas can give non-finite lines; those are never optimal
    lines = lines[np.isfinite(lines).all(axis=1)]
    # de-duplicate identical candidate lines before the O(n) loss evaluation
    cand = np.unique(lines, axis=0)
    if cand.shape[0] == 0:
        raise ValueError("degenerate u: abscissas too close for a finite line")

    losses = np.empty(cand.shape[0])
    with np.errstate(over="ignore", invalid="ignore"):
        for a in range(0, cand.shape[0], chunk):
            b, c = cand[a : a + chunk, 0], cand[a : a + chunk, 1]
            resid = v[None, :] - c[:, None] - b[:, None] * u[None, :]
            losses[a : a + chunk] = pinball_loss(resid, q)
    losses[~np.isfinite(losses)] = np.inf

    best = losses.min()
    if not np.isfinite(best):
        raise ValueError("degenerate u: abscissas too close for a finite line")
    tol = 1e-12 * max(1.0, abs(best))
    tied = np.flatnonzero(losses <= best + tol)
    # np.unique sorted rows by (slope, intercept): the first tie wins
    k = int(tied[0])
    return RegressionLine(float(cand[k, 1]), float(cand[k, 0]), float(q), int(u.size), float(losses[k]))


# ---------------------------------------------------------------------------
# Standard normal quantile (Acklam's rational approximation, |rel err| < 1.2e-9)
# ---------------------------------------------------------------------------

_A = (-3.969683028665376e01, 2.209460984245205e02, -2.759285104469687e02, 1.383577518672690e02, -3.066479806614716e01, 2.506628277459239e00)
_B = (-5.447609879822406e01, 1.615858368580409e02, -1.556989798598866e02, 6.680131188771972e01, -1.328068155288572e01)
_C = (-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e00, -2.549732539343734e00, 4.374664141464968e00, 2.938163982698783e00)
_D = (7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e00, 3.754408661907416e00)
_P_LOW = 0.02425


def normal_quantile(p: float) -> float:
    if not 0 < p < 1:
        raise ValueError("p must lie in (0, 1)")
    if p < _P_LOW:
        t = math.sqrt(-2 * math.log(p))
        return (((((_C[0] * t + _C[1]) * t + _C[2]) * t + _C[3]) * t + _C[4]) * t + _C[5]) / (
            (((_D[0] * t + _D[1]) * t + _D[2]) * t + _D[3]) * t + 1
        )
    if p > 1 - _P_LOW:
        return -normal_quantile(1 - p)
    s = p - 0.5
    r = s * s
    return (((((_A[0] * r + _A[1]) * r + _A[2]) * r + _A[3]) * r + _A[4]) * r + _A[5]) * s / (
        ((((_B[0] * r + _B[1]) * r + _B[2]) * r + _B[3]) * r + _B[4]) * r + 1
    )
