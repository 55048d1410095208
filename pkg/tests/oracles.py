"""Independent reference implementations used only by the tests.

Each oracle takes a different route from the package code: brute-force tree
expansion, grid search, the rank-difference formula, stdlib statistics.
"""

from __future__ import annotations

import itertools
import math
import statistics

import numpy as np

WEEK_S = 7 * 24 * 3600


def brute_force_distribution(segments, departure=0):
    """Exact travel-time distribution by expanding every leaf.

    ``segments`` is a list of (length_m, table) where ``table(interval)``
    returns [(speed_mps, prob), ...]. No merging of partial states.
    """
    leaves = []

    def walk(k, elapsed, prob):
        if k == len(segments):
            leaves.append((elapsed, prob))
            return
        length, table = segments[k]
        slot = int(((departure + elapsed) % WEEK_S) // 900)
        for speed, p in table(slot):
            if p > 0:
                walk(k + 1, elapsed + length / speed, prob * p)

    walk(0, 0.0, 1.0)
    out: dict[float, float] = {}
    for t, p in leaves:
        key = round(t, 9)
        out[key] = out.get(key, 0.0) + p
    return sorted(out.items()), len(leaves)


def invariant_distribution(segments):
    """Time-invariant case: product over per-segment (time, prob) outcomes."""
    per_seg = [[(length / s, p) for s, p in levels if p > 0] for length, levels in segments]
    out: dict[float, float] = {}
    for combo in itertools.product(*per_seg):
        t = round(sum(c[0] for c in combo), 9)
        out[t] = out.get(t, 0.0) + math.prod(c[1] for c in combo)
    return sorted(out.items())


def discrete_quantile(outcomes, p):
    """Smallest outcome with cumulative probability >= p."""
    cum = 0.0
    for t, q in outcomes:
        cum += q
        if cum >= p - 1e-12:
            return t
    return outcomes[-1][0]


def linear_percentile(samples, y):
    return float(np.percentile(np.asarray(samples, dtype=float), y, method="linear"))


def cov(samples):
    return statistics.stdev(samples) / statistics.fmean(samples)


def spearman_no_ties(xs, ys):
    """1 - 6 sum d^2 / (n (n^2 - 1)); valid only without ties."""
    n = len(xs)
    rx = {v: i for i, v in enumerate(sorted(xs))}
    ry = {v: i for i, v in enumerate(sorted(ys))}
    d2 = sum((rx[a] - ry[b]) ** 2 for a, b in zip(xs, ys))
    return 1 - 6 * d2 / (n * (n * n - 1))


def pinball(u, v, a, b, q):
    r = np.asarray(v) - a - b * np.asarray(u)
    return float(np.where(r >= 0, q * r, (q - 1) * r).sum())


def grid_quantile_fit(u, v, q, *, coarse=201, rounds=6):
    """Minimum pinball loss over (a, b) by iteratively refined grid search."""
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    span_b = (v.max() - v.min() + 1e-9) / max(np.ptp(u), 1e-9) * 2
    b_lo, b_hi = -span_b, span_b
    a_lo, a_hi = v.min() - span_b * np.abs(u).max() - 1, v.max() + span_b * np.abs(u).max() + 1
    best = (math.inf, 0.0, 0.0)
    for _ in range(rounds):
        bs = np.linspace(b_lo, b_hi, coarse)
        As = np.linspace(a_lo, a_hi, coarse)
        B, A = np.meshgrid(bs, As, indexing="ij")
        r = v[None, None, :] - A[..., None] - B[..., None] * u[None, None, :]
        loss = np.where(r >= 0, q * r, (q - 1) * r).sum(axis=-1)
        i, j = np.unravel_index(np.argmin(loss), loss.shape)
        if loss[i, j] < best[0]:
            best = (float(loss[i, j]), float(A[i, j]), float(B[i, j]))
        db, da = (b_hi - b_lo) / coarse * 4, (a_hi - a_lo) / coarse * 4
        b_lo, b_hi = best[2] - db, best[2] + db
        a_lo, a_hi = best[1] - da, best[1] + da
    return best


def normal_two_sided(confidence):
    return statistics.NormalDist().inv_cdf((1 + confidence) / 2)


def mm1_response(arrival_rate, mean_service):
    rho = arrival_rate * mean_service
    return mean_service / (1 - rho)
