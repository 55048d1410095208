"""Monte Carlo travel-time sampler and exact enumeration oracle.

A traversal walks the path segment by segment. The speed distribution of a
segment is looked up at the departure time plus the time already spent on the
path, and one uniform draw per segment picks a level by cumulative-probability
inversion (a draw equal to a cumulative boundary goes to the higher level).
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numba as nb
import numpy as np

from . import rng
from .roadnet import INTERVAL_S, WEEK_S, Network, Path, check_departure, interval_index

__all__ = [
    "SampleSet",
    "ExactDistribution",
    "TreeTooLarge",
    "simulate_traversal",
    "run_mcs",
    "enumerate_exact",
]

EXACT_TREE_LIMIT = 10**7


@dataclass(frozen=True, eq=False)
class SampleSet:
    samples: np.ndarray  # travel times, seconds
    departure: int
    path_id: str
    seed: int
    stream: int = 0
    offset: int = 0

    @property
    def count(self) -> int:
        return int(self.samples.size)

    def __len__(self):
        return self.count

    def __eq__(self, other):
        if not isinstance(other, SampleSet):
            return NotImplemented
        return (
            (self.departure, self.path_id, self.seed, self.stream, self.offset)
            == (other.departure, other.path_id, other.seed, other.stream, other.offset)
            and np.array_equal(self.samples, other.samples)
        )

    __hash__ = None


@dataclass(frozen=True)
class ExactDistribution:
    times: np.ndarray  # sorted ascending, distinct
    probs: np.ndarray
    leaf_count: int  # root-to-leaf traversals with non-zero probability
    time_variant_encountered: bool

    @property
    def outcomes(self) -> list[tuple[float, float]]:
        return list(zip(self.times.tolist(), self.probs.tolist()))

    @property
    def mean(self) -> float:
        return float(np.dot(self.times, self.probs))

    @property
    def std(self) -> float:
        m = self.mean
        return float(np.sqrt(max(np.dot((self.times - m) ** 2, self.probs), 0.0)))

    def cdf(self, t: float) -> float:
        return float(self.probs[self.times <= t].sum())

    def quantile(self, p: float) -> float:
        """Smallest outcome whose CDF reaches ``p`` (p in [0, 1])."""
        cum = np.cumsum(self.probs)
        k = int(np.searchsorted(cum, p - 1e-12, side="left"))
        return float(self.times[min(k, self.times.size - 1)])


class TreeTooLarge(ValueError):
    pass


def _resolve(network: Network, path) -> Path:
    return network.path(path) if isinstance(path, str) else path


def simulate_traversal(network: Network, path, departure: int, stream: rng.SampleStream) -> float:
    """Travel time of one car over ``path``; consumes one uniform per segment.

    Plain-Python reference for the vectorised kernel used by :func:`run_mcs`.
    """
    path = _resolve(network, path)
    elapsed = 0.0
    for sid in path.segments:
        seg = network.segments[sid]
        prof = network.profiles[seg.profile_id]
        k = interval_index(departure + elapsed)
        u = stream.next()
        cum = 0.0
        level = prof.level_count - 1
        # cumulative boundaries are recomputed exactly as the kernel's table:
        # running sum, last boundary pinned to 1
        for j in range(prof.level_count - 1):
            cum += float(prof.probs[k, j])
            if cum > u:
                level = j
                break
        elapsed += seg.length / float(prof.speeds[k, level])
    return elapsed


@nb.njit(nogil=True, cache=True)
def _mcs_kernel(lengths, pidx, speed_table, cum_table, departure, key, start, count, out):
    n = lengths.shape[0]
    width = cum_table.shape[2]
    for s in range(count):
        skey = rng.nb_sample_key(key, start + s)
        elapsed = 0.0
        for j in range(n):
            k = int(((departure + elapsed) % WEEK_S) // INTERVAL_S)
            u = rng.nb_uniform(skey, j)
            p = pidx[j]
            level = 0
            for lv in range(width - 1):
                if cum_table[p, k, lv] <= u:
                    level = lv + 1
                else:
                    break
            elapsed += lengths[j] / speed_table[p, k, level]
        out[s] = elapsed


def run_mcs(
    network: Network,
    path,
    departure: int,
    x: int,
    seed: int,
    *,
    stream: int = 0,
    offset: int = 0,
    workers: int = 1,
) -> SampleSet:
    """``x`` independent traversals; sample ``i`` uses sub-stream (seed, stream, offset + i).

    The result does not depend on ``workers``.
    """
    if isinstance(x, bool) or int(x) != x or x < 1:
        raise ValueError(f"sample count must be >= 1, got {x!r}")
    x = int(x)
    departure = check_departure(departure)
    path = _resolve(network, path)
    cp = network.compile_path(path)
    key = np.uint64(rng.stream_key(seed, stream))
    out = np.empty(x)
    args = (cp.lengths, cp.profile_index, network.speed_table, network.cum_table, float(departure), key)
    if workers <= 1 or x < 2 * workers:
        _mcs_kernel(*args, offset, x, out)
    else:
        bounds = np.linspace(0, x, workers + 1).astype(int)
        with ThreadPoolExecutor(max_workers=workers) as pool:
            futs = [
                pool.submit(_mcs_kernel, *args, offset + int(a), int(b - a), out[a:b])
                for a, b in zip(bounds[:-1], bounds[1:])
            ]
            for f in futs:
                f.result()
    return SampleSet(out, departure, path.path_id, seed, stream, offset)


def enumerate_exact(network: Network, path, departure: int, *, limit: int = EXACT_TREE_LIMIT) -> ExactDistribution:
    """Exact travel-time distribution by expanding the full outcome tree.

    Branches that reach the same accumulated time are merged as the walk
    proceeds (their futures are identical), so the cost is bounded by the
    number of distinct partial times rather than the number of leaves.
    """
    departure = check_departure(departure)
    path = _resolve(network, path)
    segs = [network.segments[sid] for sid in path.segments]
    size = 1
    for seg in segs:
        size *= network.profiles[seg.profile_id].level_count
        if size > limit:
            raise TreeTooLarge(f"outcome tree exceeds {limit} leaves")

    states: dict[float, list] = {0.0: [1.0, 1]}  # elapsed -> [probability, leaf count]
    time_variant = False
    for seg in segs:
        prof = network.profiles[seg.profile_id]
        seen_rows = set()
        nxt: dict[float, list] = {}
        for elapsed, (prob, count) in states.items():
            k = interval_index(departure + elapsed)
            seen_rows.add((prof.speeds_kmh[k].tobytes(), prof.probs[k].tobytes()))
            speeds = prof.speeds[k]
            probs = prof.probs[k]
            for lv in range(prof.level_count):
                p = float(probs[lv])
                if p == 0.0:
                    continue
                t = elapsed + seg.length / float(speeds[lv])
                entry = nxt.get(t)
                if entry is None:
                    nxt[t] = [prob * p, count]
                else:
                    entry[0] += prob * p
                    entry[1] += count
        if len(seen_rows) > 1:
            time_variant = True
        states = nxt

    # sums that differ only by floating-point addition order are one outcome
    times, probs = [], []
    for t in sorted(states):
        if times and t - times[-1] <= 1e-9 * max(1.0, t):
            probs[-1] += states[t][0]
        else:
            times.append(t)
            probs.append(states[t][0])
    leaves = sum(v[1] for v in states.values())
    return ExactDistribution(np.array(times), np.array(probs), int(leaves), time_variant)
