"""Probabilistic road network: speed profiles, segments, paths.

Speed profiles hold one discrete speed distribution per 15-minute slot of a
week (672 slots, week origin Monday 00:00). Files carry speeds in km/h; the
simulation works in m/s.
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path as FsPath

import numpy as np

INTERVAL_S = 900
INTERVALS_PER_DAY = 96
INTERVALS_PER_WEEK = 7 * INTERVALS_PER_DAY
WEEK_S = INTERVAL_S * INTERVALS_PER_WEEK
KMH_PER_MPS = 3.6
MIN_LEVELS = 1
MAX_LEVELS = 8
PROB_TOL = 1e-9

__all__ = [
    "INTERVAL_S",
    "INTERVALS_PER_WEEK",
    "WEEK_S",
    "NetworkError",
    "SpeedProfile",
    "Segment",
    "Path",
    "Request",
    "Network",
    "SynthConfig",
    "interval_index",
    "check_departure",
    "profile_at",
    "load_network",
    "save_network",
    "synth_network",
]


class NetworkError(ValueError):
    """Invalid network data; ``line`` is set when the problem has a file location."""

    def __init__(self, message: str, *, file: str | None = None, line: int | None = None):
        self.file = file
        self.line = line
        where = ""
        if file is not None:
            where = f"{file}:{line}: " if line is not None else f"{file}: "
        super().__init__(where + message)


def interval_index(seconds_into_week: float) -> int:
    """Slot index of a time point, wrapping at the week boundary."""
    return int((seconds_into_week % WEEK_S) // INTERVAL_S)


def check_departure(departure: int) -> int:
    if isinstance(departure, bool) or not isinstance(departure, (int, np.integer)):
        raise ValueError(f"departure must be an integer number of seconds, got {departure!r}")
    if not 0 <= departure < WEEK_S:
        raise ValueError(f"departure {departure} outside [0, {WEEK_S})")
    return int(departure)


@dataclass(frozen=True, eq=False)
class SpeedProfile:
    """Weekly speed profile.

    ``speeds_kmh`` and ``probs`` have shape (672, L). Speeds are kept in
    km/h as given by the data source so that save/load is lossless; ``speeds``
    is the derived m/s table used for simulation.
    """

    profile_id: str
    speeds_kmh: np.ndarray
    probs: np.ndarray

    def __post_init__(self):
        speeds = np.array(self.speeds_kmh, dtype=float)
        probs = np.array(self.probs, dtype=float)
        if speeds.ndim != 2 or speeds.shape != probs.shape:
            raise NetworkError(f"profile {self.profile_id}: speed/probability tables must be 2-D and equal shape")
        if speeds.shape[0] != INTERVALS_PER_WEEK:
            raise NetworkError(
                f"profile {self.profile_id}: expected {INTERVALS_PER_WEEK} intervals, got {speeds.shape[0]}"
            )
        if not MIN_LEVELS <= speeds.shape[1] <= MAX_LEVELS:
            raise NetworkError(
                f"profile {self.profile_id}: level count {speeds.shape[1]} outside [{MIN_LEVELS}, {MAX_LEVELS}]"
            )
        _validate_levels(self.profile_id, speeds, probs)
        speeds.setflags(write=False)
        probs.setflags(write=False)
        object.__setattr__(self, "speeds_kmh", speeds)
        object.__setattr__(self, "probs", probs)

    @classmethod
    def constant(cls, profile_id: str, levels: list[tuple[float, float]], *, mps: bool = False) -> "SpeedProfile":
        """Time-invariant profile from (speed, probability) pairs (km/h unless ``mps``)."""
        speeds = np.array([s * KMH_PER_MPS if mps else s for s, _ in levels], dtype=float)
        probs = np.array([p for _, p in levels], dtype=float)
        return cls(profile_id, np.tile(speeds, (INTERVALS_PER_WEEK, 1)), np.tile(probs, (INTERVALS_PER_WEEK, 1)))

    @property
    def level_count(self) -> int:
        return self.speeds_kmh.shape[1]

    @cached_property
    def speeds(self) -> np.ndarray:
        out = self.speeds_kmh / KMH_PER_MPS
        out.setflags(write=False)
        return out

    @cached_property
    def time_invariant(self) -> bool:
        return bool(
            (self.speeds_kmh == self.speeds_kmh[0]).all() and (self.probs == self.probs[0]).all()
        )

    def levels(self, interval: int) -> list[tuple[float, float]]:
        """(speed m/s, probability) pairs of one interval."""
        return list(zip(self.speeds[interval].tolist(), self.probs[interval].tolist()))

    def __eq__(self, other):
        if not isinstance(other, SpeedProfile):
            return NotImplemented
        return (
            self.profile_id == other.profile_id
            and np.array_equal(self.speeds_kmh, other.speeds_kmh)
            and np.array_equal(self.probs, other.probs)
        )

    __hash__ = None


def _validate_levels(profile_id: str, speeds: np.ndarray, probs: np.ndarray, line_of=None) -> None:
    def fail(msg, k):
        line = line_of(k) if line_of else None
        raise NetworkError(f"profile {profile_id}, interval {k}: {msg}", line=line)

    bad = np.flatnonzero(~np.isfinite(speeds).all(axis=1) | (speeds <= 0).any(axis=1))
    if bad.size:
        fail("speeds must be finite and strictly positive", int(bad[0]))
    bad = np.flatnonzero((np.diff(speeds, axis=1) <= 0).any(axis=1))
    if bad.size:
        fail("speeds must be strictly ascending", int(bad[0]))
    bad = np.flatnonzero(~np.isfinite(probs).all(axis=1) | (probs < 0).any(axis=1) | (probs > 1).any(axis=1))
    if bad.size:
        fail("probabilities must lie in [0, 1]", int(bad[0]))
    sums = probs.sum(axis=1)
    bad = np.flatnonzero(np.abs(sums - 1.0) > PROB_TOL)
    if bad.size:
        k = int(bad[0])
        fail(f"probability sum {sums[k]:.12g} ≠ 1", k)


@dataclass(frozen=True)
class Segment:
    segment_id: str
    length: float  # meters
    profile_id: str

    def __post_init__(self):
        if not (math.isfinite(self.length) and self.length > 0):
            raise NetworkError(f"segment {self.segment_id}: length must be > 0, got {self.length}")


@dataclass(frozen=True)
class Path:
    path_id: str
    segments: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "segments", tuple(self.segments))
        if not self.segments:
            raise NetworkError(f"path {self.path_id}: empty segment list")


@dataclass(frozen=True)
class Request:
    """One travel-time query: a path and a departure time (seconds into the week)."""

    request_id: str
    path_id: str
    departure: int

    def __post_init__(self):
        check_departure(self.departure)


@dataclass(frozen=True)
class CompiledPath:
    """Flat arrays consumed by the sampling kernel."""

    lengths: np.ndarray  # (n,) meters
    profile_index: np.ndarray  # (n,) into Network.speed_table
    min_speed: np.ndarray  # (n,) m/s over the whole week
    max_speed: np.ndarray


@dataclass(frozen=True, eq=False)
class Network:
    """Immutable, cross-referenced road network."""

    segments: dict[str, Segment]
    profiles: dict[str, SpeedProfile]
    paths: dict[str, Path] = field(default_factory=dict)

    def __post_init__(self):
        for seg in self.segments.values():
            if seg.profile_id not in self.profiles:
                raise NetworkError(f"segment {seg.segment_id}: dangling profile reference {seg.profile_id!r}")
        for path in self.paths.values():
            for sid in path.segments:
                if sid not in self.segments:
                    raise NetworkError(f"path {path.path_id}: dangling segment reference {sid!r}")

    def __eq__(self, other):
        if not isinstance(other, Network):
            return NotImplemented
        return self.segments == other.segments and self.profiles == other.profiles and self.paths == other.paths

    __hash__ = None

    def path(self, path_id: str) -> Path:
        try:
            return self.paths[path_id]
        except KeyError:
            raise KeyError(f"unknown path {path_id!r}") from None

    def segment(self, segment_id: str) -> Segment:
        try:
            return self.segments[segment_id]
        except KeyError:
            raise KeyError(f"unknown segment {segment_id!r}") from None

    @cached_property
    def profile_order(self) -> dict[str, int]:
        return {pid: k for k, pid in enumerate(sorted(self.profiles))}

    @cached_property
    def _tables(self) -> tuple[np.ndarray, np.ndarray]:
        # Padded to the widest profile: padded levels repeat the top speed with
        # cumulative probability exactly 1, so they can never be drawn.
        order = self.profile_order
        width = max((p.level_count for p in self.profiles.values()), default=MIN_LEVELS)
        speeds = np.empty((len(order), INTERVALS_PER_WEEK, width))
        cum = np.ones((len(order), INTERVALS_PER_WEEK, width))
        for pid, k in order.items():
            prof = self.profiles[pid]
            L = prof.level_count
            speeds[k, :, :L] = prof.speeds
            speeds[k, :, L:] = prof.speeds[:, -1:]
            c = np.cumsum(prof.probs, axis=1)
            c[:, -1] = 1.0
            cum[k, :, :L] = c
        speeds.setflags(write=False)
        cum.setflags(write=False)
        return speeds, cum

    @property
    def speed_table(self) -> np.ndarray:
        """(profiles, 672, Lmax) speeds in m/s."""
        return self._tables[0]

    @property
    def cum_table(self) -> np.ndarray:
        """(profiles, 672, Lmax) cumulative level probabilities, last column 1."""
        return self._tables[1]

    @cached_property
    def _speed_bounds(self) -> tuple[np.ndarray, np.ndarray]:
        profs = [self.profiles[pid] for pid in self.profile_order]
        lo = np.array([p.speeds[:, 0].min() for p in profs])
        hi = np.array([p.speeds[:, -1].max() for p in profs])
        return lo, hi

    @cached_property
    def _compiled(self) -> dict:
        return {}

    def compile_path(self, path: Path | str) -> CompiledPath:
        """Array form of a path; memoised per segment sequence so repeated queries skip the setup."""
        if isinstance(path, str):
            path = self.path(path)
        key = tuple(path.segments)
        cp = self._compiled.get(key)
        if cp is None:
            segs = [self.segment(sid) for sid in key]
            order = self.profile_order
            lengths = np.array([s.length for s in segs], dtype=float)
            pidx = np.array([order[s.profile_id] for s in segs], dtype=np.int64)
            lo, hi = self._speed_bounds
            cp = CompiledPath(lengths, pidx, lo[pidx], hi[pidx])
            self._compiled[key] = cp
        return cp

    @cached_property
    def content_hash(self) -> str:
        h = hashlib.sha256()
        for sid in sorted(self.segments):
            s = self.segments[sid]
            h.update(f"S|{sid}|{s.length!r}|{s.profile_id}\n".encode())
        for pid in sorted(self.profiles):
            p = self.profiles[pid]
            h.update(f"P|{pid}|{p.level_count}\n".encode())
            h.update(np.ascontiguousarray(p.speeds_kmh).tobytes())
            h.update(np.ascontiguousarray(p.probs).tobytes())
        for pid in sorted(self.paths):
            h.update(("R|" + pid + "|" + ",".join(self.paths[pid].segments) + "\n").encode())
        return h.hexdigest()


def profile_at(network: Network, segment_id: str, elapsed_time: float) -> list[tuple[float, float]]:
    """Discrete speed distribution (m/s, probability) of a segment at a time point of the week."""
    seg = network.segment(segment_id)
    return network.profiles[seg.profile_id].levels(interval_index(elapsed_time))


# ---------------------------------------------------------------------------
# File formats
# ---------------------------------------------------------------------------

SEGMENTS_FILE = "segments.csv"
PROFILES_FILE = "profiles.csv"
PATHS_FILE = "paths.json"


def _parse_float(text: str, what: str, file: str, line: int) -> float:
    try:
        value = float(text)
    except ValueError:
        raise NetworkError(f"{what}: cannot parse {text!r} as a number", file=file, line=line) from None
    if not math.isfinite(value):
        raise NetworkError(f"{what}: non-finite value {text!r}", file=file, line=line)
    return value


def _read_segments(file) -> dict[str, Segment]:
    name = str(file)
    out: dict[str, Segment] = {}
    with open(file, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != ["segment_id", "length_m", "profile_id"]:
            raise NetworkError("header must be segment_id,length_m,profile_id", file=name, line=1)
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != 3:
                raise NetworkError(f"expected 3 columns, got {len(row)}", file=name, line=lineno)
            sid, length_s, pid = (c.strip() for c in row)
            if not sid or not pid:
                raise NetworkError("empty identifier", file=name, line=lineno)
            if sid in out:
                raise NetworkError(f"duplicate segment {sid!r}", file=name, line=lineno)
            length = _parse_float(length_s, "length_m", name, lineno)
            if length <= 0:
                raise NetworkError(f"non-positive length {length} for segment {sid!r}", file=name, line=lineno)
            out[sid] = Segment(sid, length, pid)
    return out


def _read_profiles(file) -> dict[str, SpeedProfile]:
    name = str(file)
    rows: dict[str, dict] = {}
    with open(file, newline="") as fh:
        reader = csv.reader(fh)
        header = [h.strip() for h in next(reader, [])]
        width = (len(header) - 2) // 2
        expected = ["profile_id", "interval"]
        for k in range(1, width + 1):
            expected += [f"speed_kmh_{k}", f"prob_{k}"]
        if width < 1 or header != expected:
            raise NetworkError(
                "header must be profile_id,interval,speed_kmh_1,prob_1,...,speed_kmh_L,prob_L", file=name, line=1
            )
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(header):
                raise NetworkError(f"expected {len(header)} columns, got {len(row)}", file=name, line=lineno)
            cells = [c.strip() for c in row]
            pid, interval = cells[0], cells[1]
            levels = []
            for k in range(width):
                s, p = cells[2 + 2 * k], cells[3 + 2 * k]
                if not s and not p:
                    continue
                if not s or not p:
                    raise NetworkError(f"level {k + 1}: speed and probability must both be present", file=name, line=lineno)
                if levels and levels[-1] is None:
                    raise NetworkError("gap between levels", file=name, line=lineno)
                speed = _parse_float(s, f"speed_kmh_{k + 1}", name, lineno)
                prob = _parse_float(p, f"prob_{k + 1}", name, lineno)
                if speed <= 0:
                    raise NetworkError(f"non-positive speed {speed}", file=name, line=lineno)
                levels.append((speed, prob))
            if len(levels) < MIN_LEVELS:
                raise NetworkError(f"need at least {MIN_LEVELS} levels, got {len(levels)}", file=name, line=lineno)
            total = sum(p for _, p in levels)
            if abs(total - 1.0) > PROB_TOL:
                raise NetworkError(f"probability sum {total:.12g} ≠ 1", file=name, line=lineno)
            speeds = [s for s, _ in levels]
            if any(b <= a for a, b in zip(speeds, speeds[1:])):
                raise NetworkError("speeds must be strictly ascending", file=name, line=lineno)
            if any(not 0 <= p <= 1 for _, p in levels):
                raise NetworkError("probabilities must lie in [0, 1]", file=name, line=lineno)

            entry = rows.setdefault(pid, {"all": None, "slots": {}, "lines": {}})
            if interval == "*":
                if entry["all"] is not None or entry["slots"]:
                    raise NetworkError(f"profile {pid!r}: '*' row must be the only row", file=name, line=lineno)
                entry["all"] = (levels, lineno)
            else:
                if entry["all"] is not None:
                    raise NetworkError(f"profile {pid!r}: '*' row must be the only row", file=name, line=lineno)
                try:
                    k = int(interval)
                except ValueError:
                    raise NetworkError(f"bad interval {interval!r}", file=name, line=lineno) from None
                if not 0 <= k < INTERVALS_PER_WEEK:
                    raise NetworkError(f"interval {k} outside [0, {INTERVALS_PER_WEEK})", file=name, line=lineno)
                if k in entry["slots"]:
                    raise NetworkError(f"profile {pid!r}: duplicate interval {k}", file=name, line=lineno)
                entry["slots"][k] = levels
                entry["lines"][k] = lineno

    out: dict[str, SpeedProfile] = {}
    for pid, entry in rows.items():
        if entry["all"] is not None:
            levels, lineno = entry["all"]
            table = [levels] * INTERVALS_PER_WEEK
        else:
            missing = INTERVALS_PER_WEEK - len(entry["slots"])
            if missing:
                raise NetworkError(f"profile {pid!r}: {missing} intervals missing", file=name)
            table = [entry["slots"][k] for k in range(INTERVALS_PER_WEEK)]
            counts = {len(t) for t in table}
            if len(counts) != 1:
                raise NetworkError(f"profile {pid!r}: level count varies across intervals", file=name)
        speeds = np.array([[s for s, _ in lv] for lv in table])
        probs = np.array([[p for _, p in lv] for lv in table])
        out[pid] = SpeedProfile(pid, speeds, probs)
    return out


def _read_paths(file) -> dict[str, Path]:
    name = str(file)
    try:
        with open(file) as fh:
            data = json.load(fh)
    except json.JSONDecodeError as exc:
        raise NetworkError(f"invalid JSON: {exc.msg}", file=name, line=exc.lineno) from None
    if not isinstance(data, list):
        raise NetworkError("top level must be an array", file=name)
    out: dict[str, Path] = {}
    for k, item in enumerate(data):
        if not isinstance(item, dict) or not isinstance(item.get("path_id"), str) or not isinstance(item.get("segments"), list):
            raise NetworkError(f"entry {k}: expected {{path_id, segments:[...]}}", file=name)
        pid = item["path_id"]
        if pid in out:
            raise NetworkError(f"duplicate path {pid!r}", file=name)
        if not all(isinstance(s, str) for s in item["segments"]):
            raise NetworkError(f"path {pid!r}: segment ids must be strings", file=name)
        out[pid] = Path(pid, tuple(item["segments"]))
    return out


def load_network(segments_file, profiles_file, paths_file) -> Network:
    """Read and cross-check the three network files."""
    segments = _read_segments(segments_file)
    profiles = _read_profiles(profiles_file)
    paths = _read_paths(paths_file)
    for seg in segments.values():
        if seg.profile_id not in profiles:
            raise NetworkError(
                f"segment {seg.segment_id!r}: dangling profile reference {seg.profile_id!r}", file=str(segments_file)
            )
    for path in paths.values():
        for sid in path.segments:
            if sid not in segments:
                raise NetworkError(f"path {path.path_id!r}: dangling segment reference {sid!r}", file=str(paths_file))
    return Network(segments, profiles, paths)


def load_network_dir(directory) -> Network:
    d = FsPath(directory)
    return load_network(d / SEGMENTS_FILE, d / PROFILES_FILE, d / PATHS_FILE)


def save_network(network: Network, directory) -> None:
    """Write segments.csv, profiles.csv and paths.json into ``directory``."""
    d = FsPath(directory)
    d.mkdir(parents=True, exist_ok=True)
    with open(d / SEGMENTS_FILE, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["segment_id", "length_m", "profile_id"])
        for sid in sorted(network.segments):
            s = network.segments[sid]
            w.writerow([sid, repr(float(s.length)), s.profile_id])

    width = max((p.level_count for p in network.profiles.values()), default=MIN_LEVELS)
    with open(d / PROFILES_FILE, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        header = ["profile_id", "interval"]
        for k in range(1, width + 1):
            header += [f"speed_kmh_{k}", f"prob_{k}"]
        w.writerow(header)
        for pid in sorted(network.profiles):
            prof = network.profiles[pid]
            pad = [""] * (2 * (width - prof.level_count))
            intervals = ["*"] if prof.time_invariant else range(INTERVALS_PER_WEEK)
            for k in intervals:
                row = prof.speeds_kmh[0 if k == "*" else k]
                pr = prof.probs[0 if k == "*" else k]
                cells = [pid, str(k)]
                for s, p in zip(row.tolist(), pr.tolist()):
                    cells += [repr(s), repr(p)]
                w.writerow(cells + pad)

    payload = [{"path_id": pid, "segments": list(network.paths[pid].segments)} for pid in sorted(network.paths)]
    with open(d / PATHS_FILE, "w") as fh:
        json.dump(payload, fh, indent=1)
        fh.write("\n")


# ---------------------------------------------------------------------------
# Synthetic generator
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SynthConfig:
    """Parameters of the synthetic network generator.

    Segments are laid out along a corridor whose "urbanity" drifts slowly, so
    contiguous paths differ systematically in how congestion-prone they are.
    Congestion intensity follows a weekly pattern with weekday peaks inside
    ``morning_window`` and ``evening_window`` (hours, [start, end)).

    In each slot a profile with congestion level ``c`` puts Binomial(L-1, 1-c)
    mass on its L speed levels. Off-peak the levels sit close together
    (a per-profile fraction, drawn from ``calm_spread``, of the full
    ``level_factors`` spread) and ``c`` rests at ``calm_congestion`` times
    ``congestion_amplitude``; both rise with the congestion intensity, scaled
    by the profile's sensitivity. ``c`` never exceeds the amplitude, so an
    amplitude of 0 leaves all mass on the free-flow level.
    """

    segment_count: int = 2000
    profile_count: int = 48
    path_count: int = 400
    path_length: tuple[int, int] = (5, 12)
    segment_length_m: tuple[float, float] = (150.0, 900.0)
    base_speed_kmh: tuple[float, float] = (40.0, 110.0)
    level_factors: tuple[float, ...] = (0.2, 0.4, 0.65, 1.0)
    rush_depression: float = 0.8
    morning_window: tuple[float, float] = (7.0, 8.0)
    evening_window: tuple[float, float] = (16.0, 17.0)
    weekend_peak_hour: float = 10.5
    daytime_level: float = 0.05
    night_level: float = 0.02
    congestion_amplitude: float = 0.65
    sensitivity: tuple[float, float] = (0.7, 1.0)
    calm_spread: tuple[float, float] = (0.05, 0.3)
    calm_congestion: float = 0.46
    seed: int = 2024

    def __post_init__(self):
        def rng_ok(pair, lo=0.0):
            return pair[0] > lo and pair[1] > pair[0]

        if self.segment_count < 1 or self.profile_count < 1 or self.path_count < 0:
            raise ValueError("segment_count and profile_count must be >= 1, path_count >= 0")
        if not (1 <= self.path_length[0] < self.path_length[1] <= self.segment_count):
            raise ValueError("path_length must be a non-degenerate range within segment_count")
        if not rng_ok(self.segment_length_m) or not rng_ok(self.base_speed_kmh):
            raise ValueError("segment_length_m and base_speed_kmh must be positive, non-degenerate ranges")
        if not (self.sensitivity[0] >= 0 and self.sensitivity[1] > self.sensitivity[0] and self.sensitivity[1] <= 1):
            raise ValueError("sensitivity must be a non-degenerate range within [0, 1]")
        f = self.level_factors
        if not (2 <= len(f) <= MAX_LEVELS) or any(b <= a for a, b in zip(f, f[1:])):
            raise ValueError("level_factors must be 2..8 strictly ascending values")
        if not all(0 < x <= 1 for x in f) or f[-1] != 1.0:
            raise ValueError("level_factors must lie in (0, 1] and end at 1.0 (free flow)")
        if not 0 < self.rush_depression <= 1:
            raise ValueError("rush_depression must be in (0, 1]")
        if not 0 <= self.congestion_amplitude <= 1:
            raise ValueError("congestion_amplitude must be in [0, 1]")
        if not 0 < self.calm_spread[0] <= self.calm_spread[1] <= 1:
            raise ValueError("calm_spread must be an ordered range within (0, 1]")
        if not 0 <= self.calm_congestion < 1:
            raise ValueError("calm_congestion must be in [0, 1)")
        for w in (self.morning_window, self.evening_window):
            if not 0 <= w[0] < w[1] <= 24:
                raise ValueError("rush windows must be non-degenerate hour ranges within a day")
        if not (0 <= self.night_level <= 1 and 0 <= self.daytime_level <= 1):
            raise ValueError("night_level and daytime_level must be in [0, 1]")


def congestion_intensity(config: SynthConfig) -> np.ndarray:
    """Weekly congestion intensity in [0, 1], one value per slot."""
    k = np.arange(INTERVALS_PER_WEEK)
    day = k // INTERVALS_PER_DAY
    hour = (k % INTERVALS_PER_DAY + 0.5) / 4.0

    def bump(center, width):
        return np.exp(-0.5 * ((hour - center) / width) ** 2)

    def window_bump(window):
        a, b = window
        # flat top over the window, Gaussian shoulders outside it
        inside = (hour >= a) & (hour < b)
        dist = np.where(hour < a, a - hour, hour - b)
        return np.where(inside, 1.0, np.exp(-0.5 * (dist / 0.45) ** 2))

    daytime = 1.0 / (1.0 + np.exp(-(hour - 6.0) * 3)) - 1.0 / (1.0 + np.exp(-(hour - 21.0) * 3))
    base = config.night_level + (config.daytime_level - config.night_level) * daytime
    weekday = base + (1 - base) * np.maximum(window_bump(config.morning_window), window_bump(config.evening_window))
    weekend = base + (1 - base) * np.maximum(
        0.6 * bump(config.weekend_peak_hour, 1.0), 0.15 * window_bump(config.evening_window)
    )
    return np.clip(np.where(day < 5, weekday, weekend), 0.0, 1.0)


def synth_network(config: SynthConfig | None = None) -> Network:
    """Deterministic synthetic network with rush-hour structured profiles."""
    config = config or SynthConfig()
    rng = np.random.default_rng(config.seed)
    intensity = congestion_intensity(config)
    factors = np.array(config.level_factors)
    L = len(factors)
    binom = np.array([math.comb(L - 1, k) for k in range(L)], dtype=float)
    ks = np.arange(L)

    sens = np.sort(rng.uniform(*config.sensitivity, size=config.profile_count))
    base = rng.uniform(*config.base_speed_kmh, size=config.profile_count)
    calm = rng.uniform(*config.calm_spread, size=config.profile_count)
    pwidth = len(str(config.profile_count - 1))
    profiles: dict[str, SpeedProfile] = {}
    for p in range(config.profile_count):
        c0 = config.calm_congestion
        c = config.congestion_amplitude * (c0 + (1.0 - c0) * sens[p] * intensity)  # (672,)
        spread = calm[p] + (1.0 - calm[p]) * sens[p] * intensity
        fac = 1.0 - (1.0 - factors[None, :]) * spread[:, None]
        depress = 1.0 - (1.0 - config.rush_depression) * intensity
        speeds = np.round(base[p] * depress[:, None] * fac, 3)
        probs = binom * c[:, None] ** (L - 1 - ks) * (1.0 - c[:, None]) ** ks
        probs[:, -1] = 1.0 - probs[:, :-1].sum(axis=1)
        pid = f"p{p:0{pwidth}d}"
        profiles[pid] = SpeedProfile(pid, speeds, probs)

    # corridor urbanity: smooth random walk mapped onto the sensitivity-sorted profiles
    n = config.segment_count
    x = np.arange(n)
    urban = np.zeros(n)
    for _ in range(4):
        period = rng.uniform(n / 8, n / 2)
        urban += rng.uniform(0.5, 1.0) * np.sin(2 * np.pi * x / period + rng.uniform(0, 2 * np.pi))
    urban = (urban - urban.min()) / max(np.ptp(urban), 1e-12)
    pick = np.clip(np.round(urban * (config.profile_count - 1) + rng.normal(0, 2.0, n)), 0, config.profile_count - 1)
    lengths = np.round(rng.uniform(*config.segment_length_m, size=n), 1)
    swidth = len(str(n - 1))
    seg_ids = [f"s{i:0{swidth}d}" for i in range(n)]
    pids = sorted(profiles)
    segments = {sid: Segment(sid, float(lengths[i]), pids[int(pick[i])]) for i, sid in enumerate(seg_ids)}

    paths: dict[str, Path] = {}
    rwidth = len(str(max(config.path_count - 1, 0)))
    lo, hi = config.path_length
    for r in range(config.path_count):
        length = int(rng.integers(lo, hi + 1))
        start = int(rng.integers(0, n - length + 1))
        pid = f"r{r:0{rwidth}d}"
        paths[pid] = Path(pid, tuple(seg_ids[start : start + length]))
    return Network(segments, profiles, paths)
