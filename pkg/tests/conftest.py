from __future__ import annotations

import os

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from adaptive_ptdr import harness
from adaptive_ptdr.errormodel import ErrorModel
from adaptive_ptdr.roadnet import INTERVALS_PER_WEEK, Network, Path, Segment, SpeedProfile, SynthConfig, synth_network
from adaptive_ptdr.stats import RegressionLine

settings.register_profile(
    "repo",
    deadline=None,
    derandomize=True,
    suppress_health_check=[HealthCheck.too_slow, HealthCheck.function_scoped_fixture],
)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "repo"))

ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)


def mps_profile(pid, levels):
    """Time-invariant profile from (speed m/s, prob) pairs."""
    return SpeedProfile.constant(pid, levels, mps=True)


def slot_profile(pid, table):
    """Profile from a function interval -> [(speed m/s, prob), ...]; level count must be fixed."""
    rows = [table(k) for k in range(INTERVALS_PER_WEEK)]
    speeds = np.array([[s * 3.6 for s, _ in r] for r in rows])
    probs = np.array([[p for _, p in r] for r in rows])
    return SpeedProfile(pid, speeds, probs)


def make_network(specs, profiles, paths=None):
    """``specs``: [(segment_id, length_m, profile_id)]; ``paths``: {path_id: [segment ids]}."""
    segments = {sid: Segment(sid, float(length), pid) for sid, length, pid in specs}
    profs = {p.profile_id: p for p in profiles}
    if paths is None:
        paths = {"r0": [s[0] for s in specs]}
    return Network(segments, profs, {k: Path(k, tuple(v)) for k, v in paths.items()})


@pytest.fixture
def deterministic_net():
    """One 1000 m segment at a constant 10 m/s."""
    return make_network([("s0", 1000, "fixed")], [mps_profile("fixed", [(10.0, 1.0)])])


@pytest.fixture
def coin_net():
    """One 1000 m segment at 10 or 20 m/s with equal odds."""
    return make_network([("s0", 1000, "coin")], [mps_profile("coin", [(10.0, 0.5), (20.0, 0.5)])])


def flat_model(slopes=None, intercepts=None, percentile=95.0, quantile=0.75):
    slopes = slopes or {100: 0.38, 300: 0.22, 1000: 0.12, 3000: 0.071}
    intercepts = intercepts or {}
    lines = {L: RegressionLine(intercepts.get(L, 0.0), b, quantile, 2) for L, b in slopes.items()}
    return ErrorModel(percentile, quantile, lines, {"seed": 0, "repetitions": 30, "record_count": 0})


@pytest.fixture(scope="session")
def small_net():
    """Reduced synthetic network for fast integration tests."""
    return synth_network(SynthConfig(segment_count=300, profile_count=16, path_count=40, seed=7))


@pytest.fixture(scope="session")
def small_training(small_net):
    reqs = harness.sample_requests(small_net, 40, 1, prefix="t", workload="profiling")
    return harness.run_training(small_net, reqs, R=10, seed=1)
