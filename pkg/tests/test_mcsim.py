import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from adaptive_ptdr import rng
from adaptive_ptdr.mcsim import TreeTooLarge, enumerate_exact, run_mcs, simulate_traversal

from . import oracles
from .conftest import make_network, mps_profile, slot_profile


def stream(seed=0, index=0):
    return rng.SampleStream(rng.stream_key(seed), index)


class TestTraversal:
    def test_single_segment(self, deterministic_net):
        for seed in range(5):
            assert simulate_traversal(deterministic_net, "r0", 0, stream(seed)) == 100.0

    def test_additivity(self):
        net = make_network([("a", 1000, "f"), ("b", 1000, "f")], [mps_profile("f", [(10.0, 1.0)])])
        assert simulate_traversal(net, "r0", 0, stream()) == 200.0

    def test_time_dependent_lookup(self):
        prof = slot_profile("tv", lambda k: [(10.0, 1.0)] if k == 0 else [(20.0, 1.0)])
        net = make_network([("s0", 1000, "tv")], [prof])
        assert simulate_traversal(net, "r0", 0, stream()) == 100.0
        assert simulate_traversal(net, "r0", 900, stream()) == 50.0

    def test_accumulated_time_lookup(self):
        # the second segment is entered at 850 + 100 = 950 s, inside slot 1
        prof = slot_profile("tv", lambda k: [(10.0, 1.0)] if k == 0 else [(20.0, 1.0)])
        net = make_network([("a", 1000, "tv"), ("b", 1000, "tv")], [prof])
        assert simulate_traversal(net, "r0", 850, stream()) == 150.0

    def test_week_wraparound(self):
        prof = slot_profile("tv", lambda k: [(10.0, 1.0)] if k == 0 else [(20.0, 1.0)])
        net = make_network([("a", 1000, "tv"), ("b", 1000, "tv")], [prof])
        # departs in the last slot of the week, second segment wraps into slot 0
        assert simulate_traversal(net, "r0", 604800 - 10, stream()) == 50.0 + 100.0

    def test_boundary_tie_goes_up(self, coin_net):
        # a uniform of exactly 0.5 equals the first cumulative boundary
        class Fixed:
            def next(self):
                return 0.5

        assert simulate_traversal(coin_net, "r0", 0, Fixed()) == 50.0

    def test_one_draw_per_segment(self):
        net = make_network([(f"s{k}", 100, "c") for k in range(3)], [mps_profile("c", [(5.0, 0.5), (10.0, 0.5)])])
        s = stream(3, 9)
        simulate_traversal(net, "r0", 0, s)
        assert s._draw == 3


class TestRunMcs:
    def test_deterministic_network(self, deterministic_net):
        for x, seed in ((1, 0), (17, 5), (1000, 123)):
            assert (run_mcs(deterministic_net, "r0", 0, x, seed).samples == 100.0).all()

    def test_reproducible(self, coin_net):
        assert run_mcs(coin_net, "r0", 0, 4, 7) == run_mcs(coin_net, "r0", 0, 4, 7)

    def test_zero_samples_rejected(self, coin_net):
        with pytest.raises(ValueError):
            run_mcs(coin_net, "r0", 0, 0, 1)

    def test_bernoulli_fraction(self, coin_net):
        s = run_mcs(coin_net, "r0", 0, 100_000, 11).samples
        frac = float((s == 100.0).mean())
        assert 0.49 <= frac <= 0.51

    def test_matches_reference_traversal(self, small_net):
        path = sorted(small_net.paths)[3]
        ss = run_mcs(small_net, path, 7 * 3600 + 123, 50, 42)
        key = rng.stream_key(42)
        ref = [simulate_traversal(small_net, path, 7 * 3600 + 123, rng.SampleStream(key, i)) for i in range(50)]
        assert ss.samples.tolist() == ref

    def test_offset_continues_stream(self, small_net):
        path = sorted(small_net.paths)[0]
        full = run_mcs(small_net, path, 1000, 300, 5).samples
        tail = run_mcs(small_net, path, 1000, 200, 5, offset=100).samples
        assert np.array_equal(full[100:], tail)

    def test_streams_differ(self, small_net):
        path = sorted(small_net.paths)[0]
        a = run_mcs(small_net, path, 8 * 3600, 200, 5, stream=0).samples
        b = run_mcs(small_net, path, 8 * 3600, 200, 5, stream=1).samples
        assert not np.array_equal(a, b)

    @pytest.mark.parametrize("workers", [2, 3, 8])
    def test_worker_invariance(self, small_net, workers):
        path = sorted(small_net.paths)[1]
        a = run_mcs(small_net, path, 8 * 3600, 1001, 9)
        b = run_mcs(small_net, path, 8 * 3600, 1001, 9, workers=workers)
        assert a == b

    def test_samples_within_bounds(self, small_net):
        for path in sorted(small_net.paths)[:10]:
            cp = small_net.compile_path(path)
            s = run_mcs(small_net, path, 17 * 3600, 500, 1).samples
            assert (s > 0).all()
            assert s.min() >= (cp.lengths / cp.max_speed).sum() - 1e-9
            assert s.max() <= (cp.lengths / cp.min_speed).sum() + 1e-9


class TestExact:
    def test_single_segment(self, coin_net):
        assert enumerate_exact(coin_net, "r0", 0).outcomes == [(50.0, 0.5), (100.0, 0.5)]

    def test_two_segments(self):
        prof = mps_profile("c", [(10.0, 0.5), (20.0, 0.5)])
        net = make_network([("a", 900, "c"), ("b", 900, "c")], [prof])
        ex = enumerate_exact(net, "r0", 0)
        assert ex.outcomes == [(90.0, 0.25), (135.0, 0.5), (180.0, 0.25)]
        assert not ex.time_variant_encountered

    def test_three_by_three(self):
        prof = mps_profile("t", [(5.0, 0.2), (10.0, 0.3), (25.0, 0.5)])
        net = make_network([("a", 300, "t"), ("b", 700, "t"), ("c", 1100, "t")], [prof])
        ex = enumerate_exact(net, "r0", 0)
        assert ex.leaf_count == 27
        assert abs(ex.probs.sum() - 1.0) <= 1e-12

    def test_time_variant_flag(self):
        prof = slot_profile("tv", lambda k: [(10.0, 0.5), (20.0, 0.5)] if k == 0 else [(30.0, 0.5), (40.0, 0.5)])
        net = make_network([("a", 1000, "tv"), ("b", 1000, "tv")], [prof])
        # first segment ends at 850+50 (slot 1) or 850+100 (slot 1): both branches leave slot 0
        assert not enumerate_exact(net, "r0", 0).time_variant_encountered
        ex = enumerate_exact(net, "r0", 820)
        # 820+50=870 stays in slot 0, 820+100=920 moves to slot 1
        assert ex.time_variant_encountered
        ref, _ = oracles.brute_force_distribution(
            [(1000, prof.levels), (1000, prof.levels)], departure=820
        )
        assert np.allclose(ex.times, [t for t, _ in ref])
        assert np.allclose(ex.probs, [p for _, p in ref])

    def test_guard(self):
        prof = mps_profile("w", [(float(k), 0.125) for k in range(1, 9)])
        net = make_network([(f"s{k}", 100, "w") for k in range(8)], [prof])
        with pytest.raises(TreeTooLarge):
            enumerate_exact(net, "r0", 0)

    @given(
        st.lists(
            st.tuples(
                st.integers(100, 2000),
                st.lists(st.integers(2, 40), min_size=1, max_size=3, unique=True),
                st.lists(st.integers(1, 9), min_size=3, max_size=3),
            ),
            min_size=1,
            max_size=5,
        )
    )
    def test_matches_product_oracle(self, layout):
        specs, profiles, seg_levels = [], [], []
        for k, (length, speeds, weights) in enumerate(layout):
            speeds = sorted(float(s) for s in speeds)
            w = np.array(weights[: len(speeds)], dtype=float)
            probs = (w / w.sum()).tolist()
            probs[-1] = 1.0 - sum(probs[:-1])
            levels = list(zip(speeds, probs))
            profiles.append(mps_profile(f"p{k}", levels))
            specs.append((f"s{k}", length, f"p{k}"))
            seg_levels.append((length, levels))
        net = make_network(specs, profiles)
        ex = enumerate_exact(net, "r0", 3600)
        ref = oracles.invariant_distribution(seg_levels)
        assert np.allclose(ex.times, [t for t, _ in ref], rtol=0, atol=1e-7)
        assert np.allclose(ex.probs, [p for _, p in ref], rtol=0, atol=1e-12)


def test_mean_convergence():
    prof = mps_profile("t", [(5.0, 0.2), (10.0, 0.3), (25.0, 0.5)])
    net = make_network([("a", 300, "t"), ("b", 700, "t"), ("c", 1100, "t")], [prof])
    ex = enumerate_exact(net, "r0", 0)
    s = run_mcs(net, "r0", 0, 200_000, 3).samples
    assert abs(s.mean() - ex.mean) <= 4 * ex.std / np.sqrt(200_000)
