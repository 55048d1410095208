import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from adaptive_ptdr.stats import (
    KEY_PERCENTILES,
    RegressionLine,
    coeff_variation,
    normal_quantile,
    percentile,
    percentiles,
    pinball_loss,
    quantile_regression,
    spearman,
    spearman_permutation_pvalue,
    summarize,
)

from . import oracles

finite = st.floats(-1e6, 1e6, allow_nan=False, allow_infinity=False)
positive = st.floats(1e-3, 1e6, allow_nan=False, allow_infinity=False)

# Values derived once with the oracles in tests/oracles.py and frozen here.
COV_10_20 = 0.47140452079103173
PCT95_1_TO_100 = 95.05


def test_frozen_constants_match_oracles():
    assert oracles.cov([10, 20]) == pytest.approx(COV_10_20, abs=1e-15)
    assert oracles.linear_percentile(range(1, 101), 95) == pytest.approx(PCT95_1_TO_100, abs=1e-12)
    assert oracles.spearman_no_ties([1, 2, 3, 4], [1, 3, 2, 4]) == pytest.approx(0.8)


class TestPercentile:
    def test_constant(self):
        assert percentile([100.0] * 7, 37) == 100.0

    def test_one_to_hundred(self):
        assert percentile(np.arange(1, 101), 95) == pytest.approx(PCT95_1_TO_100, abs=1e-12)

    def test_midpoint(self):
        assert percentile([50, 100], 50) == 75.0

    def test_errors(self):
        with pytest.raises(ValueError):
            percentile([], 50)
        for y in (0, 100, -1, 101):
            with pytest.raises(ValueError):
                percentile([1, 2], y)

    @given(st.lists(finite, min_size=1, max_size=60), st.floats(0.01, 99.99))
    def test_matches_numpy_linear(self, xs, y):
        assert percentile(xs, y) == pytest.approx(oracles.linear_percentile(xs, y), rel=1e-9, abs=1e-6)

    @given(st.lists(finite, min_size=1, max_size=60), st.floats(0.01, 99.99), st.floats(0.01, 99.99))
    def test_monotone_in_y(self, xs, y1, y2):
        lo, hi = sorted((y1, y2))
        assert percentile(xs, lo) <= percentile(xs, hi) + 1e-9 * (1 + max(abs(x) for x in xs))

    @given(
        st.lists(st.floats(-1e3, 1e3, allow_nan=False), min_size=1, max_size=40),
        st.floats(0.01, 99.99),
        st.floats(0.01, 100),
        st.floats(-100, 100),
    )
    def test_affine_equivariance(self, xs, y, a, b):
        lhs = percentile([a * x + b for x in xs], y)
        rhs = a * percentile(xs, y) + b
        assert lhs == pytest.approx(rhs, rel=1e-9, abs=1e-7)


class TestCoV:
    def test_constant(self):
        assert coeff_variation([5.0] * 10) == 0.0

    def test_pair(self):
        assert coeff_variation([10, 20]) == pytest.approx(COV_10_20, abs=1e-12)
        assert round(coeff_variation([10, 20]), 4) == 0.4714

    def test_scale_invariance(self):
        assert coeff_variation([10, 20]) == pytest.approx(coeff_variation([100, 200]))

    def test_errors(self):
        with pytest.raises(ValueError):
            coeff_variation([1.0])
        with pytest.raises(ValueError):
            coeff_variation([-1.0, -2.0])
        with pytest.raises(ValueError):
            coeff_variation([0.0, 0.0])

    @given(st.lists(positive, min_size=2, max_size=50))
    def test_matches_statistics_module(self, xs):
        assert coeff_variation(xs) == pytest.approx(oracles.cov(xs), rel=1e-9, abs=1e-12)


class TestSummary:
    def test_table(self):
        s = summarize(np.arange(1, 101, dtype=float))
        assert tuple(s.percentiles) == KEY_PERCENTILES
        assert s.percentiles[95] == pytest.approx(PCT95_1_TO_100)
        assert s.cov == pytest.approx(s.std / s.mean)

    def test_round_trip(self):
        s = summarize([3.0, 1.0, 4.0, 1.0, 5.0])
        assert type(s).from_dict(s.to_dict()) == s

    @given(st.lists(positive, min_size=2, max_size=30))
    def test_table_nondecreasing(self, xs):
        vals = list(summarize(xs).percentiles.values())
        assert all(b >= a - 1e-9 * max(vals) for a, b in zip(vals, vals[1:]))


class TestSpearman:
    def test_identity(self):
        assert spearman([3, 1, 2, 5], [3, 1, 2, 5]) == 1.0

    def test_reversed(self):
        assert spearman([1, 2, 3, 4, 5], [5, 4, 3, 2, 1]) == -1.0

    def test_swap(self):
        assert spearman([1, 2, 3, 4], [1, 3, 2, 4]) == pytest.approx(0.8)

    def test_ties_average_ranks(self):
        # ranks (1.5, 1.5, 3, 4) against (1, 2, 3, 4)
        rx = np.array([1.5, 1.5, 3, 4])
        ry = np.arange(1, 5, dtype=float)
        want = np.corrcoef(rx, ry)[0, 1]
        assert spearman([7, 7, 8, 9], [1, 2, 3, 4]) == pytest.approx(want)

    def test_errors(self):
        with pytest.raises(ValueError, match="mismatch"):
            spearman([1, 2, 3], [1, 2])
        with pytest.raises(ValueError, match="variance"):
            spearman([1, 1, 1], [1, 2, 3])
        with pytest.raises(ValueError):
            spearman([1, 2], [1, 2])

    @given(st.lists(st.integers(-10**6, 10**6), min_size=3, max_size=40, unique=True), st.randoms())
    def test_matches_rank_difference_formula(self, xs, rnd):
        ys = xs[:]
        rnd.shuffle(ys)
        if len(set(ys)) < 3:
            return
        assert spearman(xs, ys) == pytest.approx(oracles.spearman_no_ties(xs, ys), abs=1e-9)

    @given(
        st.lists(st.integers(-1000, 1000), min_size=3, max_size=30, unique=True),
        st.lists(st.integers(-1000, 1000), min_size=3, max_size=30, unique=True),
    )
    def test_monotone_transform_invariance(self, xs, ys):
        n = min(len(xs), len(ys))
        xs, ys = [x / 7 for x in xs[:n]], [y / 3 for y in ys[:n]]
        rho = spearman(xs, ys)
        assert spearman([math.atan(x) * 3 + 1 for x in xs], ys) == pytest.approx(rho)
        assert spearman(xs, [y**3 for y in ys]) == pytest.approx(rho)

    def test_permutation_pvalue(self):
        gen = np.random.default_rng(0)
        x = gen.normal(size=80)
        rho, p = spearman_permutation_pvalue(x, x + 0.3 * gen.normal(size=80), 999)
        assert rho > 0.8 and p == pytest.approx(1 / 1000)
        _, p_null = spearman_permutation_pvalue(x, gen.normal(size=80), 999)
        assert p_null > 0.01


class TestQuantileRegression:
    @pytest.mark.parametrize("q", [0.5, 0.75, 0.95])
    def test_exact_line(self, q):
        u = np.linspace(0, 0.3, 25)
        line = quantile_regression(np.column_stack([u, 0.1 + 0.3 * u]), q)
        assert line.intercept == pytest.approx(0.1, abs=1e-12)
        assert line.slope == pytest.approx(0.3, abs=1e-12)
        assert line.loss == pytest.approx(0.0, abs=1e-12)

    def test_tie_break(self):
        line = quantile_regression([(0, 0), (1, 0), (1, 1)], 0.5)
        assert (line.intercept, line.slope) == (0.0, 0.0)
        assert line.loss == pytest.approx(0.5)
        # the other pair candidate nu = u reaches the same loss
        assert pinball_loss(np.array([0, 0, 1]) - np.array([0, 1, 1]), 0.5) == pytest.approx(0.5)

    def test_higher_quantile_is_more_conservative(self):
        gen = np.random.default_rng(4)
        u = gen.uniform(0, 0.3, 200)
        v = 0.2 * u * gen.lognormal(0, 0.3, 200)
        pts = np.column_stack([u, v])
        hi, mid = quantile_regression(pts, 0.95), quantile_regression(pts, 0.75)
        assert hi(u.mean()) >= mid(u.mean())

    def test_degenerate(self):
        with pytest.raises(ValueError, match="vertical"):
            quantile_regression([(1, 0), (1, 1), (1, 2)], 0.5)
        with pytest.raises(ValueError):
            quantile_regression([(1, 0)], 0.5)
        with pytest.raises(ValueError):
            quantile_regression([(0, 0), (1, 1)], 1.0)

    def test_line_validation(self):
        with pytest.raises(ValueError):
            RegressionLine(0.0, float("inf"), 0.5, 3)
        with pytest.raises(ValueError):
            RegressionLine(0.0, 1.0, 0.5, 1)

    @given(
        st.lists(st.tuples(st.floats(0, 1), st.floats(0, 1)), min_size=3, max_size=25),
        st.sampled_from([0.1, 0.5, 0.75, 0.95]),
    )
    def test_above_below_counts(self, pts, q):
        # optimality of a fit with intercept: at most (1 - q) n points strictly
        # above the line and at most q n strictly below
        arr = np.array(pts)
        if np.unique(arr[:, 0]).size < 2:
            return
        line = quantile_regression(arr, q)
        r = arr[:, 1] - line(arr[:, 0])
        n = len(pts)
        tol = 1e-9
        assert (r > tol).sum() <= (1 - q) * n + 1e-9
        assert (r < -tol).sum() <= q * n + 1e-9

    @given(
        st.lists(st.tuples(st.floats(0, 1), st.floats(0, 1)), min_size=3, max_size=12),
        st.sampled_from([0.5, 0.75, 0.95]),
    )
    def test_not_worse_than_grid(self, pts, q):
        arr = np.array(pts)
        if np.unique(arr[:, 0]).size < 2:
            return
        line = quantile_regression(arr, q)
        grid_loss, _, _ = oracles.grid_quantile_fit(arr[:, 0], arr[:, 1], q, coarse=41, rounds=4)
        assert line.loss <= grid_loss + 1e-9


class TestNormalQuantile:
    @given(st.floats(1e-6, 1 - 1e-6))
    def test_accuracy(self, p):
        import statistics

        assert normal_quantile(p) == pytest.approx(statistics.NormalDist().inv_cdf(p), abs=1e-6)

    def test_range(self):
        for p in (0, 1, -0.1):
            with pytest.raises(ValueError):
                normal_quantile(p)


def test_quantile_regression_skips_overflowing_pairs():
    import warnings

    pts = [(0.0, 0.0), (5e-324, 1.0), (1.0, 0.5), (2.0, 1.0)]
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        line = quantile_regression(pts, 0.5)
    assert np.isfinite(line.slope) and np.isfinite(line.loss)
    with pytest.raises(ValueError, match="degenerate"):
        quantile_regression([(0.0, 0.0), (5e-324, 1.0)], 0.5)
