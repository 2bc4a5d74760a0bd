import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mobility_esda.errors import ParameterError, ZeroVarianceError
from mobility_esda.geometry import grid_geometries
from mobility_esda.moran import (
    expected_i,
    lisa_classify,
    lisa_permutation,
    moran_global,
    moran_local,
    moran_permutation,
    moran_scatter,
    spatial_lag,
    standardize_values,
)
from mobility_esda.weights import queen_adjacency, rook_adjacency, row_standardize

from conftest import exhaustive_conditional_p, exhaustive_pseudo_p, moran_oracle

CHECKERBOARD = np.array([1.0, -1.0, -1.0, 1.0])  # 2x2 row-major


class TestStandardize:
    def test_antithetic_pair(self):
        f = standardize_values([1.0, -1.0])
        assert f.z.tolist() == [1.0, -1.0]

    def test_constant_flags_zero_variance(self):
        f = standardize_values([4.0, 4.0, 4.0])
        assert f.zero_variance

    def test_hand_computed(self):
        f = standardize_values([2.0, 4.0, 6.0, 8.0])
        assert f.mean == 5.0
        assert f.sigma == pytest.approx(np.sqrt(5))
        assert np.allclose(f.z, np.array([-3, -1, 1, 3]) / np.sqrt(5))

    def test_z_moments(self):
        rng = np.random.default_rng(0)
        f = standardize_values(rng.normal(10, 3, 50))
        assert abs(f.z.sum()) < 1e-9
        assert abs((f.z**2).mean() - 1) < 1e-9

    def test_too_few_values(self):
        with pytest.raises(ParameterError):
            standardize_values([1.0])


class TestLag:
    def test_mutual_pair(self, pair_weights):
        assert spatial_lag(pair_weights, [1.0, -1.0]).tolist() == [-1.0, 1.0]

    def test_island_gets_zero(self):
        from mobility_esda.weights import SpatialWeights, row_standardize

        W = row_standardize(
            SpatialWeights.from_neighbors(["a", "b", "c"], {"a": ["b"], "b": ["a"], "c": []})
        )
        assert spatial_lag(W, [1.0, -1.0, 5.0]).tolist() == [-1.0, 1.0, 0.0]

    def test_2x2_checkerboard(self, rook_2x2_rs):
        assert spatial_lag(rook_2x2_rs, CHECKERBOARD).tolist() == [-1.0, 1.0, 1.0, -1.0]

    def test_dimension_mismatch(self, rook_2x2_rs):
        with pytest.raises(ParameterError):
            spatial_lag(rook_2x2_rs, [1.0, 2.0])


class TestGlobal:
    def test_two_region_antithetic(self, pair_weights):
        f = standardize_values([1.0, -1.0])
        assert moran_global(f, pair_weights) == pytest.approx(-1.0, abs=1e-12)

    def test_checkerboard(self, rook_2x2_rs):
        f = standardize_values(CHECKERBOARD)
        assert moran_global(f, rook_2x2_rs) == pytest.approx(-1.0, abs=1e-12)

    def test_two_like_columns(self, rook_2x2_rs):
        f = standardize_values([1.0, 1.0, -1.0, -1.0])
        assert moran_global(f, rook_2x2_rs) == pytest.approx(0.0, abs=1e-12)

    def test_matches_oracle_on_random_fields(self, queen_6x6_rs):
        rng = np.random.default_rng(1)
        for _ in range(20):
            x = rng.normal(0, 1, 36)
            f = standardize_values(x)
            assert moran_global(f, queen_6x6_rs) == pytest.approx(
                moran_oracle(x, queen_6x6_rs), rel=1e-12
            )

    def test_zero_variance_refused(self, rook_2x2_rs):
        with pytest.raises(ZeroVarianceError):
            moran_global(standardize_values([3.0] * 4), rook_2x2_rs)

    def test_bounds_on_random_fields(self, queen_6x6_rs):
        rng = np.random.default_rng(2)
        for _ in range(50):
            f = standardize_values(rng.normal(0, 1, 36))
            I = moran_global(f, queen_6x6_rs)
            assert -1 - 1e-9 <= I <= 1 + 1e-9


class TestScatter:
    def test_pair_points_and_slope(self, pair_weights):
        s = moran_scatter(standardize_values([1.0, -1.0]), pair_weights)
        assert s.z.tolist() == [1.0, -1.0]
        assert s.lag.tolist() == [-1.0, 1.0]
        assert s.slope == pytest.approx(-1.0)
        assert s.quadrants == ["HL", "LH"]

    def test_checkerboard_all_dissimilar_quadrants(self, rook_2x2_rs):
        s = moran_scatter(standardize_values(CHECKERBOARD), rook_2x2_rs)
        assert set(s.quadrants) == {"HL", "LH"}
        assert s.slope == pytest.approx(-1.0)

    def test_slope_equals_global_index(self, queen_6x6_rs):
        rng = np.random.default_rng(3)
        for _ in range(10):
            f = standardize_values(rng.normal(0, 1, 36))
            s = moran_scatter(f, queen_6x6_rs)
            assert abs(s.slope - moran_global(f, queen_6x6_rs)) < 1e-12

    def test_path_graph_spike(self):
        from mobility_esda.weights import SpatialWeights, row_standardize

        ids = ["p0", "p1", "p2", "p3"]
        W = row_standardize(
            SpatialWeights.from_neighbors(
                ids, {"p0": ["p1"], "p1": ["p0", "p2"], "p2": ["p1", "p3"], "p3": ["p2"]}
            )
        )
        x = np.array([1.0, 0.0, 0.0, 0.0])
        s = moran_scatter(standardize_values(x), W)
        assert s.slope == pytest.approx(moran_oracle(x, W), rel=1e-12)


class TestLocal:
    def test_checkerboard_all_minus_one(self, rook_2x2_rs):
        f = standardize_values(CHECKERBOARD)
        li = moran_local(f, rook_2x2_rs)
        assert np.allclose(li, -1.0)
        assert li.mean() == pytest.approx(moran_global(f, rook_2x2_rs), abs=1e-12)

    def test_zero_z_gives_zero(self):
        from mobility_esda.weights import SpatialWeights, row_standardize

        W = row_standardize(
            SpatialWeights.from_neighbors(
                ["a", "b", "c"], {"a": ["b", "c"], "b": ["a", "c"], "c": ["a", "b"]}
            )
        )
        f = standardize_values([1.0, 2.0, 3.0])
        li = moran_local(f, W)
        assert li[1] == 0.0  # middle value sits at the mean

    def test_two_region_case(self, pair_weights):
        li = moran_local(standardize_values([1.0, -1.0]), pair_weights)
        assert li.tolist() == [-1.0, -1.0]

    def test_mean_equals_global(self, queen_6x6_rs):
        rng = np.random.default_rng(4)
        for _ in range(50):
            f = standardize_values(rng.normal(0, 1, 36))
            assert moran_local(f, queen_6x6_rs).mean() == pytest.approx(
                moran_global(f, queen_6x6_rs), abs=1e-9
            )

    def test_island_mean_excludes_zero_rows(self):
        from mobility_esda.weights import SpatialWeights, row_standardize

        W = row_standardize(
            SpatialWeights.from_neighbors(
                ["a", "b", "c", "isle"],
                {"a": ["b", "c"], "b": ["a", "c"], "c": ["a", "b"], "isle": []},
            )
        )
        f = standardize_values([3.0, -1.0, 2.0, -4.0])
        li = moran_local(f, W)
        assert li[3] == 0.0


class TestGlobalPermutation:
    def test_extreme_observation_floor(self, queen_6x6_rs):
        # strong row-band gradient: more extreme than every shuffle
        x = np.arange(36.0) // 6
        f = standardize_values(x)
        res = moran_permutation(f, queen_6x6_rs, permutations=999, seed=0)
        assert res.pseudo_p == pytest.approx(1 / 1000)

    def test_exhaustive_matches_bruteforce(self):
        geoms = grid_geometries(2, 3)
        W = row_standardize(rook_adjacency(geoms))
        rng = np.random.default_rng(8)
        for _ in range(3):
            x = rng.normal(0, 1, 6)
            f = standardize_values(x)
            res = moran_permutation(f, W, exhaustive=True)
            assert res.pseudo_p == pytest.approx(exhaustive_pseudo_p(x, W), abs=1e-12)

    def test_same_seed_identical(self, queen_6x6_rs):
        f = standardize_values(np.random.default_rng(9).normal(0, 1, 36))
        a = moran_permutation(f, queen_6x6_rs, permutations=199, seed=42)
        b = moran_permutation(f, queen_6x6_rs, permutations=199, seed=42)
        assert (a.pseudo_p, a.sim_mean, a.sim_sd) == (b.pseudo_p, b.sim_mean, b.sim_sd)

    def test_sidedness_options(self, queen_6x6_rs):
        f = standardize_values(np.random.default_rng(10).normal(0, 1, 36))
        for sided in ("greater", "less", "one_sided_folded"):
            res = moran_permutation(f, queen_6x6_rs, permutations=99, seed=1, sided=sided)
            assert 0 < res.pseudo_p <= 1

    def test_expected_value(self):
        assert expected_i(4) == pytest.approx(-1 / 3)


class TestLisaPermutation:
    def test_zero_z_region_p_one(self):
        from mobility_esda.weights import SpatialWeights, row_standardize

        W = row_standardize(
            SpatialWeights.from_neighbors(
                ["a", "b", "c"], {"a": ["b", "c"], "b": ["a", "c"], "c": ["a", "b"]}
            )
        )
        f = standardize_values([1.0, 2.0, 3.0])
        p = lisa_permutation(f, W, permutations=99, seed=0)
        assert p[1] == 1.0

    def test_exhaustive_matches_conditional_oracle(self, star_5):
        rng = np.random.default_rng(12)
        z_inputs = [rng.normal(0, 1, 5) for _ in range(3)]
        for x in z_inputs:
            f = standardize_values(x)
            p = lisa_permutation(f, star_5, exhaustive=True)
            expected = [exhaustive_conditional_p(f.z, star_5, i) for i in range(5)]
            assert np.allclose(p, expected, atol=1e-12)

    def test_same_seed_identical_vector(self, queen_6x6_rs):
        f = standardize_values(np.random.default_rng(13).normal(0, 1, 36))
        a = lisa_permutation(f, queen_6x6_rs, permutations=99, seed=5)
        b = lisa_permutation(f, queen_6x6_rs, permutations=99, seed=5)
        assert np.array_equal(a, b)

    def test_island_p_is_one(self):
        from mobility_esda.weights import SpatialWeights, row_standardize

        W = row_standardize(
            SpatialWeights.from_neighbors(
                ["a", "b", "isle"], {"a": ["b"], "b": ["a"], "isle": []}
            )
        )
        f = standardize_values([1.0, -1.0, 0.0])
        p = lisa_permutation(f, W, permutations=99, seed=0)
        assert p[2] == 1.0


class TestClassify:
    def test_all_insignificant(self, rook_2x2_rs):
        f = standardize_values(CHECKERBOARD)
        res = lisa_classify(f, rook_2x2_rs, np.ones(4))
        assert res.labels == ["ns"] * 4
        assert res.tiers == [None] * 4

    def test_checkerboard_outlier_labels(self, rook_2x2_rs):
        f = standardize_values(CHECKERBOARD)
        res = lisa_classify(f, rook_2x2_rs, np.full(4, 0.001))
        assert res.labels == ["HL", "LH", "LH", "HL"]
        assert res.tiers == [0.001] * 4

    def test_tier_assignment(self, pair_weights):
        f = standardize_values([1.0, -1.0])
        res = lisa_classify(f, pair_weights, np.array([0.004, 0.2]))
        assert res.labels == ["HL", "ns"]
        assert res.tiers == [0.01, None]

    def test_hh_label(self):
        from mobility_esda.weights import SpatialWeights, row_standardize

        W = row_standardize(
            SpatialWeights.from_neighbors(
                ["a", "b", "c", "d"],
                {"a": ["b"], "b": ["a"], "c": ["d"], "d": ["c"]},
            )
        )
        f = standardize_values([5.0, 4.0, -5.0, -4.0])
        res = lisa_classify(f, W, np.full(4, 0.004))
        assert res.labels == ["HH", "HH", "LL", "LL"]
        assert res.tiers == [0.01] * 4

    def test_bad_alpha(self, pair_weights):
        f = standardize_values([1.0, -1.0])
        with pytest.raises(ParameterError):
            lisa_classify(f, pair_weights, np.ones(2), alpha=1.5)


class TestAffineInvariance:
    @given(
        a=st.floats(min_value=0.1, max_value=50, allow_nan=False),
        b=st.floats(min_value=-100, max_value=100, allow_nan=False),
    )
    @settings(max_examples=25, deadline=None)
    def test_positive_scaling_and_shift(self, a, b):
        W = row_standardize(queen_adjacency(grid_geometries(4, 4)))
        x = np.random.default_rng(20).normal(0, 10, 16)
        f1 = standardize_values(x)
        f2 = standardize_values(a * x + b)
        assert moran_global(f2, W) == pytest.approx(moran_global(f1, W), abs=1e-9)
        assert np.allclose(moran_local(f2, W), moran_local(f1, W), atol=1e-9)
        p1 = lisa_permutation(f1, W, permutations=49, seed=3)
        p2 = lisa_permutation(f2, W, permutations=49, seed=3)
        assert np.allclose(p1, p2, atol=1e-12)

    def test_negation_swaps_cluster_labels(self):
        W = row_standardize(queen_adjacency(grid_geometries(4, 4)))
        x = np.random.default_rng(21).normal(0, 10, 16)
        f1 = standardize_values(x)
        f2 = standardize_values(-x)
        assert moran_global(f2, W) == pytest.approx(moran_global(f1, W), abs=1e-12)
        p1 = lisa_permutation(f1, W, permutations=99, seed=4)
        p2 = lisa_permutation(f2, W, permutations=99, seed=4)
        assert np.allclose(p1, p2, atol=1e-12)
        swap = {"HH": "LL", "LL": "HH", "LH": "HL", "HL": "LH", "ns": "ns"}
        r1 = lisa_classify(f1, W, p1)
        r2 = lisa_classify(f2, W, p2)
        assert r2.labels == [swap[lbl] for lbl in r1.labels]
