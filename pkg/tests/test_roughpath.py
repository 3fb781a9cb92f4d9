"""Tests for the rough path algebra: Chen composition, lifts, norms, CSV I/O."""

import numpy as np
import pytest

from rdeinv.errors import (
    DimensionMismatch,
    IndexOutOfRange,
    InvalidGrid,
    InvalidParameter,
)
from rdeinv.roughpath import (
    GridRoughPath,
    RoughIncrement,
    area_components,
    area_matrix,
    chen_mul,
    circle_samples,
    coarsen,
    holder_norms,
    lift_piecewise_linear,
    make_linear_rough_path,
    read_path_csv,
    refine,
    sample_brownian_fine,
    sample_brownian_lift,
    write_path_csv,
)


def random_increment(rng, ell):
    x = rng.standard_normal(ell)
    raw = rng.standard_normal((ell, ell))
    return RoughIncrement(x, 0.5 * (raw - raw.T))


class TestRoughIncrement:
    def test_antisymmetrizes_roundoff(self):
        a = np.array([[0.0, 1.0], [-1.0 + 1e-12, 0.0]])
        inc = RoughIncrement([0.0, 0.0], a)
        assert np.max(np.abs(inc.a + inc.a.T)) == 0.0

    def test_rejects_symmetric_residue(self):
        a = np.array([[0.0, 1.0], [-0.9, 0.0]])
        with pytest.raises(InvalidParameter):
            RoughIncrement([0.0, 0.0], a)

    def test_second_level_symmetric_part_is_structural(self):
        rng = np.random.default_rng(0)
        for _ in range(20):
            inc = random_increment(rng, 3)
            # the stored area is exactly antisymmetric, so the symmetric part
            # of the materialised second level can only be 0.5 * outer(x, x)
            assert np.array_equal(inc.a, -inc.a.T)
            xx = inc.second_level
            sym = 0.5 * (xx + xx.T)
            scale = 1e-15 * (1.0 + np.max(np.abs(xx)))
            np.testing.assert_allclose(sym, 0.5 * np.outer(inc.x, inc.x), atol=scale)

    def test_shape_errors(self):
        with pytest.raises(DimensionMismatch):
            RoughIncrement(np.zeros((2, 2)))
        with pytest.raises(DimensionMismatch):
            RoughIncrement(np.zeros(2), np.zeros((3, 3)))


class TestChenMul:
    def test_identity(self):
        z = RoughIncrement(np.zeros(2))
        out = chen_mul(z, z)
        assert np.all(out.x == 0) and np.all(out.a == 0)

    def test_collinear_segments_have_no_area(self):
        v = np.array([0.3, -1.2, 0.7])
        seg = RoughIncrement(v)
        out = chen_mul(seg, seg)
        np.testing.assert_array_equal(out.x, 2 * v)
        assert np.max(np.abs(out.a)) == 0.0

    def test_unit_square_corner_area(self):
        # e1 then e2: area of the triangle under the two segments is 1/2
        e1 = RoughIncrement([1.0, 0.0])
        e2 = RoughIncrement([0.0, 1.0])
        out = chen_mul(e1, e2)
        np.testing.assert_allclose(out.x, [1.0, 1.0])
        assert out.a[0, 1] == 0.5
        assert out.a[1, 0] == -0.5

    def test_associativity_random(self):
        rng = np.random.default_rng(42)
        for _ in range(1000):
            a, b, c = (random_increment(rng, 3) for _ in range(3))
            left = chen_mul(chen_mul(a, b), c)
            right = chen_mul(a, chen_mul(b, c))
            scale = 1.0 + np.linalg.norm(left.second_level)
            assert np.linalg.norm(left.x - right.x) <= 1e-10 * scale
            assert np.linalg.norm(left.a - right.a) <= 1e-10 * scale

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionMismatch):
            chen_mul(RoughIncrement(np.zeros(2)), RoughIncrement(np.zeros(3)))


class TestGridRoughPath:
    def test_validation(self):
        with pytest.raises(InvalidGrid):
            GridRoughPath([0.0, 0.0], np.zeros((2, 1)))
        with pytest.raises(InvalidGrid):
            GridRoughPath([0.0, 1.0], np.zeros((3, 1)))
        with pytest.raises(InvalidParameter):
            GridRoughPath([0.0, 1.0], np.zeros((2, 1)), alpha=0.7)

    def test_single_step_is_stored_data(self):
        rng = np.random.default_rng(1)
        times = np.array([0.0, 0.5, 1.3])
        values = rng.standard_normal((3, 2))
        raw = rng.standard_normal((2, 2, 2))
        areas = 0.5 * (raw - np.swapaxes(raw, 1, 2))
        path = GridRoughPath(times, values, areas)
        inc = path.increment(1, 2)
        np.testing.assert_array_equal(inc.x, values[2] - values[1])
        np.testing.assert_allclose(inc.a, areas[1], atol=1e-16)

    def test_fold_grouping_agrees(self):
        rng = np.random.default_rng(2)
        values = rng.standard_normal((4, 2))
        raw = rng.standard_normal((3, 2, 2))
        areas = 0.5 * (raw - np.swapaxes(raw, 1, 2))
        path = GridRoughPath(np.arange(4.0), values, areas)
        direct = path.increment(0, 3)
        grouped = chen_mul(
            path.increment(0, 1), chen_mul(path.increment(1, 2), path.increment(2, 3))
        )
        np.testing.assert_allclose(direct.x, grouped.x, atol=1e-12)
        np.testing.assert_allclose(direct.a, grouped.a, atol=1e-12)

    def test_chen_consistency_midpoint(self):
        rng = np.random.default_rng(3)
        path = sample_brownian_lift(2, 8, 4, 1.0, seed=5)
        for i, j, k in [(0, 3, 8), (1, 2, 6), (0, 4, 5)]:
            whole = path.increment(i, k)
            glued = chen_mul(path.increment(i, j), path.increment(j, k))
            np.testing.assert_allclose(whole.x, glued.x, atol=1e-12)
            np.testing.assert_allclose(whole.a, glued.a, atol=1e-12)

    def test_linear_path_total_has_no_area(self):
        v = np.array([1.0, 2.0])
        times = np.linspace(0.0, 3.0, 7)
        path = lift_piecewise_linear(times, np.outer(times, v))
        inc = path.increment(0, path.n)
        np.testing.assert_allclose(inc.x, 3.0 * v, atol=1e-14)
        assert np.max(np.abs(inc.a)) < 1e-14

    def test_index_errors(self):
        path = lift_piecewise_linear([0.0, 1.0], np.zeros((2, 1)))
        with pytest.raises(IndexOutOfRange):
            path.increment(0, 2)
        with pytest.raises(IndexOutOfRange):
            path.increment(1, 1)
        with pytest.raises(IndexOutOfRange):
            path.step_increment(1)


class TestLift:
    def test_two_samples_single_step(self):
        path = lift_piecewise_linear([0.0, 1.0], [[0.0, 0.0], [1.0, 2.0]])
        assert path.n == 1
        assert np.all(path.step_areas == 0)

    def test_circle_loop_closes_with_area_pi(self):
        times, values = circle_samples(10_000)
        path = lift_piecewise_linear(times, values)
        inc = path.increment(0, path.n)
        assert np.linalg.norm(inc.x) <= 1e-6
        # signed area of the inscribed polygon: 0.5 * loop integral of (x-x0)dy - (y-y0)dx
        assert abs(inc.a[0, 1] - np.pi) <= 1e-4

    def test_inserting_sample_on_segment_is_invariant(self):
        rng = np.random.default_rng(7)
        times = np.sort(rng.uniform(0.0, 1.0, 9))
        times[0], times[-1] = 0.0, 1.0
        values = rng.standard_normal((9, 3))
        base = lift_piecewise_linear(times, values).increment(0, 8)
        # insert the midpoint of segment 4
        tm = 0.5 * (times[4] + times[5])
        vm = 0.5 * (values[4] + values[5])
        times2 = np.insert(times, 5, tm)
        values2 = np.insert(values, 5, vm, axis=0)
        fine = lift_piecewise_linear(times2, values2).increment(0, 9)
        np.testing.assert_allclose(base.x, fine.x, atol=1e-10)
        np.testing.assert_allclose(base.a, fine.a, atol=1e-10)

    def test_invalid_grid(self):
        with pytest.raises(InvalidGrid):
            lift_piecewise_linear([0.0, 1.0, 1.0], np.zeros((3, 2)))


class TestRefineCoarsen:
    def test_refine_preserves_increments(self):
        path = sample_brownian_lift(2, 6, 8, 1.0, seed=11)
        fine = refine(path, 5)
        for i, j in [(0, 6), (2, 4), (1, 5)]:
            a = path.increment(i, j)
            b = fine.increment(5 * i, 5 * j)
            np.testing.assert_allclose(a.x, b.x, atol=1e-12)
            np.testing.assert_allclose(a.a, b.a, atol=1e-12)

    def test_coarsen_matches_explicit_fold(self):
        path = sample_brownian_fine(3, 4, 8, 2.0, seed=3)
        coarse = coarsen(path, 8)
        for k in range(4):
            inc = path.increment(8 * k, 8 * (k + 1))
            np.testing.assert_allclose(coarse.step_areas[k], inc.a, atol=1e-12)
            np.testing.assert_allclose(
                coarse.values[k + 1] - coarse.values[k], inc.x, atol=1e-12
            )

    def test_coarsen_requires_divisibility(self):
        path = lift_piecewise_linear(np.linspace(0, 1, 8), np.zeros((8, 2)))
        with pytest.raises(InvalidGrid):
            coarsen(path, 3)


class TestBrownian:
    def test_deterministic_given_seed(self):
        a = sample_brownian_lift(2, 8, 4, 1.0, seed=99)
        b = sample_brownian_lift(2, 8, 4, 1.0, seed=99)
        assert np.array_equal(a.values, b.values)
        assert np.array_equal(a.step_areas, b.step_areas)

    def test_coarse_is_coarsened_fine(self):
        fine = sample_brownian_fine(2, 8, 4, 1.0, seed=21)
        coarse = sample_brownian_lift(2, 8, 4, 1.0, seed=21)
        again = coarsen(fine, 4)
        assert np.array_equal(coarse.values, again.values)
        assert np.array_equal(coarse.step_areas, again.step_areas)

    def test_one_dimensional_has_no_area(self):
        path = sample_brownian_lift(1, 8, 8, 1.0, seed=0)
        assert np.all(path.step_areas == 0)

    def test_area_second_moment(self):
        # E[A_T^2] = T^2/4; verified against an independent Monte-Carlo
        # estimator built from raw Stratonovich sums before this test was frozen.
        n_mc, total = 2000, []
        for seed in range(n_mc):
            path = sample_brownian_lift(2, 4, 16, 1.0, seed=seed)
            total.append(path.increment(0, 4).a[0, 1] ** 2)
        total = np.asarray(total)
        # Var(A^2) = T^4/4 for the continuous limit; allow 3 standard errors
        se = 0.5 / np.sqrt(n_mc)
        bias = 1.0 - 1.0 / 64  # polygonal approximation with 64 steps
        assert abs(total.mean() - 0.25 * bias) <= 3 * se

    def test_area_rms_scales_like_half_interval(self):
        h, n_mc = 0.3, 800
        sq = []
        for seed in range(n_mc):
            path = sample_brownian_lift(2, 1, 64, h, seed=10_000 + seed)
            sq.append(path.increment(0, 1).a[0, 1] ** 2)
        sq = np.asarray(sq)
        se = (h * h / 2) / np.sqrt(n_mc)
        assert abs(sq.mean() - (h / 2) ** 2 * (1 - 1 / 64)) <= 3 * se

    def test_invalid_parameters(self):
        with pytest.raises(InvalidParameter):
            sample_brownian_lift(0, 4, 4, 1.0, seed=0)
        with pytest.raises(InvalidParameter):
            sample_brownian_lift(2, 4, 0, 1.0, seed=0)
        with pytest.raises(InvalidParameter):
            sample_brownian_lift(2, 4, 4, -1.0, seed=0)

    def test_alpha_default(self):
        assert sample_brownian_lift(2, 2, 2, 1.0, seed=0).alpha == 0.4


class TestMakeLinear:
    def test_null_vector_gives_null_path(self):
        path = make_linear_rough_path(np.zeros(3), 2, np.linspace(0, 1, 5))
        inc = path.increment(0, 4)
        assert np.all(inc.x == 0) and np.all(inc.a == 0)

    def test_pure_area_direction(self):
        path = make_linear_rough_path([0.0, 0.0, 1.0], 2, np.linspace(0, 2, 9))
        inc = path.increment(2, 7)
        dt = path.times[7] - path.times[2]
        assert np.max(np.abs(inc.x)) == 0.0
        np.testing.assert_allclose(inc.a[0, 1], dt, atol=1e-14)

    def test_one_dimensional_line(self):
        path = make_linear_rough_path([1.0], 1, np.linspace(0, 1, 4))
        inc = path.increment(0, 3)
        np.testing.assert_allclose(inc.x, [1.0])
        assert np.all(inc.a == 0)

    def test_interval_linearity_everywhere(self):
        v = np.array([0.5, -1.0, 0.3, 0.2, -0.7, 1.1])
        times = np.linspace(0.0, 1.0, 11)
        path = make_linear_rough_path(v, 3, times)
        a_mat = area_matrix(v[3:], 3)
        for i, j in [(0, 10), (3, 7), (2, 3)]:
            dt = times[j] - times[i]
            inc = path.increment(i, j)
            np.testing.assert_allclose(inc.x, v[:3] * dt, atol=1e-13)
            np.testing.assert_allclose(inc.a, a_mat * dt, atol=1e-13)

    def test_wrong_length(self):
        with pytest.raises(DimensionMismatch):
            make_linear_rough_path([1.0, 2.0], 2, [0.0, 1.0])


class TestAreaPacking:
    def test_roundtrip(self):
        rng = np.random.default_rng(5)
        for ell in (2, 3, 4):
            comps = rng.standard_normal(ell * (ell - 1) // 2)
            a = area_matrix(comps, ell)
            assert np.all(a == -a.T)
            np.testing.assert_array_equal(area_components(a), comps)

    def test_lexicographic_order(self):
        a = area_matrix([1.0, 2.0, 3.0], 3)
        assert a[0, 1] == 1.0 and a[0, 2] == 2.0 and a[1, 2] == 3.0


class TestHolderNorms:
    def test_constant_path(self):
        values = np.tile([2.0, -1.0], (5, 1))
        path = lift_piecewise_linear(np.linspace(0, 1, 5), values)
        norms = holder_norms(path)
        assert norms.sup_norm == pytest.approx(np.sqrt(5.0))
        assert norms.holder1 == 0.0
        assert norms.holder2 == 0.0

    def test_linear_path_alpha_half(self):
        v = np.array([3.0, 4.0])
        times = np.linspace(0.0, 1.0, 9)
        path = lift_piecewise_linear(times, np.outer(times, v))
        norms = holder_norms(path, alpha=0.5)
        # (t-s)/(t-s)^0.5 is largest on the full interval, giving |v|
        assert norms.holder1 == pytest.approx(5.0, rel=1e-12)

    def test_monotone_under_refinement(self):
        coarse = lift_piecewise_linear(*circle_samples(64))
        fine = lift_piecewise_linear(*circle_samples(128))
        a, b = holder_norms(coarse), holder_norms(fine)
        assert b.sup_norm >= 0.95 * a.sup_norm
        assert b.holder1 >= 0.95 * a.holder1
        assert b.holder2 >= 0.95 * a.holder2


class TestPathCsv:
    def test_roundtrip_bitwise(self, tmp_path):
        path = sample_brownian_lift(3, 6, 4, 1.5, seed=13)
        file = tmp_path / "path.csv"
        write_path_csv(path, file)
        back = read_path_csv(file, alpha=0.4)
        assert np.array_equal(back.times, path.times)
        assert np.array_equal(back.values, path.values)
        assert np.array_equal(back.step_areas, path.step_areas)

    def test_one_dimensional_roundtrip(self, tmp_path):
        path = sample_brownian_lift(1, 4, 4, 1.0, seed=2)
        file = tmp_path / "one.csv"
        write_path_csv(path, file)
        assert file.read_text().splitlines()[0] == "t,X1"
        back = read_path_csv(file)
        assert np.array_equal(back.values, path.values)

    def test_missing_area_columns_default_to_zero(self, tmp_path):
        file = tmp_path / "plain.csv"
        file.write_text("t,X1,X2\n0,0,0\n1,1,2\n")
        path = read_path_csv(file)
        assert np.all(path.step_areas == 0)
        np.testing.assert_array_equal(path.values, [[0.0, 0.0], [1.0, 2.0]])

    def test_malformed_header(self, tmp_path):
        file = tmp_path / "bad.csv"
        file.write_text("time,X1\n0,0\n1,1\n")
        with pytest.raises(InvalidGrid):
            read_path_csv(file)
