"""Model evaluation: dense, low-rank, sampling, surfaces, noncrossing."""

import numpy as np
import pytest

from mixquant.bases import BasisFunction, FactorSplineSpec, KnotVector, equidistant_knots
from mixquant.exceptions import ConfigurationError
from mixquant.model import (
    LowRankParams,
    ModelConfig,
    ModelSpec,
    conditional_quantile_fn,
    eval_dense_tensor,
    eval_lowrank,
    eval_model,
    materialize_tensor,
    predict_levels,
    sample_response,
    surface_grid,
    tensor_to_params,
    weight_vector,
)


def simple_spec(degree=1, interior=(), bases=None, mode="quantile"):
    bases = bases or (BasisFunction.constant(), BasisFunction.normal())
    fs = FactorSplineSpec(KnotVector(-1.0, 1.0, interior, degree))
    return ModelSpec(tuple(bases), (fs,), mode)


def two_factor_spec():
    bases = (
        BasisFunction.constant(),
        BasisFunction.normal(),
        BasisFunction.exp_right(0.75),
    )
    fs1 = FactorSplineSpec(KnotVector(-1, 1, (0.0,), 2))
    fs2 = FactorSplineSpec(KnotVector(0, 2, (), 2))
    return ModelSpec(bases, (fs1, fs2))


def random_admissible_params(spec, rng, scale=1.0):
    a = rng.uniform(0, scale, spec.param_shape())
    a[0] = rng.uniform(-scale, scale, a.shape[1])
    return a


class TestSpecValidation:
    def test_first_basis_must_be_constant(self):
        fs = FactorSplineSpec(KnotVector(0, 1, (), 1))
        with pytest.raises(ConfigurationError):
            ModelSpec((BasisFunction.normal(),), (fs,))

    def test_duplicate_bases_rejected(self):
        fs = FactorSplineSpec(KnotVector(0, 1, (), 1))
        with pytest.raises(ConfigurationError):
            ModelSpec(
                (BasisFunction.constant(), BasisFunction.normal(), BasisFunction.normal()),
                (fs,),
            )

    def test_cvar_kind_rejected_in_quantile_mode(self):
        fs = FactorSplineSpec(KnotVector(0, 1, (), 1))
        with pytest.raises(ConfigurationError):
            ModelSpec((BasisFunction.constant(), BasisFunction.normal_cvar()), (fs,))

    def test_weight_count(self):
        spec = two_factor_spec()
        # L1 = 2 + 1 + 1 = 4 (one interior knot), L2 = 2 + 0 + 1 = 3
        assert spec.n_weight_bases == 1 + 4 * 3
        assert weight_vector(spec, [0.1, 0.5]).shape == (13,)

    def test_weight_vector_dimension_mismatch(self):
        spec = two_factor_spec()
        with pytest.raises(ConfigurationError):
            weight_vector(spec, [0.1])


class TestEvalModel:
    def test_constant_model(self):
        spec = simple_spec()
        a = np.zeros(spec.param_shape())
        a[0, 0] = 3.25
        for p in (0.1, 0.5, 0.9):
            for x in (-1.0, 0.0, 0.7):
                assert eval_model(spec, a, p, [x]) == pytest.approx(3.25)

    def test_normal_location_scale_median(self):
        # location 0, unit normal scale: the median must be the location
        spec = simple_spec()
        a = np.zeros(spec.param_shape())
        a[1, 0] = 1.0
        assert eval_model(spec, a, 0.5, [0.3]) == 0.0

    def test_param_shape_mismatch(self):
        spec = simple_spec()
        with pytest.raises(ConfigurationError):
            eval_model(spec, np.zeros((3, 3)), 0.5, [0.0])

    def test_linearity_in_params(self):
        spec = two_factor_spec()
        rng = np.random.default_rng(0)
        a1 = random_admissible_params(spec, rng)
        a2 = random_admissible_params(spec, rng)
        for _ in range(20):
            p = rng.uniform(0.05, 0.95)
            x = [rng.uniform(-1, 1), rng.uniform(0, 2)]
            lam = rng.uniform(0, 1)
            combo = eval_model(spec, lam * a1 + (1 - lam) * a2, p, x)
            parts = lam * eval_model(spec, a1, p, x) + (1 - lam) * eval_model(spec, a2, p, x)
            assert combo == pytest.approx(parts, rel=1e-12, abs=1e-12)

    def test_noncrossing_random_probe(self):
        spec = two_factor_spec()
        rng = np.random.default_rng(7)
        for _ in range(300):
            a = random_admissible_params(spec, rng, scale=2.0)
            x = [rng.uniform(-1.5, 1.5), rng.uniform(-0.5, 2.5)]
            p1, p2 = np.sort(rng.uniform(0.01, 0.99, 2))
            if p1 == p2:
                continue
            assert eval_model(spec, a, p1, x) <= eval_model(spec, a, p2, x)

    def test_predict_levels_matches_pointwise(self):
        spec = two_factor_spec()
        rng = np.random.default_rng(3)
        a = random_admissible_params(spec, rng)
        X = np.column_stack([rng.uniform(-1, 1, 6), rng.uniform(0, 2, 6)])
        levels = [0.2, 0.5, 0.8]
        batch = predict_levels(spec, a, X, levels)
        for n, x in enumerate(X):
            for m, p in enumerate(levels):
                assert batch[n, m] == pytest.approx(eval_model(spec, a, p, x), abs=1e-12)


class TestLowRank:
    def test_rank_one_ones_materializes_to_ones(self):
        lr = LowRankParams((np.ones((2, 1)), np.ones((3, 1)), np.ones((4, 1))))
        np.testing.assert_array_equal(materialize_tensor(lr), np.ones((2, 3, 4)))

    def test_materialize_matches_nested_loop_oracle(self):
        rng = np.random.default_rng(5)
        us = tuple(rng.uniform(0, 1, (d, 2)) for d in (3, 4, 2))
        lr = LowRankParams(us)
        tensor = materialize_tensor(lr)
        brute = np.zeros((3, 4, 2))
        for r in range(2):
            for i in range(3):
                for j in range(4):
                    for k in range(2):
                        brute[i, j, k] += us[0][i, r] * us[1][j, r] * us[2][k, r]
        np.testing.assert_allclose(tensor, brute, atol=1e-14)

    def test_negative_entries_rejected(self):
        with pytest.raises(ConfigurationError):
            LowRankParams((np.array([[1.0], [-0.1]]), np.ones((2, 1))))

    def test_rank_mismatch_rejected(self):
        with pytest.raises(ConfigurationError):
            LowRankParams((np.ones((2, 1)), np.ones((2, 2))))

    def test_eval_lowrank_matches_materialized_dense(self):
        spec = two_factor_spec()
        rng = np.random.default_rng(11)
        dims = (spec.n_level_bases,) + spec.spline_shape
        for _ in range(30):
            lr = LowRankParams(
                tuple(rng.uniform(0, 1, (d, 3)) for d in dims), shift=rng.uniform(0, 2)
            )
            tensor = materialize_tensor(lr)
            p = rng.uniform(0.05, 0.95)
            x = [rng.uniform(-1, 1), rng.uniform(0, 2)]
            direct = eval_lowrank(spec, lr, p, x)
            dense = eval_dense_tensor(spec, tensor, p, x, shift=lr.shift)
            assert direct == pytest.approx(dense, abs=1e-10)
            via_matrix = eval_model(spec, tensor_to_params(spec, tensor, lr.shift), p, x)
            assert direct == pytest.approx(via_matrix, abs=1e-10)

    def test_tensor_dot_product_identity(self):
        # <u0 x u1 x u2, v0 x v1 x v2> = prod_k <uk, vk>
        rng = np.random.default_rng(13)
        for _ in range(50):
            dims = rng.integers(2, 5, size=3)
            us = [rng.uniform(0, 1, d) for d in dims]
            vs = [rng.uniform(0, 1, d) for d in dims]
            t_u = materialize_tensor(LowRankParams(tuple(u[:, None] for u in us)))
            t_v = materialize_tensor(LowRankParams(tuple(v[:, None] for v in vs)))
            lhs = float(np.sum(t_u * t_v))
            rhs = float(np.prod([u @ v for u, v in zip(us, vs)]))
            assert lhs == pytest.approx(rhs, rel=1e-12)

    def test_predict_levels_lowrank(self):
        spec = two_factor_spec()
        rng = np.random.default_rng(17)
        dims = (spec.n_level_bases,) + spec.spline_shape
        lr = LowRankParams(tuple(rng.uniform(0, 1, (d, 2)) for d in dims), shift=1.0)
        X = np.column_stack([rng.uniform(-1, 1, 5), rng.uniform(0, 2, 5)])
        batch = predict_levels(spec, lr, X, [0.3, 0.7])
        for n, x in enumerate(X):
            for m, p in enumerate([0.3, 0.7]):
                assert batch[n, m] == pytest.approx(eval_lowrank(spec, lr, p, x), abs=1e-10)


class TestSampling:
    def test_constant_model_sampling(self):
        spec = simple_spec()
        a = np.zeros(spec.param_shape())
        a[0, 0] = -2.0
        for u in (0.01, 0.37, 0.99):
            assert sample_response(spec, a, [0.0], u) == pytest.approx(-2.0)

    def test_monte_carlo_mean_and_quantile(self):
        # unit-normal noise around a location: the sample mean approaches the
        # location and the empirical 0.9-quantile approaches the model value
        spec = simple_spec()
        a = np.zeros(spec.param_shape())
        a[0, 0] = 1.5
        a[1, 0] = 1.0
        rng = np.random.default_rng(23)
        draws = np.array(
            [sample_response(spec, a, [0.0], u) for u in rng.uniform(1e-12, 1, 100_000)]
        )
        assert draws.mean() == pytest.approx(1.5, abs=3e-2)
        emp_q = np.quantile(draws, 0.9)
        assert emp_q == pytest.approx(eval_model(spec, a, 0.9, [0.0]), abs=2e-2)


class TestSurface:
    def test_constant_surface(self):
        spec = two_factor_spec()
        a = np.zeros(spec.param_shape())
        a[0, 0] = 4.0
        grid = surface_grid(spec, a, 0.5, [np.linspace(-1, 1, 4), np.linspace(0, 2, 3)])
        assert grid.shape == (12, 3)
        np.testing.assert_allclose(grid[:, -1], 4.0)

    def test_row_major_ordering(self):
        spec = two_factor_spec()
        a = np.zeros(spec.param_shape())
        grid = surface_grid(spec, a, 0.5, [np.array([-1.0, 1.0]), np.array([0.0, 1.0, 2.0])])
        np.testing.assert_array_equal(grid[:, 0], [-1, -1, -1, 1, 1, 1])
        np.testing.assert_array_equal(grid[:, 1], [0, 1, 2, 0, 1, 2])

    def test_surfaces_do_not_cross(self):
        spec = two_factor_spec()
        rng = np.random.default_rng(31)
        a = random_admissible_params(spec, rng)
        grids = [np.linspace(-1.2, 1.2, 8), np.linspace(-0.2, 2.2, 8)]
        low = surface_grid(spec, a, 0.05, grids)[:, -1]
        high = surface_grid(spec, a, 0.95, grids)[:, -1]
        assert np.all(low <= high)

    def test_linear_plane_slope(self):
        # degree-1 splines reproduce an affine location exactly: y = 1 + 2x
        spec = simple_spec(degree=1)
        a = np.zeros(spec.param_shape())
        a[0, 1] = 1 + 2 * -1.0  # value at left knot
        a[0, 2] = 1 + 2 * 1.0  # value at right knot
        grid = surface_grid(spec, a, 0.5, [np.linspace(-1, 1, 9)])
        np.testing.assert_allclose(grid[:, 1], 1 + 2 * grid[:, 0], atol=1e-12)

    def test_empty_grid_rejected(self):
        spec = simple_spec()
        with pytest.raises(ConfigurationError):
            surface_grid(spec, np.zeros(spec.param_shape()), 0.5, [np.array([])])


class TestModelConfig:
    def test_build_places_knots_on_data_range(self):
        rng = np.random.default_rng(41)
        X = rng.uniform(-3, 5, (50, 2))
        cfg = ModelConfig((BasisFunction.constant(), BasisFunction.normal()))
        spec = cfg.build(X)
        for k, fs in enumerate(spec.factor_specs):
            assert fs.knots.lower == X[:, k].min()
            assert fs.knots.upper == X[:, k].max()

    def test_constant_factor_rejected(self):
        cfg = ModelConfig((BasisFunction.constant(), BasisFunction.normal()))
        with pytest.raises(ConfigurationError):
            cfg.build(np.ones((10, 1)))

    def test_conditional_quantile_fn(self):
        spec = simple_spec()
        rng = np.random.default_rng(2)
        a = random_admissible_params(spec, rng)
        fn = conditional_quantile_fn(spec, a, [0.4])
        assert fn(0.5) == pytest.approx(eval_model(spec, a, 0.5, [0.4]))
        np.testing.assert_allclose(
            fn(np.array([0.2, 0.8])),
            [eval_model(spec, a, p, [0.4]) for p in (0.2, 0.8)],
        )
