"""Error measures: values, axioms, convexity, and statistic recovery."""

import numpy as np
import pytest

from mixquant.exceptions import DataError, DomainError
from mixquant.quadrangle import (
    ErrorKind,
    discrete_superquantile,
    error_value,
    pinball,
    statistic,
)


class TestPinball:
    def test_zero_at_zero(self):
        for p in (0.05, 0.5, 0.95):
            assert pinball(p, 0.0) == 0.0

    def test_symmetric_case(self):
        assert pinball(0.5, 2.0) == 1.0

    def test_tail_case(self):
        assert pinball(0.9, -1.0) == pytest.approx(0.1)

    def test_nonnegative_and_homogeneous(self):
        rng = np.random.default_rng(0)
        z = rng.standard_normal(200)
        for p in (0.1, 0.6, 0.9):
            vals = pinball(p, z)
            assert np.all(vals >= 0)
            for c in (0.5, 2.0, 7.3):
                np.testing.assert_allclose(pinball(p, c * z), c * vals, rtol=1e-12)

    def test_domain(self):
        with pytest.raises(DomainError):
            pinball(0.0, 1.0)
        with pytest.raises(DomainError):
            pinball(1.0, 1.0)


class TestDiscreteSuperquantile:
    def test_beta_zero_is_mean(self):
        assert discrete_superquantile(0.0, [1, 2, 3]) == pytest.approx(2.0)

    def test_top_atom(self):
        assert discrete_superquantile(2 / 3, [1, 2, 3]) == pytest.approx(3.0)

    def test_atom_splitting(self):
        assert discrete_superquantile(0.5, [0, 10]) == pytest.approx(10.0)

    def test_unsorted_input(self):
        assert discrete_superquantile(0.5, [10, 0]) == pytest.approx(10.0)

    def test_nondecreasing_in_beta(self):
        rng = np.random.default_rng(1)
        z = rng.standard_normal(57)
        betas = np.linspace(0, 0.99, 300)
        vals = [discrete_superquantile(b, z) for b in betas]
        assert np.all(np.diff(vals) >= -1e-12)

    def test_beta_one_rejected(self):
        with pytest.raises(DomainError):
            discrete_superquantile(1.0, [1, 2])

    def test_brute_force_oracle(self):
        # oracle: minimize c + mean((z-c)+)/(1-beta) over a fine c grid
        rng = np.random.default_rng(2)
        z = rng.standard_normal(40)
        for beta in (0.1, 0.37, 0.8):
            cs = np.linspace(z.min() - 1, z.max() + 1, 40001)
            ruv = cs + np.maximum(z[None, :] - cs[:, None], 0).mean(axis=1) / (1 - beta)
            assert discrete_superquantile(beta, z) == pytest.approx(ruv.min(), abs=1e-6)


class TestErrorValue:
    def test_pinball_zero_sample(self):
        assert error_value(ErrorKind.pinball(0.3), np.zeros(5)) == 0.0

    def test_pinball_symmetric_two_points(self):
        assert error_value(ErrorKind.pinball(0.5), [-1.0, 1.0]) == pytest.approx(0.5)

    def test_superquantile_degenerate_zero(self):
        assert error_value(ErrorKind.superquantile(0.5), np.zeros(9)) == pytest.approx(0.0)

    def test_kb_normalized_is_scaled_pinball(self):
        rng = np.random.default_rng(3)
        z = rng.standard_normal(64)
        for p in (0.2, 0.5, 0.8):
            kb = error_value(ErrorKind.kb_normalized(p), z)
            pb = error_value(ErrorKind.pinball(p), z)
            assert kb == pytest.approx(pb / (1 - p), rel=1e-12)

    def test_expectile_formula(self):
        z = np.array([-2.0, 1.0])
        val = error_value(ErrorKind.expectile(0.75), z)
        assert val == pytest.approx((0.25 * 4.0 + 0.75 * 1.0) / 2)

    def test_error_axioms_random_samples(self):
        rng = np.random.default_rng(4)
        kinds = [
            lambda p: ErrorKind.pinball(p),
            lambda p: ErrorKind.kb_normalized(p),
            lambda p: ErrorKind.superquantile(p),
            lambda p: ErrorKind.expectile(p),
        ]
        for _ in range(40):
            z = rng.standard_normal(rng.integers(3, 50)) * rng.uniform(0.1, 5)
            p = rng.uniform(0.05, 0.95)
            for mk in kinds:
                val = error_value(mk(p), z)
                assert val >= -1e-9
                if np.max(np.abs(z)) > 1e-8:
                    assert val > 0.0

    def test_convexity_probe(self):
        rng = np.random.default_rng(5)
        for _ in range(30):
            n = int(rng.integers(4, 40))
            z1 = rng.standard_normal(n)
            z2 = rng.standard_normal(n) * 2
            lam = rng.uniform(0, 1)
            p = rng.uniform(0.1, 0.9)
            for kind in (
                ErrorKind.pinball(p),
                ErrorKind.superquantile(p, 100),
                ErrorKind.expectile(p),
            ):
                mixed = error_value(kind, lam * z1 + (1 - lam) * z2)
                bound = lam * error_value(kind, z1) + (1 - lam) * error_value(kind, z2)
                assert mixed <= bound + 1e-9

    def test_empty_sample_rejected(self):
        with pytest.raises(DataError):
            error_value(ErrorKind.pinball(0.5), [])


class TestStatistic:
    def test_pinball_median(self):
        assert statistic(ErrorKind.pinball(0.5), [1.0, 2.0, 3.0]) == pytest.approx(2.0, abs=1e-6)

    def test_pinball_quantile_interval(self):
        # with pN integral the minimizer set is [z_(pN), z_(pN+1)]
        z = np.arange(10.0)
        s = statistic(ErrorKind.pinball(0.75), z)
        k = 0.75 * 10  # 7.5 -> unique minimizer z_(8) = 7.0 (1-based)
        assert z[int(np.ceil(k)) - 1] - 1e-6 <= s <= z[int(np.ceil(k))] + 1e-6

    def test_pinball_statistic_in_interval_random(self):
        rng = np.random.default_rng(6)
        for _ in range(50):
            n = int(rng.integers(5, 80))
            z = np.sort(rng.standard_normal(n) * rng.uniform(0.5, 4))
            p = rng.uniform(0.05, 0.95)
            s = statistic(ErrorKind.pinball(p), z)
            k = p * n
            if abs(k - round(k)) < 1e-9:
                lo, hi = z[int(round(k)) - 1], z[min(int(round(k)), n - 1)]
            else:
                lo = hi = z[int(np.ceil(k)) - 1]
            assert lo - 1e-6 <= s <= hi + 1e-6

    def test_superquantile_statistic_two_atoms(self):
        # the beta grid clips the recovered tail average at the node just
        # below p; for {0,10} the tail-average slope there is twice the range
        kind = ErrorKind.superquantile(0.5, 200)
        s = statistic(kind, [0.0, 10.0])
        tol = 2.2 * (1 / 200) * 10.0
        assert s == pytest.approx(10.0, abs=tol)

    def test_superquantile_statistic_random(self):
        rng = np.random.default_rng(7)
        for _ in range(40):
            n = int(rng.integers(20, 150))
            z = rng.standard_normal(n) * rng.uniform(0.5, 3)
            p = rng.uniform(0.1, 0.9)
            kind = ErrorKind.superquantile(p, 200)
            s = statistic(kind, z)
            target = discrete_superquantile(p, z)
            assert abs(s - target) <= (1 / 200) * (z.max() - z.min()) + 1e-9

    def test_expectile_statistic_mean_at_half(self):
        rng = np.random.default_rng(8)
        z = rng.standard_normal(100)
        s = statistic(ErrorKind.expectile(0.5), z)
        assert s == pytest.approx(z.mean(), abs=1e-6)
