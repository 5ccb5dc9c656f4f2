"""Ingestion, standardization, and CSV round trips."""

import numpy as np
import pytest

from mixquant.data import (
    Dataset,
    Standardizer,
    destandardize_predictions,
    load_csv,
    standardize,
    write_csv,
)
from mixquant.exceptions import DataError


class TestDataset:
    def test_basic_construction(self):
        ds = Dataset([1.0, 2.0], [[0.1], [0.2]], "y", ("x",))
        assert ds.n == 2 and ds.k == 1

    def test_rejects_nonfinite(self):
        with pytest.raises(DataError):
            Dataset([1.0, np.nan], [[0.1], [0.2]])

    def test_rejects_duplicate_names(self):
        with pytest.raises(DataError):
            Dataset([1.0], [[0.1, 0.2]], "y", ("y", "x"))

    def test_rejects_empty(self):
        with pytest.raises(DataError):
            Dataset([], np.empty((0, 1)))

    def test_subset(self):
        ds = Dataset([1.0, 2.0, 3.0], [[1], [2], [3]])
        sub = ds.subset([0, 2])
        np.testing.assert_array_equal(sub.y, [1.0, 3.0])


class TestLoadCsv:
    def test_three_rows(self, tmp_path):
        path = tmp_path / "d.csv"
        path.write_text("y,x1,x2\n1,2,3\n4,5,6\n7,8,9\n")
        ds = load_csv(path, "y", ("x1", "x2"))
        assert ds.n == 3
        np.testing.assert_array_equal(ds.X[1], [5.0, 6.0])

    def test_blank_cell_names_row(self, tmp_path):
        path = tmp_path / "d.csv"
        path.write_text("y,x\n1,2\n,3\n4,5\n")
        with pytest.raises(DataError, match=r"row\(s\) \[2\]"):
            load_csv(path, "y", ("x",))

    def test_non_numeric_named(self, tmp_path):
        path = tmp_path / "d.csv"
        path.write_text("y,x\n1,2\n3,oops\n")
        with pytest.raises(DataError, match=r"\[2\]"):
            load_csv(path, "y", ("x",))

    def test_missing_column(self, tmp_path):
        path = tmp_path / "d.csv"
        path.write_text("y,x\n1,2\n")
        with pytest.raises(DataError, match="missing column 'z'"):
            load_csv(path, "y", ("z",))

    def test_empty_file(self, tmp_path):
        path = tmp_path / "d.csv"
        path.write_text("")
        with pytest.raises(DataError, match="empty"):
            load_csv(path, "y", ("x",))

    def test_unreferenced_text_columns_ok(self, tmp_path):
        path = tmp_path / "d.csv"
        path.write_text("date,y,x\n2001-01,1,2\n2001-02,3,4\n")
        ds = load_csv(path, "y", ("x",))
        assert ds.n == 2

    def test_round_trip_full_precision(self, tmp_path):
        rng = np.random.default_rng(0)
        y = rng.standard_normal(20)
        X = rng.standard_normal((20, 2))
        path = tmp_path / "d.csv"
        rows = [[yi, *xi] for yi, xi in zip(y, X)]
        write_csv(path, ["y", "a", "b"], rows)
        ds = load_csv(path, "y", ("a", "b"))
        np.testing.assert_array_equal(ds.y, y)
        np.testing.assert_array_equal(ds.X, X)


class TestStandardize:
    def test_known_quartile_convention(self):
        # type-7 quartiles of {1,2,3}: q25 = 1.5, q75 = 2.5, IQR = 1
        ds = Dataset([1.0, 2.0, 3.0], [[10.0], [20.0], [30.0]])
        out, std = standardize(ds)
        assert std.response.median == 2.0
        assert std.response.iqr == 1.0
        np.testing.assert_allclose(out.y, [-1.0, 0.0, 1.0])

    def test_standardized_stats(self):
        rng = np.random.default_rng(1)
        ds = Dataset(rng.standard_normal(101) * 7 + 3, rng.uniform(0, 9, (101, 2)))
        out, _ = standardize(ds)
        assert np.quantile(out.y, 0.5) == pytest.approx(0.0, abs=1e-12)
        q25, q75 = np.quantile(out.y, [0.25, 0.75])
        assert q75 - q25 == pytest.approx(1.0, abs=1e-12)
        for j in range(2):
            assert np.quantile(out.X[:, j], 0.5) == pytest.approx(0.0, abs=1e-12)

    def test_transform_inverse_identity(self):
        rng = np.random.default_rng(2)
        ds = Dataset(rng.standard_normal(60), rng.standard_normal((60, 1)))
        out, std = standardize(ds)
        back = destandardize_predictions(out.y, std)
        np.testing.assert_allclose(back, ds.y, atol=1e-12)

    def test_already_standardized_is_nearly_identity(self):
        rng = np.random.default_rng(3)
        ds = Dataset(rng.standard_normal(500), rng.standard_normal((500, 1)))
        once, _ = standardize(ds)
        twice, std2 = standardize(once)
        assert std2.response.median == pytest.approx(0.0, abs=1e-12)
        assert std2.response.iqr == pytest.approx(1.0, rel=0.1)

    def test_zero_iqr_rejected(self):
        ds = Dataset([5.0, 5.0, 5.0, 5.0], [[1.0], [2.0], [3.0], [4.0]])
        with pytest.raises(DataError, match="constant"):
            standardize(ds)

    def test_fold_transfer(self):
        rng = np.random.default_rng(4)
        train = Dataset(rng.standard_normal(50) + 5, rng.uniform(1, 2, (50, 1)))
        std = Standardizer.fit(train)
        X_new = np.array([[1.5]])
        np.testing.assert_allclose(
            std.transform_factors(X_new),
            (1.5 - std.factors[0].median) / std.factors[0].iqr,
        )
