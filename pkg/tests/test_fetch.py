"""Series fetcher: caching, parsing, transforms, joins (no live network)."""

import numpy as np
import pytest

from mixquant.exceptions import DataError, FetchError
from mixquant.fetch import (
    Series,
    fetch_series,
    join_series,
    load_cached_series,
    parse_series_csv,
    pct_change_year_ago,
)

CSV_A = "DATE,SER_A\n2001-01-01,100\n2001-02-01,.\n2001-03-01,110\n"


class TestParse:
    def test_parses_and_drops_missing(self):
        s = parse_series_csv(CSV_A, "SER_A")
        assert s.dates == ("2001-01-01", "2001-03-01")
        np.testing.assert_array_equal(s.values, [100.0, 110.0])

    def test_malformed_payload(self):
        with pytest.raises(FetchError):
            parse_series_csv("DATE,S\n2001-01-01,abc\n", "S")

    def test_empty_payload(self):
        with pytest.raises(FetchError):
            parse_series_csv("DATE,S\n", "S")


class TestCache:
    def test_served_from_cache_without_network(self, tmp_path):
        cache = tmp_path / "cache"
        cache.mkdir()
        (cache / "SER_A.csv").write_text(CSV_A)
        # base_url points nowhere; the cached file must short-circuit the fetch
        paths = fetch_series(["SER_A"], cache, base_url="http://127.0.0.1:1/nope")
        s = load_cached_series(cache, "SER_A")
        assert paths["SER_A"].endswith("SER_A.csv")
        assert s.values.size == 2

    def test_network_failure_is_retriable_error(self, tmp_path):
        with pytest.raises(FetchError) as err:
            fetch_series(
                ["MISSING"], tmp_path, base_url="http://127.0.0.1:1/nope", retries=1
            )
        assert err.value.retriable


class TestTransforms:
    def test_constant_series_zero_change(self):
        s = Series("C", tuple(f"m{i}" for i in range(30)), np.full(30, 7.0))
        out = pct_change_year_ago(s)
        assert out.values.size == 18
        np.testing.assert_allclose(out.values, 0.0)

    def test_known_growth(self):
        values = 100.0 * 1.02 ** np.arange(24)
        s = Series("G", tuple(f"m{i}" for i in range(24)), values)
        out = pct_change_year_ago(s)
        np.testing.assert_allclose(out.values, 100.0 * (1.02**12 - 1.0), rtol=1e-12)

    def test_too_short_series(self):
        with pytest.raises(DataError):
            pct_change_year_ago(Series("S", ("a", "b"), np.array([1.0, 2.0])))


class TestJoin:
    def test_inner_join_row_count(self):
        a = Series("A", ("d1", "d2", "d3"), np.array([1.0, 2.0, 3.0]))
        b = Series("B", ("d2", "d3", "d4"), np.array([20.0, 30.0, 40.0]))
        c = Series("C", ("d0", "d2", "d3"), np.array([-1.0, -2.0, -3.0]))
        ds = join_series(a, [b, c])
        assert ds.n == 2  # d2, d3 only
        assert ds.n <= min(len(a.dates), len(b.dates), len(c.dates))
        np.testing.assert_array_equal(ds.y, [2.0, 3.0])
        np.testing.assert_array_equal(ds.X[:, 0], [20.0, 30.0])

    def test_disjoint_dates_rejected(self):
        a = Series("A", ("d1",), np.array([1.0]))
        b = Series("B", ("d2",), np.array([2.0]))
        with pytest.raises(DataError):
            join_series(a, [b])
