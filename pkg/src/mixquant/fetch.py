"""Fetch economic time series as CSV with on-disk caching.

Series are pulled from a CSV endpoint (by default the keyless FRED
``fredgraph.csv`` route), cached one file per series, and post-processed
locally (year-over-year percent change, inner join on date).  Offline runs
are served entirely from the cache.
"""

from __future__ import annotations

import os
import time
from dataclasses import dataclass

import numpy as np

from .data import Dataset, atomic_write_text
from .exceptions import DataError, FetchError

DEFAULT_BASE_URL = "https://fred.stlouisfed.org/graph/fredgraph.csv"


@dataclass(frozen=True)
class Series:
    series_id: str
    dates: tuple[str, ...]
    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "values", np.asarray(self.values, dtype=float))
        if len(self.dates) != self.values.size:
            raise DataError(f"{self.series_id}: dates and values differ in length")


def fetch_series(series_ids, cache_dir, base_url: str = DEFAULT_BASE_URL,
                 force: bool = False, retries: int = 3, timeout: float = 30.0) -> dict:
    """Download (or reuse cached) series CSVs; returns {series_id: path}."""
    os.makedirs(cache_dir, exist_ok=True)
    paths = {}
    for sid in series_ids:
        path = os.path.join(cache_dir, f"{sid}.csv")
        if force or not os.path.exists(path):
            text = _download(sid, base_url, retries, timeout)
            parse_series_csv(text, sid)  # reject malformed payloads before caching
            atomic_write_text(path, text)
        paths[sid] = path
    return paths


def _download(series_id, base_url, retries, timeout) -> str:
    import requests

    url = f"{base_url}?id={series_id}"
    last = None
    for attempt in range(retries):
        try:
            resp = requests.get(url, timeout=timeout)
            resp.raise_for_status()
            return resp.text
        except requests.RequestException as exc:
            last = exc
            time.sleep(min(2.0**attempt, 8.0))
    raise FetchError(f"could not fetch {series_id!r}: {last}", retriable=True)


def parse_series_csv(text: str, series_id: str) -> Series:
    """Parse a two-column date,value CSV; '.' and blank cells are dropped."""
    lines = [ln.strip() for ln in text.strip().splitlines() if ln.strip()]
    if len(lines) < 2:
        raise FetchError(f"{series_id}: payload has no data rows", retriable=False)
    header = [h.strip() for h in lines[0].split(",")]
    if len(header) < 2:
        raise FetchError(f"{series_id}: expected date,value columns, got {header}", retriable=False)
    dates, values = [], []
    for ln in lines[1:]:
        cells = [c.strip() for c in ln.split(",")]
        if len(cells) < 2:
            raise FetchError(f"{series_id}: malformed row {ln!r}", retriable=False)
        if cells[1] in (".", ""):
            continue
        try:
            values.append(float(cells[1]))
        except ValueError:
            raise FetchError(f"{series_id}: non-numeric value {cells[1]!r}", retriable=False) from None
        dates.append(cells[0])
    return Series(series_id, tuple(dates), np.array(values))


def load_cached_series(cache_dir, series_id) -> Series:
    path = os.path.join(cache_dir, f"{series_id}.csv")
    with open(path) as fh:
        return parse_series_csv(fh.read(), series_id)


def pct_change_year_ago(series: Series, periods: int = 12) -> Series:
    """Percent change from ``periods`` observations earlier."""
    v = series.values
    if v.size <= periods:
        raise DataError(f"{series.series_id}: too few observations for a {periods}-period change")
    base = v[:-periods]
    if np.any(base == 0.0):
        raise DataError(f"{series.series_id}: zero base value in percent change")
    change = 100.0 * (v[periods:] / base - 1.0)
    return Series(series.series_id, series.dates[periods:], change)


def join_series(response: Series, factors) -> Dataset:
    """Inner-join on date; the row count never exceeds the smallest input."""
    factor_maps = [dict(zip(s.dates, s.values)) for s in factors]
    rows = []
    for d, y in zip(response.dates, response.values):
        xs = [fm.get(d) for fm in factor_maps]
        if all(x is not None for x in xs):
            rows.append((y, xs))
    if not rows:
        raise DataError("date join produced no rows")
    y = np.array([r[0] for r in rows])
    X = np.array([r[1] for r in rows])
    return Dataset(
        y,
        X,
        response.series_id,
        tuple(s.series_id for s in factors),
        provenance="joined on date",
    )
