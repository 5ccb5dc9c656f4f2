"""Dataset ingestion, standardization, and CSV helpers."""

from __future__ import annotations

import csv
import os
import tempfile
from dataclasses import dataclass

import numpy as np

from .exceptions import DataError


@dataclass(frozen=True)
class Dataset:
    """Response/factor observations with column names and a provenance note."""

    y: np.ndarray
    X: np.ndarray
    response: str = "y"
    factors: tuple[str, ...] = ()  # empty: auto-named x1..xK
    provenance: str = ""

    def __post_init__(self):
        y = np.asarray(self.y, dtype=float).ravel()
        X = np.atleast_2d(np.asarray(self.X, dtype=float))
        if X.shape[0] != y.size:
            raise DataError(f"{y.size} responses but {X.shape[0]} factor rows")
        if y.size == 0:
            raise DataError("dataset is empty")
        if X.shape[1] == 0:
            raise DataError("dataset needs at least one factor column")
        if not self.factors:
            object.__setattr__(
                self, "factors", tuple(f"x{j + 1}" for j in range(X.shape[1]))
            )
        if not (np.all(np.isfinite(y)) and np.all(np.isfinite(X))):
            raise DataError("dataset contains non-finite values")
        names = (self.response,) + tuple(self.factors)
        if len(set(names)) != len(names):
            raise DataError(f"column names are not unique: {names}")
        if len(self.factors) != X.shape[1]:
            raise DataError(f"{X.shape[1]} factor columns but {len(self.factors)} factor names")
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "factors", tuple(self.factors))

    @property
    def n(self) -> int:
        return self.y.size

    @property
    def k(self) -> int:
        return self.X.shape[1]

    def subset(self, idx) -> "Dataset":
        idx = np.asarray(idx)
        return Dataset(self.y[idx], self.X[idx], self.response, self.factors, self.provenance)


def load_csv(path, response: str, factors) -> Dataset:
    """Read a header-full CSV into a Dataset.

    Rows with missing or non-numeric cells in any referenced column abort the
    load with their (1-based, header-exclusive) row numbers.
    """
    factors = tuple(factors)
    if not factors:
        raise DataError("at least one factor column must be requested")
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}: file is empty, expected a header row") from None
        header = [h.strip() for h in header]
        wanted = (response,) + factors
        for name in wanted:
            if header.count(name) > 1:
                raise DataError(f"{path}: column {name!r} appears more than once in the header")
            if name not in header:
                raise DataError(f"{path}: missing column {name!r} (header: {header})")
        cols = {name: header.index(name) for name in wanted}
        ys, xs, bad_rows = [], [], []
        for rownum, row in enumerate(reader, start=1):
            if not row or all(not cell.strip() for cell in row):
                continue
            try:
                vals = [float(row[cols[name]]) for name in wanted]
            except (ValueError, IndexError):
                bad_rows.append(rownum)
                continue
            if not all(np.isfinite(v) for v in vals):
                bad_rows.append(rownum)
                continue
            ys.append(vals[0])
            xs.append(vals[1:])
        if bad_rows:
            raise DataError(
                f"{path}: missing or non-numeric cells in referenced columns at "
                f"data row(s) {bad_rows}"
            )
        if not ys:
            raise DataError(f"{path}: no data rows")
    return Dataset(np.array(ys), np.array(xs), response, factors, provenance=str(path))


# ---------------------------------------------------------------------------
# Standardization (zero median, unit interquartile range)
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ColumnScale:
    median: float
    iqr: float


def _column_scale(values, name) -> ColumnScale:
    # type-7 quantiles: h = (n-1) q; x[floor(h)] + (h - floor(h)) * (x[floor(h)+1] - x[floor(h)])
    q25, q50, q75 = np.quantile(values, [0.25, 0.5, 0.75], method="linear")
    iqr = float(q75 - q25)
    if iqr <= 0.0:
        raise DataError(f"column {name!r} has zero interquartile range; is it constant?")
    return ColumnScale(float(q50), iqr)


@dataclass(frozen=True)
class Standardizer:
    """Per-column medians and interquartile ranges of a training sample."""

    response: ColumnScale
    factors: tuple[ColumnScale, ...]

    @classmethod
    def fit(cls, dataset: Dataset) -> "Standardizer":
        resp = _column_scale(dataset.y, dataset.response)
        facs = tuple(
            _column_scale(dataset.X[:, j], name) for j, name in enumerate(dataset.factors)
        )
        return cls(resp, facs)

    def transform(self, dataset: Dataset) -> Dataset:
        if len(self.factors) != dataset.k:
            raise DataError("standardizer and dataset disagree on factor count")
        y = (dataset.y - self.response.median) / self.response.iqr
        X = self.transform_factors(dataset.X)
        return Dataset(y, X, dataset.response, dataset.factors, dataset.provenance)

    def transform_factors(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        med = np.array([c.median for c in self.factors])
        iqr = np.array([c.iqr for c in self.factors])
        return (X - med) / iqr

    def inverse_response(self, values) -> np.ndarray:
        return np.asarray(values, dtype=float) * self.response.iqr + self.response.median


def standardize(dataset: Dataset) -> tuple[Dataset, Standardizer]:
    """Standardize every column to zero median and unit IQR."""
    std = Standardizer.fit(dataset)
    return std.transform(dataset), std


def destandardize_predictions(values, standardizer: Standardizer) -> np.ndarray:
    """Map standardized response values back to original units."""
    return standardizer.inverse_response(values)


# ---------------------------------------------------------------------------
# CSV emission
# ---------------------------------------------------------------------------


def format_cell(v) -> str:
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def write_csv(path, header, rows):
    """Write a CSV atomically; floats use shortest round-trip formatting."""
    lines = [",".join(str(h) for h in header)]
    for row in rows:
        lines.append(",".join(format_cell(v) for v in row))
    atomic_write_text(path, "\n".join(lines) + "\n")


def atomic_write_text(path, text: str):
    path = os.fspath(path)
    d = os.path.dirname(path) or "."
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-", suffix=".part")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
