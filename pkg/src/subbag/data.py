"""Datasets addressable by row index, plus CSV ingestion.

Two backings share one small interface (``n_rows``, ``n_features``,
``take``, ``chunks``):

* :class:`ArrayDataset` keeps ``X`` and ``y`` in memory.
* :class:`IndexedCsvDataset` keeps only a row-offset index and reads the
  rows a subsample needs with ``seek``; a full pass streams the file in
  chunks. Resident memory is O(N) int64 offsets plus O(rows * p) per read.

Categorical columns are expanded to indicators with the first-seen level
dropped as reference. A column is categorical if its first data cell does
not parse as a number (or if it is listed explicitly).
"""

from __future__ import annotations

import csv
import io
import math
from array import array
from dataclasses import dataclass, field
from typing import Iterator, Sequence

import numpy as np

from .errors import ConfigError, DataError
from .losses import Family

INTERCEPT_NAME = "(intercept)"
_MISSING = {"", "na", "nan", "null", "none"}


class ArrayDataset:
    def __init__(self, X, y, feature_names: Sequence[str] | None = None,
                 family: Family | None = None, intercept_index: int | None = None):
        X = np.ascontiguousarray(X, dtype=float)
        y = np.ascontiguousarray(y, dtype=float)
        if X.ndim != 2 or y.shape != (X.shape[0],):
            raise DataError(f"shape mismatch: X {X.shape}, y {y.shape}")
        if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
            raise DataError("non-finite values in data")
        if family is Family.LOGISTIC and not np.all((y == 0) | (y == 1)):
            raise DataError("logistic response must be 0/1")
        self.X = X
        self.y = y
        self.feature_names = list(feature_names) if feature_names is not None else [
            f"x{j + 1}" for j in range(X.shape[1])]
        self.intercept_index = intercept_index
        self.levels: dict[str, list[str]] = {}

    @property
    def n_rows(self) -> int:
        return self.X.shape[0]

    @property
    def n_features(self) -> int:
        return self.X.shape[1]

    def take(self, indices) -> tuple[np.ndarray, np.ndarray]:
        idx = np.asarray(indices, dtype=np.int64)
        return self.X[idx], self.y[idx]

    def chunks(self, rows: int | None = None) -> Iterator[tuple[np.ndarray, np.ndarray]]:
        # in-memory data is already resident: one chunk unless asked otherwise
        if rows is None or rows >= self.n_rows:
            yield self.X, self.y
            return
        for start in range(0, self.n_rows, rows):
            yield self.X[start:start + rows], self.y[start:start + rows]


@dataclass
class CsvSchema:
    response: str
    family: Family = Family.LINEAR
    covariates: list[str] | None = None  # None means all other columns
    categorical: list[str] = field(default_factory=list)
    intercept: bool = False


@dataclass
class _Column:
    name: str
    position: int
    levels: list[str] | None = None  # None for numeric columns

    @property
    def width(self) -> int:
        return 1 if self.levels is None else len(self.levels) - 1


def _split(line: str) -> list[str]:
    if '"' in line:
        return next(csv.reader([line]))
    return line.split(",")


def _is_missing(cell: str) -> bool:
    return cell.strip().lower() in _MISSING


def _to_float(cell: str, row: int, col: str) -> float:
    if _is_missing(cell):
        raise DataError(f"missing value at row {row}, column {col!r}")
    try:
        v = float(cell)
    except ValueError:
        raise DataError(f"unparseable number {cell!r} at row {row}, column {col!r}") from None
    if not math.isfinite(v):
        raise DataError(f"non-finite value at row {row}, column {col!r}")
    return v


class _RowParser:
    """Turns split CSV rows into (x, y) using a fixed column plan."""

    def __init__(self, header: list[str], schema: CsvSchema):
        if schema.response not in header:
            raise ConfigError(f"response column {schema.response!r} not in header")
        names = schema.covariates
        if names is None:
            names = [h for h in header if h != schema.response]
        missing = [c for c in names if c not in header]
        if missing:
            raise ConfigError(f"covariate columns not in header: {missing}")
        if schema.response in names:
            raise ConfigError("response column listed as a covariate")
        self.schema = schema
        self.n_cells = len(header)
        self.y_pos = header.index(schema.response)
        self.columns = [_Column(c, header.index(c)) for c in names]
        self.forced = set(schema.categorical)
        self._typed = False

    def _settle_types(self, cells: list[str], row: int) -> None:
        for col in self.columns:
            cell = cells[col.position]
            if _is_missing(cell):
                raise DataError(f"missing value at row {row}, column {col.name!r}")
            if col.name in self.forced:
                col.levels = []
                continue
            try:
                float(cell)
            except ValueError:
                col.levels = []
        self._typed = True

    def observe(self, cells: list[str], row: int) -> None:
        """Validate one row and record categorical levels (first pass)."""
        if len(cells) != self.n_cells:
            raise DataError(f"row {row} has {len(cells)} cells, expected {self.n_cells}")
        if not self._typed:
            self._settle_types(cells, row)
        y = _to_float(cells[self.y_pos], row, self.schema.response)
        if self.schema.family is Family.LOGISTIC and y not in (0.0, 1.0):
            raise DataError(f"logistic response must be 0/1 at row {row}")
        for col in self.columns:
            cell = cells[col.position]
            if col.levels is None:
                _to_float(cell, row, col.name)
            else:
                if _is_missing(cell):
                    raise DataError(f"missing value at row {row}, column {col.name!r}")
                if cell not in col.levels:
                    col.levels.append(cell)

    def freeze(self) -> None:
        self._codes = [None if c.levels is None else {lv: i for i, lv in enumerate(c.levels)}
                       for c in self.columns]

    @property
    def feature_names(self) -> list[str]:
        out = [INTERCEPT_NAME] if self.schema.intercept else []
        for col in self.columns:
            if col.levels is None:
                out.append(col.name)
            else:
                out.extend(f"{col.name}={lv}" for lv in col.levels[1:])
        return out

    @property
    def levels(self) -> dict[str, list[str]]:
        return {c.name: list(c.levels) for c in self.columns if c.levels is not None}

    def to_arrays(self, rows: list[list[str]]) -> tuple[np.ndarray, np.ndarray]:
        n = len(rows)
        y = np.array([r[self.y_pos] for r in rows], dtype=float)
        blocks = [np.ones((n, 1))] if self.schema.intercept else []
        for col, codes in zip(self.columns, self._codes):
            if codes is None:
                blocks.append(np.array([r[col.position] for r in rows], dtype=float)[:, None])
            else:
                idx = np.array([codes[r[col.position]] for r in rows], dtype=np.int64)
                ind = np.zeros((n, col.width))
                hit = idx > 0
                ind[np.nonzero(hit)[0], idx[hit] - 1] = 1.0
                blocks.append(ind)
        X = np.hstack(blocks) if blocks else np.empty((n, 0))
        return X, y


class IndexedCsvDataset:
    """CSV file accessed through a row-offset index; rows are read on demand."""

    def __init__(self, path: str, parser: _RowParser, offsets: np.ndarray):
        self.path = str(path)
        self._parser = parser
        self._offsets = offsets
        self.feature_names = parser.feature_names
        self.levels = parser.levels
        self.intercept_index = 0 if parser.schema.intercept else None

    @property
    def n_rows(self) -> int:
        return len(self._offsets)

    @property
    def n_features(self) -> int:
        return len(self.feature_names)

    def take(self, indices) -> tuple[np.ndarray, np.ndarray]:
        idx = np.asarray(indices, dtype=np.int64)
        order = np.argsort(idx, kind="stable")
        rows: list[list[str]] = [None] * len(idx)  # type: ignore[list-item]
        with open(self.path, "rb") as fh:
            for pos in order:
                fh.seek(int(self._offsets[idx[pos]]))
                rows[pos] = _split(fh.readline().decode("utf-8").rstrip("\r\n"))
        return self._parser.to_arrays(rows)

    def chunks(self, rows: int | None = 65536) -> Iterator[tuple[np.ndarray, np.ndarray]]:
        rows = rows or 65536
        with open(self.path, "rb") as fh:
            fh.seek(int(self._offsets[0]) if self.n_rows else 0)
            buf: list[list[str]] = []
            for _ in range(self.n_rows):
                buf.append(_split(fh.readline().decode("utf-8").rstrip("\r\n")))
                if len(buf) == rows:
                    yield self._parser.to_arrays(buf)
                    buf = []
            if buf:
                yield self._parser.to_arrays(buf)


def load_csv(path, schema: CsvSchema, indexed: bool = False):
    """Read a CSV with a header row into a dataset.

    ``indexed=True`` keeps only row offsets in memory; otherwise the whole
    table is parsed into an :class:`ArrayDataset`.
    """
    try:
        fh = open(path, "rb")
    except OSError as exc:
        raise ConfigError(f"cannot open {path}: {exc}") from None
    with fh:
        header_line = fh.readline().decode("utf-8-sig").rstrip("\r\n")
        if not header_line:
            raise DataError(f"{path}: empty file or missing header")
        header = [h.strip() for h in _split(header_line)]
        parser = _RowParser(header, schema)
        offsets = array("q")
        kept: list[list[str]] = []
        pos = fh.tell()
        row = 0
        for raw in iter(fh.readline, b""):
            line = raw.decode("utf-8").rstrip("\r\n")
            start, pos = pos, pos + len(raw)
            if not line.strip():
                continue
            row += 1
            cells = _split(line)
            parser.observe(cells, row)
            if indexed:
                offsets.append(start)
            else:
                kept.append(cells)
    if row == 0:
        raise DataError(f"{path}: no data rows")
    parser.freeze()
    if indexed:
        return IndexedCsvDataset(path, parser, np.frombuffer(offsets, dtype=np.int64).copy())
    X, y = parser.to_arrays(kept)
    ds = ArrayDataset(X, y, parser.feature_names, schema.family,
                      intercept_index=0 if schema.intercept else None)
    ds.levels = parser.levels
    return ds


def write_csv(path, X: np.ndarray, y: np.ndarray, names: Sequence[str] | None = None,
              response: str = "y") -> None:
    """Write ``y`` then ``X`` columns with full float precision (repr round-trips)."""
    names = list(names) if names is not None else [f"x{j + 1}" for j in range(X.shape[1])]
    with open(path, "w", newline="") as fh:
        fh.write(",".join([response, *names]) + "\n")
        out = io.StringIO()
        for start in range(0, len(y), 50000):
            block = np.column_stack([y[start:start + 50000], X[start:start + 50000]])
            for r in block.tolist():
                out.write(",".join(map(repr, r)))
                out.write("\n")
            fh.write(out.getvalue())
            out.seek(0)
            out.truncate()
