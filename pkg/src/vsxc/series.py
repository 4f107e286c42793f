"""Time-series container, CSV ingestion, chronological splitting and error metrics."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path
from typing import Sequence

import numpy as np

HOUR = 3600


class SeriesError(ValueError):
    """Raised for malformed series input."""


class CsvParseError(SeriesError):
    pass


class MonotonicityError(SeriesError):
    pass


def _frozen(a) -> np.ndarray:
    arr = np.array(a, copy=True)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class TimeSeries:
    """Uniformly sampled scalar series.

    ``timestamps`` are epoch seconds (int64), ``values`` are float64. Both arrays
    are read-only once constructed.
    """

    timestamps: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        ts = np.asarray(self.timestamps, dtype=np.int64)
        vals = np.asarray(self.values, dtype=np.float64)
        if ts.ndim != 1 or vals.ndim != 1:
            raise SeriesError("timestamps and values must be one-dimensional")
        if ts.shape != vals.shape:
            raise SeriesError(
                f"timestamps ({ts.size}) and values ({vals.size}) differ in length")
        if ts.size > 1 and np.any(np.diff(ts) <= 0):
            bad = int(np.argmax(np.diff(ts) <= 0)) + 1
            raise MonotonicityError(f"timestamps not strictly increasing at position {bad}")
        if not np.all(np.isfinite(vals)):
            bad = int(np.argmax(~np.isfinite(vals)))
            raise SeriesError(f"non-finite value at position {bad}")
        object.__setattr__(self, "timestamps", _frozen(ts))
        object.__setattr__(self, "values", _frozen(vals))

    @classmethod
    def from_values(cls, values, start: int = 0, step: int = HOUR) -> "TimeSeries":
        values = np.asarray(values, dtype=np.float64)
        return cls(start + step * np.arange(values.size, dtype=np.int64), values)

    def __len__(self) -> int:
        return int(self.values.size)

    def with_values(self, values) -> "TimeSeries":
        """Same timestamps, new values."""
        return TimeSeries(self.timestamps, values)

    def slice(self, start: int | None = None, stop: int | None = None) -> "TimeSeries":
        return TimeSeries(self.timestamps[start:stop], self.values[start:stop])


@dataclass(frozen=True)
class SplitSeries:
    train: TimeSeries
    test: TimeSeries
    ratio: float


@dataclass(frozen=True)
class MetricsReport:
    rmse: float
    mape: float
    n: int

    def to_dict(self) -> dict:
        return {"rmse": self.rmse, "mape": self.mape, "n": self.n}


def _parse_timestamp(raw: str, row: int) -> int:
    raw = raw.strip()
    try:
        return int(raw)
    except ValueError:
        pass
    try:
        return int(float(raw))
    except ValueError:
        pass
    try:
        dt = datetime.fromisoformat(raw.replace("Z", "+00:00"))
    except ValueError as exc:
        raise CsvParseError(f"row {row}: unparseable timestamp {raw!r}") from exc
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone.utc)
    return int(dt.timestamp())


def load_csv(path, value_column: str = "value") -> TimeSeries:
    """Read one value column (and optional ``timestamp`` column) from a CSV file.

    Rows are numbered from 1 for the first data row in error messages. When the
    file has no ``timestamp`` column, timestamps are synthesized hourly from 0.
    """
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"no such CSV file: {path}")
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            raise CsvParseError(f"{path}: missing header row")
        fields = [f.strip() for f in reader.fieldnames]
        reader.fieldnames = fields
        if value_column not in fields:
            raise CsvParseError(f"{path}: column {value_column!r} not found (have {fields})")
        has_ts = "timestamp" in fields
        stamps, values = [], []
        for row_no, rec in enumerate(reader, start=1):
            raw = (rec.get(value_column) or "").strip()
            if not raw:
                raise CsvParseError(f"row {row_no}: empty value in column {value_column!r}")
            try:
                v = float(raw)
            except ValueError as exc:
                raise CsvParseError(f"row {row_no}: unparseable value {raw!r}") from exc
            if not math.isfinite(v):
                raise CsvParseError(f"row {row_no}: non-finite value {raw!r}")
            values.append(v)
            if has_ts:
                stamps.append(_parse_timestamp(rec.get("timestamp") or "", row_no))
    if has_ts:
        for i in range(1, len(stamps)):
            if stamps[i] <= stamps[i - 1]:
                raise MonotonicityError(
                    f"row {i + 1}: timestamp {stamps[i]} not after previous {stamps[i - 1]}")
        return TimeSeries(np.array(stamps, dtype=np.int64), np.array(values))
    return TimeSeries.from_values(values)


def write_csv(path, columns: dict[str, Sequence], timestamps=None) -> None:
    """Write equal-length columns to CSV, with an optional leading timestamp column."""
    names = list(columns)
    cols = [np.asarray(columns[n]) for n in names]
    n = len(cols[0]) if cols else 0
    if any(len(c) != n for c in cols):
        raise SeriesError("all CSV columns must have the same length")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        header = (["timestamp"] if timestamps is not None else []) + names
        w.writerow(header)
        for i in range(n):
            row = [int(timestamps[i])] if timestamps is not None else []
            row += [repr(float(c[i])) for c in cols]
            w.writerow(row)


def split(series: TimeSeries, ratio: float = 0.9, index: int | None = None) -> SplitSeries:
    """Chronological train/test split.

    The train length is ``floor(ratio * len(series))`` unless ``index`` is given,
    in which case it is used verbatim (e.g. 2184 to mirror a round()-based split).
    """
    n = len(series)
    if n < 2:
        raise SeriesError(f"series too short to split (length {n})")
    if not 0.0 < ratio < 1.0:
        raise SeriesError(f"split ratio must lie in (0, 1), got {ratio}")
    cut = math.floor(ratio * n) if index is None else int(index)
    if not 0 < cut < n:
        raise SeriesError(f"split index {cut} leaves an empty side for length {n}")
    return SplitSeries(series.slice(None, cut), series.slice(cut, None), float(ratio))


def _pair(pred, target) -> tuple[np.ndarray, np.ndarray]:
    p = np.asarray(pred, dtype=np.float64).ravel()
    t = np.asarray(target, dtype=np.float64).ravel()
    if p.size != t.size:
        raise ValueError(f"length mismatch: pred {p.size} vs target {t.size}")
    if p.size == 0:
        raise ValueError("empty input")
    return p, t


def rmse(pred, target) -> float:
    p, t = _pair(pred, target)
    return float(np.sqrt(np.mean((p - t) ** 2)))


def mape(pred, target) -> float:
    """Mean absolute percentage error, as a fraction (not multiplied by 100)."""
    p, t = _pair(pred, target)
    zeros = np.flatnonzero(t == 0.0)
    if zeros.size:
        raise ZeroDivisionError(f"target is zero at index {int(zeros[0])}")
    return float(np.mean(np.abs((p - t) / t)))


def evaluate(pred, target) -> MetricsReport:
    p, t = _pair(pred, target)
    try:
        m = mape(p, t)
    except ZeroDivisionError:
        m = float("inf")
    return MetricsReport(rmse(p, t), m, int(p.size))
