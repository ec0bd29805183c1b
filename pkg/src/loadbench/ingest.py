"""Hourly load CSV ingestion, regularization and chronological splitting."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Mapping

import numpy as np
import pandas as pd

logger = logging.getLogger(__name__)

HOUR = np.timedelta64(1, "h")
TIMESTAMP_FORMATS = ("%Y-%m-%dT%H:%M:%S", "%Y-%m-%d %H:%M")
MIN_DAYS = 8


class IngestError(ValueError):
    pass


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, copy=True)
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class SeriesTable:
    """Hourly load series with aligned covariates.

    Missing cells are stored as NaN; ``missing_mask`` is derived from them.
    """

    timestamps: np.ndarray  # datetime64[h]
    load: np.ndarray
    covariates: Mapping[str, np.ndarray] = field(default_factory=dict)

    def __post_init__(self):
        ts = np.asarray(self.timestamps).astype("datetime64[h]")
        load = np.asarray(self.load, dtype=float)
        covs = {k: _frozen(np.asarray(v, dtype=float)) for k, v in self.covariates.items()}
        n = len(ts)
        if load.shape != (n,) or any(v.shape != (n,) for v in covs.values()):
            raise IngestError("all columns must share the timestamp length")
        # non-finite cells are missing by definition
        load = np.where(np.isfinite(load), load, np.nan)
        covs = {k: _frozen(np.where(np.isfinite(v), v, np.nan)) for k, v in covs.items()}
        object.__setattr__(self, "timestamps", _frozen(ts))
        object.__setattr__(self, "load", _frozen(load))
        object.__setattr__(self, "covariates", covs)

    def __len__(self) -> int:
        return len(self.timestamps)

    @property
    def columns(self) -> list[str]:
        return ["load", *self.covariates]

    @property
    def missing_mask(self) -> np.ndarray:
        """Boolean (n, 1 + n_covariates) array in ``columns`` order."""
        cols = [self.load, *self.covariates.values()]
        return np.column_stack([np.isnan(c) for c in cols]) if len(self) else np.zeros((0, len(cols)), bool)

    @property
    def zero_flags(self) -> np.ndarray:
        return self.load == 0.0

    def is_regular(self) -> bool:
        return bool(len(self) < 2 or np.all(np.diff(self.timestamps) == HOUR))

    def slice(self, start: int, stop: int) -> "SeriesTable":
        return SeriesTable(
            self.timestamps[start:stop],
            self.load[start:stop],
            {k: v[start:stop] for k, v in self.covariates.items()},
        )

    def replace(self, load=None, covariates=None) -> "SeriesTable":
        return SeriesTable(
            self.timestamps,
            self.load if load is None else load,
            dict(self.covariates) if covariates is None else covariates,
        )

    def equals(self, other: "SeriesTable") -> bool:
        """Bit-equal values and equal masks."""
        if len(self) != len(other) or list(self.covariates) != list(other.covariates):
            return False
        if not np.array_equal(self.timestamps, other.timestamps):
            return False
        pairs = [(self.load, other.load)] + [(self.covariates[k], other.covariates[k]) for k in self.covariates]
        return all(np.array_equal(a, b, equal_nan=True) for a, b in pairs)


def concat(parts: list[SeriesTable]) -> SeriesTable:
    names = list(parts[0].covariates)
    return SeriesTable(
        np.concatenate([p.timestamps for p in parts]),
        np.concatenate([p.load for p in parts]),
        {k: np.concatenate([p.covariates[k] for p in parts]) for k in names},
    )


def _parse_timestamps(raw: pd.Series) -> pd.Series:
    raw = raw.astype(str).str.strip()
    parsed = pd.to_datetime(raw, format=TIMESTAMP_FORMATS[0], errors="coerce")
    for fmt in TIMESTAMP_FORMATS[1:]:
        todo = parsed.isna()
        if not todo.any():
            break
        parsed[todo] = pd.to_datetime(raw[todo], format=fmt, errors="coerce")
    return parsed


def _cell(text: str) -> float:
    try:
        return float(text)
    except ValueError:
        return np.nan


def parse_csv(path, schema: Mapping[str, object] | None = None) -> SeriesTable:
    """Read a CSV into a regular hourly :class:`SeriesTable`.

    ``schema`` maps ``timestamp`` and ``load`` to column names and may carry
    ``covariates``: either a list of column names (kept as-is) or a mapping
    ``{canonical_name: csv_column}``.  Blank cells and ``NaN`` literals are
    missing; sentinel codes such as -999 must be mapped beforehand.
    """
    schema = dict(schema or {})
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"no such file: {path}")
    ts_col = schema.get("timestamp", "timestamp")
    load_col = schema.get("load", "load")
    covs = schema.get("covariates", {})
    if isinstance(covs, (list, tuple)):
        covs = {c: c for c in covs}

    df = pd.read_csv(path, dtype=str, keep_default_na=False, encoding="utf-8")
    for col in [ts_col, load_col, *covs.values()]:
        if col not in df.columns:
            raise IngestError(f"missing column {col!r} in {path.name}")

    ts = _parse_timestamps(df[ts_col])
    bad = ts.isna().to_numpy()
    if bad.any():
        logger.warning("%s: rejected %d rows with unparseable timestamps", path.name, int(bad.sum()))

    def numeric(col):
        # python float() is correctly rounded; pandas' fast parser is not
        return np.array([_cell(v) for v in df[col]], dtype=float)[~bad]

    keep_ts = ts.to_numpy()[~bad].astype("datetime64[s]")
    # stable sort keeps file order among duplicates so first-wins holds
    order = np.argsort(keep_ts, kind="stable")
    table_ts = keep_ts[order]
    if np.any(table_ts != table_ts.astype("datetime64[h]")):
        raise IngestError("timestamps are not aligned to whole hours")
    table = SeriesTable(
        table_ts,
        numeric(load_col)[order],
        {name: numeric(col)[order] for name, col in covs.items()},
    )
    return regularize_hourly(table)


def regularize_hourly(t: SeriesTable) -> SeriesTable:
    """Collapse duplicate hours (first wins) and insert missing rows for gaps."""
    if len(t) == 0:
        return t
    ts = t.timestamps
    steps = np.diff(ts)
    if np.any(steps < np.timedelta64(0, "h")):
        raise IngestError("timestamps must be non-decreasing before regularization")
    keep = np.concatenate([[True], steps > np.timedelta64(0, "h")])
    ts = ts[keep]
    full = np.arange(ts[0], ts[-1] + HOUR, HOUR)
    pos = (ts - ts[0]).astype(int)

    def spread(col):
        out = np.full(len(full), np.nan)
        out[pos] = col[keep]
        return out

    return SeriesTable(full, spread(t.load), {k: spread(v) for k, v in t.covariates.items()})


def mask_zero_load(t: SeriesTable) -> SeriesTable:
    """Treat exact zeros in the load column as missing readings."""
    return t.replace(load=np.where(t.zero_flags, np.nan, t.load))


def to_csv(t: SeriesTable, path) -> None:
    """Write the canonical ``timestamp,load,<covariates>`` CSV (blank = missing)."""

    def fmt(v):
        return "" if np.isnan(v) else repr(float(v))

    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(",".join(["timestamp", "load", *t.covariates]) + "\n")
        cols = [t.load, *t.covariates.values()]
        for i, stamp in enumerate(t.timestamps.astype("datetime64[s]")):
            fh.write(",".join([str(stamp), *(fmt(c[i]) for c in cols)]) + "\n")


@dataclass(frozen=True)
class SplitSpec:
    test_fraction: float = 0.25

    def __post_init__(self):
        if not 0.0 < self.test_fraction < 1.0:
            raise ValueError("test_fraction must lie in (0, 1)")

    def boundary_index(self, n: int) -> int:
        raw = math.floor((1 - Fraction(repr(self.test_fraction))) * n)
        return raw - raw % 24


def split_train_test(t: SeriesTable, s: SplitSpec) -> tuple[SeriesTable, SeriesTable]:
    if not t.is_regular():
        raise IngestError("split requires a regular hourly table")
    n = len(t)
    b = s.boundary_index(n)
    if b < MIN_DAYS * 24 or (n - b) < MIN_DAYS * 24:
        raise IngestError(
            f"split at {b} of {n} hours leaves fewer than {MIN_DAYS} full days in a part"
        )
    return t.slice(0, b), t.slice(b, n)
