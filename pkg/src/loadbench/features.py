"""Day-ahead design matrix: same-hour lags, calendar one-hots, temperature coupling."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .ingest import SeriesTable

N_LAGS = 7
HOURS, WEEKDAYS, MONTHS = 24, 7, 12
ONEHOT_DIM = HOURS + WEEKDAYS + MONTHS  # 43
TEMP_POWERS = 3


class FeatureError(ValueError):
    pass


@dataclass(frozen=True)
class CalendarVector:
    hour: int
    weekday: int
    month: int

    def __post_init__(self):
        if not (0 <= self.hour < HOURS and 0 <= self.weekday < WEEKDAYS and 1 <= self.month <= MONTHS):
            raise FeatureError(f"calendar field out of range: {self}")


def calendar_fields(timestamps) -> np.ndarray:
    """(n, 3) integer array of hour, weekday (Monday=0) and month."""
    ts = np.asarray(timestamps).astype("datetime64[h]")
    hours = ts.astype(np.int64)
    days = ts.astype("datetime64[D]")
    hour = hours % 24
    # 1970-01-01 was a Thursday
    weekday = (days.astype(np.int64) + 3) % 7
    month = ts.astype("datetime64[M]").astype(np.int64) % 12 + 1
    return np.column_stack([hour, weekday, month]).astype(np.int64)


def onehot(c: CalendarVector) -> np.ndarray:
    v = np.zeros(ONEHOT_DIM)
    v[c.hour] = 1.0
    v[HOURS + c.weekday] = 1.0
    v[HOURS + WEEKDAYS + c.month - 1] = 1.0
    return v


def onehot_matrix(cal: np.ndarray) -> np.ndarray:
    n = len(cal)
    out = np.zeros((n, ONEHOT_DIM))
    rows = np.arange(n)
    out[rows, cal[:, 0]] = 1.0
    out[rows, HOURS + cal[:, 1]] = 1.0
    out[rows, HOURS + WEEKDAYS + cal[:, 2] - 1] = 1.0
    return out


def temp_powers(temperature) -> np.ndarray:
    t = np.asarray(temperature, dtype=float)
    return np.stack([t, t**2, t**3], axis=-1)


def couple(onehot_vec, temperature) -> np.ndarray:
    """Entry ``i*3 + p`` is ``onehot[i] * T**(p+1)``; works row-wise on matrices."""
    if not np.all(np.isfinite(temperature)):
        raise FeatureError("temperature must be finite")
    oh = np.asarray(onehot_vec, dtype=float)
    powers = temp_powers(temperature)
    prod = oh[..., :, None] * powers[..., None, :]
    return prod.reshape(*oh.shape[:-1], oh.shape[-1] * TEMP_POWERS)


@dataclass(frozen=True)
class DayAheadMatrix:
    timestamps: np.ndarray
    lag_block: np.ndarray
    calendar_block: np.ndarray
    temp_block: np.ndarray
    coupled_block: np.ndarray
    target: np.ndarray
    mode: str = "coupled"

    def __len__(self) -> int:
        return len(self.target)

    @property
    def context_block(self) -> np.ndarray:
        """Calendar, temperature and coupled columns (everything but the lags)."""
        return np.hstack([self.calendar_block, self.temp_block, self.coupled_block])

    @property
    def X(self) -> np.ndarray:
        return np.hstack([self.lag_block, self.context_block])

    @property
    def width(self) -> int:
        return self.X.shape[1]

    def take(self, rows) -> "DayAheadMatrix":
        return DayAheadMatrix(
            self.timestamps[rows],
            self.lag_block[rows],
            self.calendar_block[rows],
            self.temp_block[rows],
            self.coupled_block[rows],
            self.target[rows],
            self.mode,
        )

    def split_at(self, timestamp) -> tuple["DayAheadMatrix", "DayAheadMatrix"]:
        before = self.timestamps < np.datetime64(timestamp, "h")
        return self.take(before), self.take(~before)


def build_day_ahead(
    t: SeriesTable,
    use_coupling: bool = True,
    use_raw_calendar: bool = True,
    temperature_column: str | None = "airTemperature",
) -> DayAheadMatrix:
    """One row per hour from day 7 on, with the 7 same-hour lags d-7..d-1.

    With coupling the calendar enters one-hot, temperature as T, T^2, T^3 and
    their 129 products.  Without it the calendar enters as raw integers (when
    ``use_raw_calendar``) alongside the raw temperature.
    """
    n = len(t)
    if n < (N_LAGS + 1) * 24:
        raise FeatureError(f"need at least {(N_LAGS + 1) * 24} hours, got {n}")
    load = np.asarray(t.load, dtype=float)
    if not np.all(np.isfinite(load)):
        raise FeatureError("load must be complete; impute first")
    temp = None
    if temperature_column and temperature_column in t.covariates:
        temp = np.asarray(t.covariates[temperature_column], dtype=float)
        if not np.all(np.isfinite(temp)):
            raise FeatureError("temperature must be complete; impute first")

    idx = np.arange(N_LAGS * 24, n)
    lag_idx = idx[:, None] - 24 * np.arange(N_LAGS, 0, -1)[None, :]
    lags = load[lag_idx]
    cal = calendar_fields(t.timestamps[idx])
    m = len(idx)
    empty = np.zeros((m, 0))

    if use_coupling:
        calendar = onehot_matrix(cal)
        if temp is None:
            tb, cb = empty, empty
        else:
            tb = temp_powers(temp[idx])
            cb = couple(calendar, temp[idx])
        mode = "coupled"
    else:
        calendar = cal.astype(float) if use_raw_calendar else empty
        tb = empty if temp is None else temp[idx][:, None]
        cb = empty
        mode = "raw" if use_raw_calendar else "lags"

    return DayAheadMatrix(t.timestamps[idx], lags, calendar, tb, cb, load[idx], mode)


def acf(series, max_lag: int) -> np.ndarray:
    """Sample autocorrelations for lags 0..max_lag (biased 1/n autocovariance)."""
    x = np.asarray(series, dtype=float)
    n = len(x)
    if n <= max_lag:
        raise FeatureError("series must be longer than max_lag")
    xc = x - x.mean()
    var = np.dot(xc, xc) / n
    if var == 0:
        raise FeatureError("acf undefined for a constant series")
    out = np.array([np.dot(xc[: n - lag], xc[lag:]) / n for lag in range(max_lag + 1)])
    return out / var


def pacf(series, max_lag: int) -> np.ndarray:
    """Partial autocorrelations via the Durbin-Levinson recursion; ``pacf[0] = 1``."""
    r = acf(series, max_lag)
    out = np.zeros(max_lag + 1)
    out[0] = 1.0
    if max_lag == 0:
        return out
    phi = np.array([r[1]])
    out[1] = r[1]
    v = 1.0 - r[1] ** 2
    for k in range(2, max_lag + 1):
        if v <= 1e-12:
            raise FeatureError(f"Toeplitz system numerically singular at lag {k}")
        a = (r[k] - np.dot(phi, r[k - 1 : 0 : -1])) / v
        phi = np.concatenate([phi - a * phi[::-1], [a]])
        out[k] = a
        v *= 1.0 - a**2
    return out


def acf_pacf_csv(series, max_lag: int, path) -> None:
    a, p = acf(series, max_lag), pacf(series, max_lag)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("lag,acf,pacf\n")
        for lag in range(max_lag + 1):
            fh.write(f"{lag},{float(a[lag])!r},{float(p[lag])!r}\n")
