"""Seeded synthetic hourly load with a calendar-dependent temperature response."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field

import numpy as np

from .features import calendar_fields
from .ingest import SeriesTable


@dataclass(frozen=True)
class SynthSpec:
    """Generator parameters.

    Load is ``base * (1 + daily + weekly) + weekday_factor * V(T) + noise``
    where ``V`` is V-shaped around ``temp_ref`` with separate heating and
    cooling slopes (load units per degree).
    """

    n_hours: int = 24 * 730
    start: str = "2014-01-01T00:00"
    base: float = 1000.0
    daily_amp: float = 0.1
    weekly_amp: float = 0.05
    temp_mean: float = 15.0
    temp_annual_amp: float = 10.0
    temp_daily_amp: float = 4.0
    temp_noise: float = 2.0
    temp_persistence: float = 0.98
    temp_ref: float = 18.0
    heating_slope: float = 20.0
    cooling_slope: float = 30.0
    weekday_factors: tuple = (1.0, 1.0, 1.0, 1.0, 1.0, 0.6, 0.4)
    hour_factor_amp: float = 0.0
    noise: float = 0.02
    missing_rate: float = 0.0
    temperature_column: str = "airTemperature"

    @classmethod
    def from_json(cls, text: str) -> "SynthSpec":
        d = json.loads(text)
        if "weekday_factors" in d:
            d["weekday_factors"] = tuple(d["weekday_factors"])
        return cls(**d)

    def to_dict(self) -> dict:
        return asdict(self)


def flat_spec(**overrides) -> SynthSpec:
    base = dict(daily_amp=0.0, weekly_amp=0.0, heating_slope=0.0, cooling_slope=0.0, noise=0.0)
    base.update(overrides)
    return SynthSpec(**base)


def synth_dataset(spec: SynthSpec = SynthSpec(), seed: int = 0) -> SeriesTable:
    rng = np.random.default_rng(seed)
    n = spec.n_hours
    ts = np.datetime64(spec.start, "h") + np.arange(n).astype("timedelta64[h]")
    cal = calendar_fields(ts)
    hour, weekday = cal[:, 0], cal[:, 1]
    day_of_year = (ts.astype("datetime64[D]") - ts.astype("datetime64[Y]")).astype(int)

    weather = np.empty(n)
    state = 0.0
    shocks = rng.standard_normal(n) * spec.temp_noise * np.sqrt(1 - spec.temp_persistence**2)
    for i in range(n):
        state = spec.temp_persistence * state + shocks[i]
        weather[i] = state
    temp = (
        spec.temp_mean
        - spec.temp_annual_amp * np.cos(2 * np.pi * day_of_year / 365.25)
        + spec.temp_daily_amp * np.sin(2 * np.pi * (hour - 9) / 24)
        + weather
    )

    profile = 1 + spec.daily_amp * np.sin(2 * np.pi * (hour - 6) / 24) + spec.weekly_amp * np.cos(
        2 * np.pi * weekday / 7
    )
    dev = temp - spec.temp_ref
    v_shape = spec.heating_slope * np.maximum(-dev, 0) + spec.cooling_slope * np.maximum(dev, 0)
    factor = np.asarray(spec.weekday_factors, dtype=float)[weekday]
    factor = factor * (1 + spec.hour_factor_amp * np.sin(2 * np.pi * (hour - 3) / 24))
    load = spec.base * profile + factor * v_shape + spec.noise * spec.base * rng.standard_normal(n)

    if spec.missing_rate > 0:
        load = np.where(rng.random(n) < spec.missing_rate, np.nan, load)
    return SeriesTable(ts, load, {spec.temperature_column: temp})
