import numpy as np
import pytest

from loadbench.ingest import SeriesTable


def hourly(n, start="2020-01-01T00"):
    return np.datetime64(start, "h") + np.arange(n).astype("timedelta64[h]")


def make_table(load, temp=None, start="2020-01-01T00"):
    load = np.asarray(load, dtype=float)
    covs = {} if temp is None else {"airTemperature": np.asarray(temp, dtype=float)}
    return SeriesTable(hourly(len(load), start), load, covs)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
