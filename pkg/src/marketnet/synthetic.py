"""Deterministic synthetic close-price panels for tests and demos.

Returns follow a one-factor market model with sector factors and GARCH(1,1)
idiosyncratic noise.  An index ticker (``MXX``) tracks the cap-weighted
average, one ticker lists late and a few prices are missing at random.
"""
from __future__ import annotations

from importlib import resources
from pathlib import Path
from typing import Sequence

import numpy as np
import pandas as pd

INDEX_TICKER = "MXX"
INDEX_SECTOR = "IPC Index"

#: (ticker, sector, market beta, sector loading)
DEFAULT_UNIVERSE = (
    ("ALFA", "Industry", 0.9, 0.8),
    ("GCARSO", "Industry", 0.8, 0.8),
    ("ICH", "Industry", 0.7, 0.8),
    ("GFNORTE", "Financial services", 1.1, 0.9),
    ("GFINBUR", "Financial services", 1.0, 0.9),
    ("BBAJIO", "Financial services", 0.9, 0.9),
    ("WALMEX", "Basic consumption", 0.7, 0.7),
    ("FEMSA", "Basic consumption", 0.8, 0.7),
    ("BIMBO", "Basic consumption", 0.6, 0.7),
    ("AMX", "Telecommunications", 1.0, 0.0),
    ("CEMEX", "Materials", 1.2, 0.0),
)
LATE_TICKER = ("LATE", "Health", 0.8, 0.0)

FIXTURE_NAME = "synthetic_3y.csv"


def _garch_noise(rng: np.random.Generator, T: int, omega: float, alpha: float, beta: float) -> np.ndarray:
    out = np.empty(T)
    h = omega / (1.0 - alpha - beta)
    e = 0.0
    for t in range(T):
        h = omega + alpha * e * e + beta * h
        e = np.sqrt(h) * rng.standard_normal()
        out[t] = e
    return out


def synthetic_prices(
    years: Sequence[int] = (2004, 2005, 2006),
    seed: int = 0,
    universe: Sequence[tuple] = DEFAULT_UNIVERSE,
    missing_rate: float = 0.004,
    late_listing: bool = True,
) -> pd.DataFrame:
    """Long-format frame with columns ``date, ticker, close, sector``.

    The same arguments always give the same frame.
    """
    rng = np.random.default_rng(seed)
    years = sorted(years)
    dates = pd.bdate_range(f"{years[0]}-01-01", f"{years[-1]}-12-31")
    dates = dates[dates.year.isin(years)]
    T = len(dates)
    uni = list(universe) + ([LATE_TICKER] if late_listing else [])
    sectors = sorted({u[1] for u in uni})

    market = 0.0003 + _garch_noise(rng, T, 2e-6, 0.08, 0.90)
    sector_f = {s: _garch_noise(rng, T, 5e-6, 0.05, 0.90) for s in sectors}
    rets = np.empty((T, len(uni)))
    for k, (_, sec, b, g) in enumerate(uni):
        rets[:, k] = b * market + g * sector_f[sec] + _garch_noise(rng, T, 1.5e-6, 0.06, 0.90)
    weights = rng.uniform(0.5, 1.5, size=len(uni))
    weights /= weights.sum()
    index_ret = rets @ weights + 2e-3 * rng.standard_normal(T)

    tickers = [u[0] for u in uni] + [INDEX_TICKER]
    secs = [u[1] for u in uni] + [INDEX_SECTOR]
    all_rets = np.column_stack([rets, index_ret])
    start = rng.uniform(20.0, 200.0, size=len(tickers))
    prices = start * np.exp(np.cumsum(all_rets, axis=0))

    present = rng.random(prices.shape) >= missing_rate
    present[:, -1] = True
    if late_listing:
        k = len(uni) - 1
        # lists in the middle year, so it fails completeness before that
        mid = np.searchsorted(dates.year, years[len(years) // 2])
        present[: mid + T // (4 * len(years)), k] = False

    rows = []
    for j, (t, s) in enumerate(zip(tickers, secs)):
        idx = np.flatnonzero(present[:, j])
        rows.append(pd.DataFrame({"date": dates[idx].strftime("%Y-%m-%d"), "ticker": t,
                                  "close": np.round(prices[idx, j], 6), "sector": s}))
    df = pd.concat(rows, ignore_index=True)
    return df.sort_values(["date", "ticker"], kind="stable").reset_index(drop=True)


def write_synthetic(path: str | Path, **kwargs) -> Path:
    path = Path(path)
    synthetic_prices(**kwargs).to_csv(path, index=False, float_format="%.6f", lineterminator="\n")
    return path


def fixture_path() -> Path:
    """Path of the bundled 3-year fixture (2004-2006, seed 0)."""
    return Path(str(resources.files("marketnet") / "data" / FIXTURE_NAME))
