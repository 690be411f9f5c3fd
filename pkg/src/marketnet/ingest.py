"""Price loading, log returns and the two-stage yearly stock filter."""
from __future__ import annotations

import datetime as dt
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np
import pandas as pd
from numpy.lib.stride_tricks import sliding_window_view

logger = logging.getLogger(__name__)

SECTORS = (
    "Energy",
    "Industry",
    "IPC Index",
    "Materials",
    "Basic consumption",
    "Health",
    "Telecommunications",
    "Financial services",
    "Non-basic consumption",
    "Information technologies",
)
UNKNOWN_SECTOR = "unknown"

DEFAULT_SCHEMA = {"date": "date", "ticker": "ticker", "close": "close", "sector": "sector"}

_SECTOR_LOOKUP = {s.lower(): s for s in SECTORS}


@dataclass(frozen=True)
class PricePanel:
    """Date x ticker close prices; NaN marks a missing quote."""

    dates: np.ndarray
    tickers: list[str]
    prices: np.ndarray
    sectors: dict[str, str]
    dropped_rows: int = 0

    def __post_init__(self):
        if self.prices.shape != (len(self.dates), len(self.tickers)):
            raise ValueError("prices shape does not match dates x tickers")
        if len(self.dates) > 1 and not np.all(np.diff(self.dates) > np.timedelta64(0, "D")):
            raise ValueError("dates must be strictly increasing")
        finite = self.prices[np.isfinite(self.prices)]
        if finite.size and finite.min() <= 0:
            raise ValueError("prices must be strictly positive")

    def dates_in(self, window) -> np.ndarray:
        start, end = _window_bounds(window)
        return (self.dates >= start) & (self.dates <= end)


@dataclass(frozen=True)
class ReturnsPanel:
    """Aligned T x n matrix of log returns with no missing entries."""

    dates: np.ndarray
    tickers: list[str]
    returns: np.ndarray
    sectors: dict[str, str] = field(default_factory=dict)

    def __post_init__(self):
        if self.returns.shape != (len(self.dates), len(self.tickers)):
            raise ValueError("returns shape does not match dates x tickers")
        if not np.all(np.isfinite(self.returns)):
            raise ValueError("returns panel has missing entries")

    @property
    def T(self) -> int:
        return self.returns.shape[0]

    @property
    def n(self) -> int:
        return self.returns.shape[1]

    def select(self, tickers: Sequence[str]) -> "ReturnsPanel":
        idx = [self.tickers.index(t) for t in tickers]
        return ReturnsPanel(
            self.dates,
            list(tickers),
            self.returns[:, idx],
            {t: self.sectors.get(t, UNKNOWN_SECTOR) for t in tickers},
        )

    def to_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            fh.write(",".join(["date", *self.tickers]) + "\n")
            for d, row in zip(self.dates, self.returns):
                fh.write(str(d) + "," + ",".join(f"{v:.17g}" for v in row) + "\n")

    @classmethod
    def from_csv(cls, path: str | Path, sectors: Mapping[str, str] | None = None) -> "ReturnsPanel":
        df = pd.read_csv(path, dtype={"date": str}, float_precision="round_trip")
        if df.columns[0] != "date":
            raise ValueError(f"{path}: first column must be 'date'")
        tickers = [str(c) for c in df.columns[1:]]
        dates = np.array(df["date"].to_numpy(), dtype="datetime64[D]")
        sec = {t: (sectors or {}).get(t, UNKNOWN_SECTOR) for t in tickers}
        return cls(dates, tickers, df.iloc[:, 1:].to_numpy(dtype=float), sec)


@dataclass
class YearWindow:
    """Filtered returns for one calendar year; ``returns`` is None when flagged."""

    year: int
    returns: ReturnsPanel | None
    status: str = "ok"
    message: str = ""
    n_candidates: int = 0

    @property
    def flagged(self) -> bool:
        return self.status != "ok"


def _window_bounds(window) -> tuple[np.datetime64, np.datetime64]:
    start, end = window
    start, end = np.datetime64(start, "D"), np.datetime64(end, "D")
    if end < start:
        raise ValueError(f"empty window {start}..{end}")
    return start, end


def normalize_sector(label) -> str:
    if label is None or (isinstance(label, float) and np.isnan(label)):
        return UNKNOWN_SECTOR
    key = str(label).strip().lower()
    if key in ("", UNKNOWN_SECTOR):
        return UNKNOWN_SECTOR
    if key not in _SECTOR_LOOKUP:
        logger.warning("unrecognised sector label %r mapped to %r", label, UNKNOWN_SECTOR)
        return UNKNOWN_SECTOR
    return _SECTOR_LOOKUP[key]


def load_prices(path: str | Path, schema: Mapping[str, str] | None = None) -> PricePanel:
    """Read a long-format close-price CSV into a :class:`PricePanel`.

    Rows whose date does not parse, or whose close is missing or not strictly
    positive, are dropped and counted in ``dropped_rows``.  Repeated
    ``(date, ticker)`` rows are merged when their prices agree.

    Parameters
    ----------
    path
        CSV file with a header row.
    schema
        Column-name overrides for ``date``, ``ticker``, ``close`` and the
        optional ``sector`` column.

    Raises
    ------
    ValueError
        If the file cannot be parsed, holds no valid row, lacks a required
        column, or repeats a ``(date, ticker)`` pair with different prices.
    """
    cols = {**DEFAULT_SCHEMA, **(schema or {})}
    try:
        raw = pd.read_csv(path, dtype=str, keep_default_na=False)
    except pd.errors.EmptyDataError:
        raise ValueError(f"{path}: zero valid rows") from None
    except (OSError, pd.errors.ParserError) as exc:
        raise ValueError(f"cannot read {path}: {exc}") from exc
    missing = [cols[k] for k in ("date", "ticker", "close") if cols[k] not in raw.columns]
    if missing:
        raise ValueError(f"{path}: missing columns {missing}")

    dates = pd.to_datetime(raw[cols["date"]].str.strip(), errors="coerce", format="ISO8601")
    close = pd.to_numeric(raw[cols["close"]].str.strip(), errors="coerce")
    ticker = raw[cols["ticker"]].str.strip()
    ok = dates.notna() & close.notna() & (close > 0) & np.isfinite(close) & (ticker != "")
    dropped = int((~ok).sum())
    if dropped:
        logger.info("%s: dropped %d invalid rows", path, dropped)
    df = pd.DataFrame({"date": dates[ok].dt.normalize(), "ticker": ticker[ok], "close": close[ok]})
    if cols["sector"] in raw.columns:
        df["sector"] = raw.loc[ok, cols["sector"]].str.strip()
    if df.empty:
        raise ValueError(f"{path}: zero valid rows")

    spread = df.groupby(["date", "ticker"])["close"].agg(["min", "max"])
    conflicts = spread[spread["min"] != spread["max"]]
    if len(conflicts):
        d, t = conflicts.index[0]
        raise ValueError(
            f"{path}: {len(conflicts)} duplicate (date, ticker) pairs with conflicting prices, "
            f"first at ({d.date()}, {t})"
        )
    df = df.drop_duplicates(subset=["date", "ticker"])

    wide = df.pivot(index="date", columns="ticker", values="close").sort_index()
    wide = wide.reindex(sorted(wide.columns), axis=1)
    tickers = [str(t) for t in wide.columns]
    sectors = {t: UNKNOWN_SECTOR for t in tickers}
    if "sector" in df.columns:
        first = df.dropna(subset=["sector"]).groupby("ticker")["sector"].first()
        for t, lab in first.items():
            sectors[str(t)] = normalize_sector(lab)
    return PricePanel(
        dates=wide.index.to_numpy().astype("datetime64[D]"),
        tickers=tickers,
        prices=wide.to_numpy(dtype=float),
        sectors=sectors,
        dropped_rows=dropped,
    )


def log_returns(panel: PricePanel, window, tickers: Sequence[str] | None = None) -> ReturnsPanel:
    """Log returns inside ``window = (start, end)`` (inclusive).

    For each ticker a return ``log(S_next / S_prev)`` is formed between
    consecutive dates on which it has a price and is dated at the later one.
    Gaps are never filled, so a date on which any selected ticker lacks a
    return is dropped from the aligned panel.
    """
    start, end = _window_bounds(window)
    if len(panel.dates) == 0 or end < panel.dates[0] or start > panel.dates[-1]:
        raise ValueError(f"window {start}..{end} lies outside the panel date range")
    tickers = list(panel.tickers if tickers is None else tickers)
    idx = [panel.tickers.index(t) for t in tickers]
    mask = panel.dates_in((start, end))
    dates = panel.dates[mask]
    prices = panel.prices[mask][:, idx]

    rets = np.full(prices.shape, np.nan)
    for k in range(prices.shape[1]):
        present = np.flatnonzero(np.isfinite(prices[:, k]))
        if present.size > 1:
            lp = np.log(prices[present, k])
            rets[present[1:], k] = np.diff(lp)
    keep = np.all(np.isfinite(rets), axis=1) if tickers else np.zeros(len(dates), bool)
    if not keep.any():
        raise ValueError(f"window {start}..{end} yields no aligned returns")
    return ReturnsPanel(
        dates=dates[keep],
        tickers=tickers,
        returns=rets[keep],
        sectors={t: panel.sectors.get(t, UNKNOWN_SECTOR) for t in tickers},
    )


def filter_completeness(panel: PricePanel, window, min_fraction: float = 0.90) -> list[str]:
    """Tickers quoted on strictly more than ``min_fraction`` of the window's dates."""
    if not 0.0 < min_fraction <= 1.0:
        raise ValueError("min_fraction must lie in (0, 1]")
    mask = panel.dates_in(window)
    n_dates = int(mask.sum())
    if n_dates == 0:
        return []
    counts = np.isfinite(panel.prices[mask]).sum(axis=0)
    return [t for t, c in zip(panel.tickers, counts) if c > min_fraction * n_dates]


def filter_min_variance(returns: ReturnsPanel, window_len: int = 30, min_var: float = 1e-10) -> list[str]:
    """Drop tickers with any ``window_len``-long stretch of sample variance below ``min_var``."""
    if min_var < 0:
        raise ValueError("min_var must be non-negative")
    if window_len < 2:
        raise ValueError("window_len must be at least 2")
    if returns.T < window_len:
        raise ValueError(f"window too short: T={returns.T} < window_len={window_len}")
    blocks = sliding_window_view(returns.returns, window_len, axis=0)
    rolling_var = blocks.var(axis=-1, ddof=1)
    ok = np.all(rolling_var >= min_var, axis=0)
    return [t for t, keep in zip(returns.tickers, ok) if keep]


def yearly_windows(
    panel: PricePanel,
    years: Iterable[int],
    min_fraction: float = 0.90,
    window_len: int = 30,
    min_var: float = 1e-10,
    min_tickers: int = 3,
) -> list[YearWindow]:
    """Apply the completeness then variance filter to each calendar year.

    Years without data, with too short a return series, or with fewer than
    ``min_tickers`` survivors are returned flagged instead of raising.
    """
    out = []
    for year in years:
        window = (dt.date(year, 1, 1), dt.date(year, 12, 31))
        candidates = filter_completeness(panel, window, min_fraction)
        if not candidates:
            out.append(YearWindow(year, None, "empty", "no ticker passes the completeness filter"))
            continue
        survivors = candidates
        try:
            # re-align on the survivors so dropped tickers do not cost dates;
            # survivor sets only shrink, so this terminates
            while survivors:
                rets = log_returns(panel, window, survivors)
                kept = filter_min_variance(rets, window_len, min_var)
                if kept == survivors:
                    break
                survivors = kept
        except ValueError as exc:
            out.append(YearWindow(year, None, "empty", str(exc), len(candidates)))
            continue
        if len(survivors) < min_tickers:
            out.append(
                YearWindow(year, None, "too_few_tickers",
                           f"{len(survivors)} tickers survive filtering (< {min_tickers})", len(candidates))
            )
            continue
        out.append(YearWindow(year, rets, "ok", "", len(candidates)))
    return out
