"""Statistical kernels shared by the other modules.

All returns are simple (arithmetic) annual returns so that portfolio return
stays linear in the weights.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .errors import DataValidationError
from .ingest import AssetRecord, MarketSeries


@dataclass(frozen=True)
class ReturnPanel:
    """Aligned annual returns, one row per year and one column per asset.

    ``years`` labels the end year of each return, so a panel built from
    prices over 1999-2023 has years 2000-2023.
    """

    years: tuple[int, ...]
    tickers: tuple[str, ...]
    asset_returns: np.ndarray
    market_returns: np.ndarray

    def __post_init__(self):
        a = np.array(self.asset_returns, dtype=float, copy=True)
        m = np.array(self.market_returns, dtype=float, copy=True)
        if a.ndim != 2 or a.shape != (len(self.years), len(self.tickers)):
            raise DataValidationError(
                f"asset_returns shape {a.shape} != ({len(self.years)}, {len(self.tickers)})"
            )
        if m.shape != (len(self.years),):
            raise DataValidationError("market_returns length differs from years")
        if np.any(a <= -1.0) or np.any(m <= -1.0):
            raise DataValidationError("returns must exceed -1")
        a.flags.writeable = False
        m.flags.writeable = False
        object.__setattr__(self, "asset_returns", a)
        object.__setattr__(self, "market_returns", m)

    @classmethod
    def from_assets(
        cls, assets: Sequence[AssetRecord], market: MarketSeries, span: tuple[int, int]
    ) -> "ReturnPanel":
        start, end = span
        if end - start < 1:
            raise DataValidationError("a return panel needs at least two price years")
        years = tuple(range(start + 1, end + 1))
        cols = []
        for asset in assets:
            if not asset.covers(start, end):
                raise DataValidationError(f"{asset.ticker} does not cover {start}-{end}")
            r = simple_returns({y: asset.prices[y] for y in range(start, end + 1)})
            cols.append([r[y] for y in years])
        mkt = simple_returns({y: market.index_levels[y] for y in range(start, end + 1)})
        return cls(
            years=years,
            tickers=tuple(a.ticker for a in assets),
            asset_returns=np.array(cols, dtype=float).T.reshape(len(years), len(assets)),
            market_returns=np.array([mkt[y] for y in years]),
        )


def simple_returns(series: Mapping[int, float]) -> dict[int, float]:
    """Year-over-year simple returns, keyed by the later year."""
    years = sorted(series)
    if len(years) < 2:
        raise DataValidationError("need at least 2 observations for a return")
    return {b: series[b] / series[a] - 1.0 for a, b in zip(years, years[1:])}


def cagr(start_price: float, end_price: float, years: int) -> float:
    """Compound annual growth rate ``(end/start)**(1/years) - 1``."""
    if start_price <= 0 or end_price <= 0:
        raise DataValidationError("CAGR needs positive prices")
    if years < 1 or int(years) != years:
        raise DataValidationError(f"CAGR needs a positive whole number of years, got {years}")
    return (end_price / start_price) ** (1.0 / years) - 1.0


def mean_vector(panel: ReturnPanel) -> np.ndarray:
    """Column means of the asset returns (expected return per asset)."""
    if len(panel.years) == 0:
        raise DataValidationError("empty return panel")
    return panel.asset_returns.mean(axis=0)


def covariance_matrix(panel: ReturnPanel) -> np.ndarray:
    """Sample covariance of asset returns with an ``n - 1`` denominator.

    The result is symmetrised so ``C == C.T`` holds bitwise.
    """
    n = len(panel.years)
    if n < 2:
        raise DataValidationError("covariance needs at least 2 years")
    x = panel.asset_returns - panel.asset_returns.mean(axis=0)
    c = (x.T @ x) / (n - 1)
    return (c + c.T) / 2.0


def percentile(values: Sequence[float], p: float) -> float:
    """Percentile by linear interpolation between order statistics.

    With sorted values ``v`` and ``h = p * (n - 1)`` the result is
    ``v[floor(h)] + (h - floor(h)) * (v[floor(h) + 1] - v[floor(h)])``.
    """
    v = sorted(float(x) for x in values)
    if not v:
        raise DataValidationError("percentile of empty sequence")
    if not (0.0 <= p <= 1.0):
        raise DataValidationError(f"percentile level {p} outside [0, 1]")
    h = p * (len(v) - 1)
    lo = math.floor(h)
    if lo >= len(v) - 1:
        return v[-1]
    return v[lo] + (h - lo) * (v[lo + 1] - v[lo])


def excess_over_market(asset_cagr: float, market_cagr: float) -> float:
    return asset_cagr - market_cagr


def annual_volatility(returns: Sequence[float]) -> float:
    """Sample standard deviation (``n - 1``) of a return series."""
    r = np.asarray(returns, dtype=float)
    if r.size < 2:
        raise DataValidationError("volatility needs at least 2 returns")
    return float(np.std(r, ddof=1))
