"""Screening of the loaded assets into the investable universe."""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np
from scipy.stats import rankdata

from .analytics import cagr, excess_over_market
from .errors import ConfigError, DataValidationError
from .ingest import CAP_CLASSES, AssetRecord, MarketSeries

RANKING_METRICS = ("long_cagr", "short_cagr", "excess_over_market")


@dataclass(frozen=True)
class ScreeningConfig:
    """Screening parameters.

    ``min_env_score`` is an exclusive lower bound. ``long_years=None`` uses
    every year the assets and the index share; ``short_years`` is the
    trailing window of the short-horizon CAGR.
    """

    min_env_score: float = 35.0
    quota: Mapping[str, int] = field(
        default_factory=lambda: {"large": 15, "mid": 6, "small": 4}
    )
    ranking_metrics: tuple[str, ...] = RANKING_METRICS
    long_years: int | None = None
    short_years: int = 3

    def __post_init__(self):
        if not (0.0 <= self.min_env_score <= 100.0):
            raise ConfigError(f"min_env_score {self.min_env_score} outside [0, 100]")
        for cls, n in self.quota.items():
            if cls not in CAP_CLASSES:
                raise ConfigError(f"unknown cap class {cls!r} in quota")
            if n < 0:
                raise ConfigError(f"quota for {cls} is negative")
        unknown = [m for m in self.ranking_metrics if m not in RANKING_METRICS]
        if unknown or not self.ranking_metrics:
            raise ConfigError(f"ranking_metrics must be drawn from {RANKING_METRICS}")
        if self.short_years < 1 or (self.long_years is not None and self.long_years < 1):
            raise ConfigError("CAGR horizons must be at least one year")

    @property
    def total(self) -> int:
        return sum(self.quota.values())


@dataclass(frozen=True)
class UniverseSummary:
    count: int
    per_class: Mapping[str, int]
    mean_env_score: float
    sector_count: int | None


def _common_end(assets: Sequence[AssetRecord], market: MarketSeries) -> tuple[int, int]:
    years = set(market.years)
    for a in assets:
        years &= set(a.years)
    if not years:
        raise DataValidationError("assets and market index share no year")
    return min(years), max(years)


def asset_metrics(
    asset: AssetRecord, market: MarketSeries, config: ScreeningConfig, end: int, start: int
) -> dict[str, float]:
    """Long and short horizon CAGRs and long-horizon excess over the index."""
    long_n = config.long_years if config.long_years is not None else end - start
    if long_n < 1 or config.short_years > end - start or long_n > end - start:
        raise DataValidationError(
            f"CAGR horizons ({long_n}, {config.short_years}) exceed the {end - start} common years"
        )
    p = asset.prices
    m = market.index_levels
    long_cagr = cagr(p[end - long_n], p[end], long_n)
    return {
        "long_cagr": long_cagr,
        "short_cagr": cagr(p[end - config.short_years], p[end], config.short_years),
        "excess_over_market": excess_over_market(long_cagr, cagr(m[end - long_n], m[end], long_n)),
    }


def screen(
    assets: Sequence[AssetRecord],
    config: ScreeningConfig,
    market: MarketSeries,
) -> tuple[AssetRecord, ...]:
    """Filter by environmental score, then fill each cap-class quota.

    Within a class, assets are ordered by the mean of their per-metric ranks
    (rank 1 is the best value of a metric, ties share the average rank).
    Remaining ties go to the higher env_score and then to the smaller ticker.
    Output is grouped by class in ``large, mid, small`` order, best first.
    """
    eligible = [a for a in assets if a.env_score > config.min_env_score]
    shortfall = {}
    for cls, n in config.quota.items():
        have = sum(a.cap_class == cls for a in eligible)
        if have < n:
            shortfall[cls] = (have, n)
    if shortfall:
        detail = ", ".join(f"{c}: {h} available < {n} required" for c, (h, n) in shortfall.items())
        raise DataValidationError(f"quota shortfall ({detail})")
    if not eligible:
        return ()

    start, end = _common_end(eligible, market)
    selected: list[AssetRecord] = []
    for cls in CAP_CLASSES:
        want = config.quota.get(cls, 0)
        group = [a for a in eligible if a.cap_class == cls]
        if want == 0 or not group:
            continue
        table = np.array(
            [[asset_metrics(a, market, config, end, start)[m] for m in config.ranking_metrics]
             for a in group]
        )
        ranks = np.column_stack([rankdata(-table[:, j], method="average")
                                 for j in range(table.shape[1])])
        composite = ranks.mean(axis=1)
        order = sorted(range(len(group)),
                       key=lambda i: (composite[i], -group[i].env_score, group[i].ticker))
        selected.extend(group[i] for i in order[:want])
    return tuple(selected)


def universe_summary(selected: Sequence[AssetRecord]) -> UniverseSummary:
    if not selected:
        raise DataValidationError("empty selection")
    counts = Counter(a.cap_class for a in selected)
    sectors = {a.sector for a in selected if a.sector is not None}
    return UniverseSummary(
        count=len(selected),
        per_class={c: counts.get(c, 0) for c in CAP_CLASSES},
        mean_env_score=float(np.mean([a.env_score for a in selected])),
        sector_count=len(sectors) if sectors else None,
    )
