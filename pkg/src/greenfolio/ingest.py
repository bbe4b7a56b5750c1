"""Loading and validation of the annual input files.

Every series is keyed by calendar year. Prices are year-end closes and are
assumed to be already adjusted for splits and dividends. Loading is
all-or-nothing: a single invalid row fails the whole file.

File schemas (UTF-8, ``.`` decimal separator, no thousands separators)::

    assets.csv     ticker,name,cap_class,env_score,year,close[,sector]
    losses.csv     year,damage_usd_bn
    intensity.csv  year,tco2_per_kusd
    market.csv     year,index_level
"""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from types import MappingProxyType
from typing import Iterable, Mapping, Sequence

from .errors import DataValidationError, DuplicateTickerError, ParseError

logger = logging.getLogger(__name__)

CAP_CLASSES = ("large", "mid", "small")

ASSET_COLUMNS = ("ticker", "name", "cap_class", "env_score", "year", "close")
LOSS_COLUMNS = ("year", "damage_usd_bn")
INTENSITY_COLUMNS = ("year", "tco2_per_kusd")
MARKET_COLUMNS = ("year", "index_level")


def _frozen_years(entries: Mapping[int, float]) -> Mapping[int, float]:
    return MappingProxyType({int(y): float(entries[y]) for y in sorted(entries)})


def _is_contiguous(years: Sequence[int]) -> bool:
    return all(b - a == 1 for a, b in zip(years, years[1:]))


@dataclass(frozen=True)
class AssetRecord:
    """One asset: identity, cap class, environmental score and annual closes."""

    ticker: str
    name: str
    cap_class: str
    env_score: float
    prices: Mapping[int, float]
    sector: str | None = None

    def __post_init__(self):
        object.__setattr__(self, "prices", _frozen_years(self.prices))
        if not self.ticker:
            raise DataValidationError("empty ticker")
        if self.cap_class not in CAP_CLASSES:
            raise DataValidationError(
                f"{self.ticker}: cap_class {self.cap_class!r} not in {CAP_CLASSES}"
            )
        if not (0.0 <= self.env_score <= 100.0):
            raise DataValidationError(
                f"{self.ticker}: env_score {self.env_score} outside [0, 100]"
            )
        if not self.prices:
            raise DataValidationError(f"{self.ticker}: no prices")
        for year, price in self.prices.items():
            if not (price > 0.0 and math.isfinite(price)):
                raise DataValidationError(f"{self.ticker}: price {price} in {year} is not positive")
        if not _is_contiguous(self.years):
            raise DataValidationError(f"{self.ticker}: price years are not contiguous")

    @property
    def years(self) -> tuple[int, ...]:
        return tuple(self.prices)

    def covers(self, start: int, end: int) -> bool:
        return all(y in self.prices for y in range(start, end + 1))


@dataclass(frozen=True)
class LossSeries:
    """Annual total economic damage from natural disasters, USD billions."""

    entries: Mapping[int, float]

    def __post_init__(self):
        object.__setattr__(self, "entries", _frozen_years(self.entries))
        for year, damage in self.entries.items():
            if not (damage >= 0.0 and math.isfinite(damage)):
                raise DataValidationError(f"damage {damage} in {year} is negative")

    @property
    def years(self) -> tuple[int, ...]:
        return tuple(self.entries)

    def __len__(self):
        return len(self.entries)


@dataclass(frozen=True)
class IntensitySeries:
    """Annual CO2 emissions intensity of GDP, tCO2 per 1000 USD."""

    entries: Mapping[int, float]

    def __post_init__(self):
        object.__setattr__(self, "entries", _frozen_years(self.entries))
        for year, value in self.entries.items():
            if not (value > 0.0 and math.isfinite(value)):
                raise DataValidationError(f"intensity {value} in {year} is not positive")

    @property
    def years(self) -> tuple[int, ...]:
        return tuple(self.entries)

    @property
    def last(self) -> float:
        return self.entries[self.years[-1]]

    def __len__(self):
        return len(self.entries)


@dataclass(frozen=True)
class MarketSeries:
    """Year-end levels of the market index."""

    index_levels: Mapping[int, float]

    def __post_init__(self):
        object.__setattr__(self, "index_levels", _frozen_years(self.index_levels))
        for year, level in self.index_levels.items():
            if not (level > 0.0 and math.isfinite(level)):
                raise DataValidationError(f"index level {level} in {year} is not positive")
        if not _is_contiguous(self.years):
            raise DataValidationError("market index years are not contiguous")

    @property
    def years(self) -> tuple[int, ...]:
        return tuple(self.index_levels)

    def __len__(self):
        return len(self.index_levels)


@dataclass(frozen=True)
class Alignment:
    """Result of :func:`align_years`."""

    span: tuple[int, int]
    retained: tuple[AssetRecord, ...]
    missing: Mapping[str, tuple[int, ...]] = field(default_factory=dict)


# --------------------------------------------------------------------------
# CSV plumbing
# --------------------------------------------------------------------------


def _read_rows(path: str | Path, columns: Sequence[str]) -> list[tuple[int, dict[str, str]]]:
    path = Path(path)
    if not path.is_file():
        raise DataValidationError(f"{path}: file not found")
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        missing = [c for c in columns if c not in header]
        if missing:
            raise ParseError(f"{path.name}: missing columns {missing}")
        rows = []
        for i, row in enumerate(reader, start=1):
            if None in row or any(row[c] is None for c in columns):
                raise ParseError(f"{path.name}: wrong number of fields", row=i)
            rows.append((i, row))
    return rows


def _parse_year(text: str, row: int) -> int:
    try:
        return int(text.strip())
    except ValueError:
        raise ParseError(f"bad year {text!r}", row=row) from None


def _parse_float(text: str, column: str, row: int) -> float:
    try:
        value = float(text.strip())
    except ValueError:
        raise ParseError(f"bad {column} {text!r}", row=row) from None
    if not math.isfinite(value):
        raise ParseError(f"non-finite {column} {text!r}", row=row)
    return value


def _load_year_map(path: str | Path, columns: Sequence[str]) -> dict[int, float]:
    year_col, value_col = columns
    out: dict[int, float] = {}
    for i, row in _read_rows(path, columns):
        year = _parse_year(row[year_col], i)
        if year in out:
            raise ParseError(f"duplicate year {year}", row=i)
        out[year] = _parse_float(row[value_col], value_col, i)
    if not out:
        raise DataValidationError(f"{Path(path).name}: no data rows")
    return out


# --------------------------------------------------------------------------
# Public loaders
# --------------------------------------------------------------------------


def load_assets(path: str | Path) -> list[AssetRecord]:
    """Read the long-format asset file into one record per ticker.

    Tickers keep their first-appearance order. A repeated ``(ticker, year)``
    pair raises :class:`DuplicateTickerError`; static fields (name, cap class,
    score, sector) must agree across a ticker's rows.
    """
    static: dict[str, tuple[str, str, float, str | None]] = {}
    prices: dict[str, dict[int, float]] = {}
    for i, row in _read_rows(path, ASSET_COLUMNS):
        ticker = row["ticker"].strip()
        if not ticker:
            raise ParseError("empty ticker", row=i)
        cap = row["cap_class"].strip().lower()
        score = _parse_float(row["env_score"], "env_score", i)
        if not (0.0 <= score <= 100.0):
            raise DataValidationError(f"row {i}: env_score {score} outside [0, 100]")
        sector = (row.get("sector") or "").strip() or None
        info = (row["name"].strip(), cap, score, sector)
        year = _parse_year(row["year"], i)
        close = _parse_float(row["close"], "close", i)
        if ticker not in static:
            static[ticker] = info
            prices[ticker] = {}
        elif static[ticker] != info:
            raise DataValidationError(f"row {i}: {ticker} static fields differ from earlier rows")
        if year in prices[ticker]:
            raise DuplicateTickerError(f"row {i}: duplicate ticker {ticker!r} for year {year}")
        prices[ticker][year] = close

    records = []
    for ticker, (name, cap, score, sector) in static.items():
        try:
            records.append(AssetRecord(ticker, name, cap, score, prices[ticker], sector))
        except DataValidationError as exc:
            raise DataValidationError(f"{Path(path).name}: {exc}") from None
    logger.debug("loaded %d assets from %s", len(records), path)
    return records


def write_assets(records: Iterable[AssetRecord], path: str | Path) -> None:
    """Write records in the format read by :func:`load_assets`."""
    records = list(records)
    with_sector = any(r.sector is not None for r in records)
    columns = list(ASSET_COLUMNS) + (["sector"] if with_sector else [])
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(columns)
        for r in records:
            for year, close in r.prices.items():
                row = [r.ticker, r.name, r.cap_class, repr(r.env_score), year, repr(close)]
                if with_sector:
                    row.append(r.sector or "")
                writer.writerow(row)


def load_factor_series(
    path_losses: str | Path,
    path_intensity: str | Path,
    path_market: str | Path,
) -> tuple[LossSeries, IntensitySeries, MarketSeries]:
    """Load the disaster-loss, emissions-intensity and market index files."""
    out = []
    for cls, path, columns in (
        (LossSeries, path_losses, LOSS_COLUMNS),
        (IntensitySeries, path_intensity, INTENSITY_COLUMNS),
        (MarketSeries, path_market, MARKET_COLUMNS),
    ):
        try:
            out.append(cls(_load_year_map(path, columns)))
        except DataValidationError as exc:
            if Path(path).name in str(exc):
                raise
            raise type(exc)(f"{Path(path).name}: {exc}") from None
    return tuple(out)


def align_years(
    assets: Sequence[AssetRecord],
    market: MarketSeries,
    span: tuple[int, int],
) -> Alignment:
    """Keep the assets whose prices cover every year of ``span`` (inclusive).

    Assets with gaps are reported in ``Alignment.missing`` together with the
    years they lack; order of the retained assets follows the input.
    """
    start, end = span
    if end < start:
        raise DataValidationError(f"empty span {span}")
    if not all(y in market.index_levels for y in range(start, end + 1)):
        lacking = [y for y in range(start, end + 1) if y not in market.index_levels]
        raise DataValidationError(f"market index missing years {lacking}")
    retained = []
    missing = {}
    for asset in assets:
        gaps = tuple(y for y in range(start, end + 1) if y not in asset.prices)
        if gaps:
            missing[asset.ticker] = gaps
        else:
            retained.append(asset)
    if not retained:
        raise DataValidationError(f"no asset covers span {start}-{end}")
    for ticker, gaps in missing.items():
        logger.warning("%s lacks %d year(s) of %d-%d; excluded", ticker, len(gaps), start, end)
    return Alignment((start, end), tuple(retained), MappingProxyType(missing))
