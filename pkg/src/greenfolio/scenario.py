"""Climate scenarios and three-year return projections.

A scenario is written as rules (:class:`YearRule`: market path, physical-risk
loss as a percentile of recent history or an absolute figure, and a yearly
cut in emissions intensity) and resolved against the loaded history into
numbers (:class:`ScenarioSpec`). Projections push each resolved year through
a fitted factor model.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from types import MappingProxyType
from typing import Any, Mapping, Sequence

import numpy as np
import yaml

from . import DEFAULT_RISK_FREE
from .analytics import cagr, percentile
from .errors import ConfigError, DataValidationError, NumericalError
from .factor import FactorModelFit
from .ingest import IntensitySeries, LossSeries, MarketSeries

HORIZON = 3
DEFAULT_SCENARIO_NAMES = ("reference", "mild", "high", "stress")
BASELINE_WINDOWS = (10, 15, 20)


@dataclass(frozen=True)
class ScenarioSettings:
    """Numbers behind the four default scenarios.

    ``high_y2_market_offset`` and ``stress_y3_market_offset`` are toolkit
    choices added to the baseline market rate, as is
    ``stress_y3_pf_percentile``. Override any of them through ``settings`` in
    the scenario YAML.
    """

    tf_decrements: Mapping[str, float] = field(default_factory=lambda: {
        "reference": 0.006, "mild": 0.008, "high": 0.0095, "stress": 0.0105,
    })
    pf_window: int = 10
    reference_pf_percentile: float = 0.5
    mild_pf_percentile: float = 0.70
    high_pf_percentiles: tuple[float, float, float] = (0.70, 0.85, 0.80)
    stress_y1_pf_percentile: float = 0.75
    stress_y2_pf_usd_bn: float = 25.0
    stress_y3_pf_percentile: float = 0.85
    high_y2_market_offset: float = -0.05
    stress_y2_market_return: float = -0.075
    stress_y3_market_offset: float = 0.02

    @classmethod
    def from_mapping(cls, data: Mapping[str, Any]) -> "ScenarioSettings":
        known = set(cls.__dataclass_fields__)
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown scenario settings: {sorted(unknown)}")
        kw = dict(data)
        for key in ("high_pf_percentiles",):
            if key in kw:
                kw[key] = tuple(kw[key])
        if "tf_decrements" in kw:
            kw["tf_decrements"] = {**cls().tf_decrements, **kw["tf_decrements"]}
        return cls(**kw)


@dataclass(frozen=True)
class YearRule:
    """How one projected year is derived.

    Exactly one of ``market_return`` (absolute) or ``market_rule="baseline"``
    (baseline rate plus ``market_offset``), and exactly one of
    ``pf_percentile`` or ``pf_absolute_usd_bn``.
    """

    tf_decrement: float
    market_return: float | None = None
    market_rule: str | None = None
    market_offset: float = 0.0
    pf_percentile: float | None = None
    pf_absolute_usd_bn: float | None = None

    def __post_init__(self):
        if not (self.tf_decrement > 0.0):
            raise ConfigError(f"tf_decrement must be positive, got {self.tf_decrement}")
        if (self.market_return is None) == (self.market_rule is None):
            raise ConfigError("give exactly one of market_return or market_rule")
        if self.market_rule is not None and self.market_rule != "baseline":
            raise ConfigError(f"unknown market_rule {self.market_rule!r}")
        if self.market_return is not None and self.market_return <= -1.0:
            raise ConfigError("market_return must exceed -1")
        if (self.pf_percentile is None) == (self.pf_absolute_usd_bn is None):
            raise ConfigError("give exactly one of pf_percentile or pf_absolute_usd_bn")
        if self.pf_percentile is not None and not (0.0 <= self.pf_percentile <= 1.0):
            raise ConfigError(f"pf_percentile {self.pf_percentile} outside [0, 1]")
        if self.pf_absolute_usd_bn is not None and self.pf_absolute_usd_bn < 0.0:
            raise ConfigError("pf_absolute_usd_bn must be non-negative")

    def to_dict(self) -> dict:
        out: dict[str, Any] = {}
        if self.market_rule is not None:
            out["market_rule"] = self.market_rule
            if self.market_offset:
                out["market_offset"] = self.market_offset
        else:
            out["market_return"] = self.market_return
        if self.pf_percentile is not None:
            out["pf_percentile"] = self.pf_percentile
        else:
            out["pf_absolute_usd_bn"] = self.pf_absolute_usd_bn
        out["tf_decrement"] = self.tf_decrement
        return out


@dataclass(frozen=True)
class ScenarioRules:
    name: str
    years: tuple[YearRule, ...]

    def __post_init__(self):
        if len(self.years) != HORIZON:
            raise ConfigError(f"scenario {self.name!r} has {len(self.years)} years, need {HORIZON}")


@dataclass(frozen=True)
class ScenarioYear:
    offset: int
    market_return: float
    pf: float
    tf: float
    tf_decrement: float
    provenance: Mapping[str, str]


@dataclass(frozen=True)
class ScenarioSpec:
    """A resolved scenario: numeric market return, PF and TF per year."""

    name: str
    years: tuple[ScenarioYear, ...]

    def __post_init__(self):
        if len(self.years) != HORIZON:
            raise DataValidationError(f"scenario {self.name!r} must span {HORIZON} years")
        tf = [y.tf for y in self.years]
        if any(b >= a for a, b in zip(tf, tf[1:])):
            raise DataValidationError(f"scenario {self.name!r}: TF path is not decreasing")
        if any(y.pf < 0.0 for y in self.years) or any(y.tf <= 0.0 for y in self.years):
            raise DataValidationError(f"scenario {self.name!r}: PF must be >= 0 and TF > 0")

    @property
    def tf_decrements(self) -> tuple[float, ...]:
        return tuple(y.tf_decrement for y in self.years)


@dataclass(frozen=True)
class ProjectedYear:
    offset: int
    market_return: float
    pf: float
    tf: float
    portfolio_return: float


@dataclass(frozen=True)
class ScenarioProjection:
    name: str
    years: tuple[ProjectedYear, ...]
    cumulative_3y_portfolio: float
    cumulative_3y_market: float
    ex_ante_sharpe_portfolio: float
    ex_ante_sharpe_market: float


# --------------------------------------------------------------------------
# Kernels
# --------------------------------------------------------------------------


def baseline_market_rate(market: MarketSeries, windows: Sequence[int] = BASELINE_WINDOWS) -> float:
    """Mean of the trailing 10, 15 and 20 year index CAGRs up to the last year."""
    need = max(windows) + 1
    if len(market) < need:
        raise DataValidationError(
            f"baseline market rate needs {need} index levels, have {len(market)}"
        )
    levels = market.index_levels
    end = market.years[-1]
    return sum(cagr(levels[end - n], levels[end], n) for n in windows) / len(windows)


def project_tf(last_intensity: float, decrement: float | Sequence[float], horizon: int = HORIZON) -> list[float]:
    """Intensity path ``L - d, L - 2d, ...`` (per-year decrements accumulate)."""
    steps = [decrement] * horizon if np.isscalar(decrement) else list(decrement)
    if len(steps) != horizon:
        raise DataValidationError(f"{len(steps)} decrements for a {horizon}-year horizon")
    if any(not (d > 0.0) for d in steps):
        raise DataValidationError("TF decrement must be positive")
    path = []
    level = last_intensity
    for year, d in enumerate(steps, start=1):
        level = level - d
        if level <= 0.0:
            raise DataValidationError(f"TF projection turns non-positive in year {year}")
        path.append(level)
    return path


def project_portfolio_return(
    fit: FactorModelFit,
    market_return: float,
    pf_value: float,
    tf_value: float,
    r_f: float = DEFAULT_RISK_FREE,
) -> float:
    return (r_f + fit.alpha + fit.beta_market * (market_return - r_f)
            + fit.beta_pf * pf_value + fit.beta_tf * tf_value)


def cumulative_return(yearly: Sequence[float]) -> float:
    rs = [float(r) for r in yearly]
    for r in rs:
        if r <= -1.0:
            raise NumericalError(f"yearly return {r} wipes out the position")
    if len(rs) == 1:
        # (1 + r) - 1 would round away tiny r
        return rs[0]
    return math.prod(1.0 + r for r in rs) - 1.0


def ex_ante_sharpe(projected_yearly: Sequence[float], historical_sigma: float,
                   r_f: float = DEFAULT_RISK_FREE) -> float:
    """Mean projected annual return in excess of r_f over historical annual volatility."""
    if not (historical_sigma > 0.0):
        raise NumericalError("historical_sigma must be positive")
    return (float(np.mean(projected_yearly)) - r_f) / historical_sigma


# --------------------------------------------------------------------------
# Scenario construction
# --------------------------------------------------------------------------


def default_rules(settings: ScenarioSettings | None = None) -> tuple[ScenarioRules, ...]:
    s = settings or ScenarioSettings()
    d = s.tf_decrements

    def base(offset=0.0):
        return {"market_rule": "baseline", "market_offset": offset}

    def pct(p):
        return {"pf_percentile": p}

    def rules(name, years):
        return ScenarioRules(name, tuple(YearRule(tf_decrement=d[name], **y) for y in years))

    median = s.reference_pf_percentile
    return (
        rules("reference", [{**base(), **pct(median)}] * 3),
        rules("mild", [{**base(), **pct(median)}] + [{**base(), **pct(s.mild_pf_percentile)}] * 2),
        rules("high", [
            {**base(), **pct(s.high_pf_percentiles[0])},
            {**base(s.high_y2_market_offset), **pct(s.high_pf_percentiles[1])},
            {**base(), **pct(s.high_pf_percentiles[2])},
        ]),
        rules("stress", [
            {**base(), **pct(s.stress_y1_pf_percentile)},
            {"market_return": s.stress_y2_market_return, "pf_absolute_usd_bn": s.stress_y2_pf_usd_bn},
            {**base(s.stress_y3_market_offset), **pct(s.stress_y3_pf_percentile)},
        ]),
    )


def resolve(
    rules: ScenarioRules,
    losses: LossSeries,
    intensity: IntensitySeries,
    market: MarketSeries | None,
    pf_window: int = 10,
) -> ScenarioSpec:
    """Turn rules into numbers using the most recent history."""
    baseline = None
    if any(r.market_rule is not None for r in rules.years):
        if market is None:
            raise DataValidationError("baseline market rule needs the market series")
        baseline = baseline_market_rate(market)
    window = None
    if any(r.pf_percentile is not None for r in rules.years):
        if len(losses) < pf_window:
            raise DataValidationError(
                f"percentile PF needs {pf_window} loss years, have {len(losses)}"
            )
        window = [losses.entries[y] for y in losses.years[-pf_window:]]
    if len(intensity) < 1:
        raise DataValidationError("no intensity observation")
    last_tf = intensity.last
    tf_path = project_tf(last_tf, [r.tf_decrement for r in rules.years])

    years = []
    for offset, (rule, tf) in enumerate(zip(rules.years, tf_path), start=1):
        if rule.market_rule == "baseline":
            mkt = baseline + rule.market_offset
            mkt_src = f"baseline {baseline:.6g} {rule.market_offset:+.6g}"
        else:
            mkt = rule.market_return
            mkt_src = "absolute"
        if rule.pf_percentile is not None:
            pf = percentile(window, rule.pf_percentile)
            pf_src = f"p{rule.pf_percentile * 100:g} of last {pf_window} losses"
        else:
            pf = rule.pf_absolute_usd_bn
            pf_src = "absolute USD bn"
        tf_src = f"{last_tf:.6g} (year {intensity.years[-1]}) minus cumulative decrements"
        years.append(ScenarioYear(offset, float(mkt), float(pf), float(tf), rule.tf_decrement,
                                  MappingProxyType({"market": mkt_src, "pf": pf_src, "tf": tf_src})))
    return ScenarioSpec(rules.name, tuple(years))


def build_default_scenarios(
    losses: LossSeries,
    intensity: IntensitySeries,
    market: MarketSeries,
    settings: ScenarioSettings | None = None,
) -> tuple[ScenarioSpec, ...]:
    """Resolve the reference, mild, high and stress scenarios."""
    s = settings or ScenarioSettings()
    need_market = max(BASELINE_WINDOWS) + 1
    short = []
    if len(losses) < s.pf_window:
        short.append(f"losses: {len(losses)} < {s.pf_window} years")
    if len(market) < need_market:
        short.append(f"market: {len(market)} < {need_market} levels")
    if len(intensity) < 1:
        short.append("intensity: no observation")
    if short:
        raise DataValidationError("insufficient history (" + "; ".join(short) + ")")
    return tuple(resolve(r, losses, intensity, market, s.pf_window) for r in default_rules(s))


def run_scenarios(
    fit: FactorModelFit,
    specs: Sequence[ScenarioSpec],
    r_f: float,
    historical_sigmas: tuple[float, float],
) -> list[ScenarioProjection]:
    """Project portfolio and market side by side for every scenario.

    ``historical_sigmas`` is ``(portfolio, market)`` annual volatility; each
    series is scored against its own.
    """
    sigma_p, sigma_m = historical_sigmas
    out = []
    for spec in specs:
        years = tuple(
            ProjectedYear(y.offset, y.market_return, y.pf, y.tf,
                          project_portfolio_return(fit, y.market_return, y.pf, y.tf, r_f))
            for y in spec.years
        )
        port = [y.portfolio_return for y in years]
        mkt = [y.market_return for y in years]
        out.append(ScenarioProjection(
            name=spec.name,
            years=years,
            cumulative_3y_portfolio=cumulative_return(port),
            cumulative_3y_market=cumulative_return(mkt),
            ex_ante_sharpe_portfolio=ex_ante_sharpe(port, sigma_p, r_f),
            ex_ante_sharpe_market=ex_ante_sharpe(mkt, sigma_m, r_f),
        ))
    return out


# --------------------------------------------------------------------------
# Config file
# --------------------------------------------------------------------------


def parse_rules(data: Mapping[str, Any]) -> tuple[tuple[ScenarioRules, ...], int]:
    """Parse a scenario document into rules and the PF history window.

    The document either lists ``scenarios`` explicitly or gives ``settings``
    that adjust the four defaults (or both are absent: plain defaults).
    """
    if not isinstance(data, Mapping):
        raise ConfigError("scenario config must be a mapping")
    settings = ScenarioSettings.from_mapping(data.get("settings") or {})
    window = int(data.get("pf_window", settings.pf_window))
    if "scenarios" not in data:
        return default_rules(settings), window
    scenarios = []
    seen = set()
    for entry in data["scenarios"]:
        try:
            name = str(entry["name"])
            years = tuple(YearRule(**y) for y in entry["years"])
        except (KeyError, TypeError) as exc:
            raise ConfigError(f"malformed scenario entry {entry!r}: {exc}") from None
        if name in seen:
            raise ConfigError(f"duplicate scenario name {name!r}")
        seen.add(name)
        scenarios.append(ScenarioRules(name, years))
    if not scenarios:
        raise ConfigError("scenario config lists no scenarios")
    return tuple(scenarios), window


def load_scenario_config(path: str | Path) -> tuple[tuple[ScenarioRules, ...], int]:
    try:
        with Path(path).open(encoding="utf-8") as fh:
            data = yaml.safe_load(fh) or {}
    except (OSError, yaml.YAMLError) as exc:
        raise ConfigError(f"cannot read scenario config {path}: {exc}") from None
    return parse_rules(data)


def dump_rules(rules: Sequence[ScenarioRules], pf_window: int = 10) -> str:
    doc = {
        "pf_window": pf_window,
        "scenarios": [{"name": r.name, "years": [y.to_dict() for y in r.years]} for r in rules],
    }
    return yaml.safe_dump(doc, sort_keys=False)
