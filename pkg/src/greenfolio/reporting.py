"""Writers for the CSV/JSON outputs and the human-readable report.

Numbers are written with 10 significant digits so repeated runs produce
byte-identical files.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path
from typing import Any, Mapping, Sequence

import numpy as np

from .factor import FactorModelFit
from .frontier import Backtest, FrontierHull, PortfolioSample
from .scenario import ScenarioProjection


def fmt(x: float) -> str:
    return format(float(x), ".10g")


def _round(obj: Any) -> Any:
    """Recursively apply the 10-significant-digit convention for JSON."""
    if isinstance(obj, Mapping):
        return {k: _round(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_round(v) for v in obj]
    if isinstance(obj, (bool, int, np.integer)) or obj is None or isinstance(obj, str):
        return int(obj) if isinstance(obj, np.integer) else obj
    value = float(obj)
    if not np.isfinite(value):
        return None
    return float(fmt(value))


def write_json(obj: Any, path: str | Path) -> Path:
    path = Path(path)
    path.write_text(json.dumps(_round(obj), indent=2) + "\n", encoding="utf-8")
    return path


def _writer(fh):
    return csv.writer(fh, lineterminator="\n")


def write_samples(path, tickers: Sequence[str], weights, mu, sigma, es, score) -> Path:
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = _writer(fh)
        w.writerow(["index", "mu", "sigma", "es", "green_sharpe"] + [f"w_{t}" for t in tickers])
        for i in range(len(mu)):
            w.writerow([i, fmt(mu[i]), fmt(sigma[i]), fmt(es[i]), fmt(score[i])]
                       + [fmt(v) for v in weights[i]])
    return path


def write_hull(path, hull: FrontierHull) -> Path:
    return write_json(hull.to_dict(), path)


def optimal_dict(sample: PortfolioSample, tickers: Sequence[str], r_f: float) -> dict:
    return {
        "index": sample.index,
        "r_f": r_f,
        "mu": sample.mu,
        "sigma": sample.sigma,
        "es": sample.es,
        "green_excess_return": (sample.mu - r_f) * sample.es,
        "green_sharpe": sample.green_sharpe(r_f),
        "weights": {t: float(v) for t, v in zip(tickers, sample.weights)},
    }


def write_backtest(path, result: Backtest) -> Path:
    path = Path(path)
    mret = result.market_returns or {}
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = _writer(fh)
        w.writerow(["year", "value", "return", "market_return"])
        for s in result.snapshots:
            r = result.returns.get(s.year)
            m = mret.get(s.year)
            w.writerow([s.year, fmt(s.value),
                        "" if r is None else fmt(r), "" if m is None else fmt(m)])
    return path


def read_backtest(path) -> tuple[dict[int, float], dict[int, float]]:
    """Portfolio and market return series from a backtest.csv."""
    port, mkt = {}, {}
    with Path(path).open(newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            year = int(row["year"])
            if row["return"]:
                port[year] = float(row["return"])
            if row["market_return"]:
                mkt[year] = float(row["market_return"])
    return port, mkt


def write_fit(path, fit: FactorModelFit) -> Path:
    return write_json(fit.to_dict(), path)


def write_projections(path, projections: Sequence[ScenarioProjection]) -> Path:
    """Per-year block, a blank line, then the per-scenario summary block."""
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = _writer(fh)
        w.writerow(["scenario", "year_offset", "market_return", "pf", "tf", "portfolio_return"])
        for p in projections:
            for y in p.years:
                w.writerow([p.name, y.offset, fmt(y.market_return), fmt(y.pf), fmt(y.tf),
                            fmt(y.portfolio_return)])
        w.writerow([])
        w.writerow(["scenario", "cum3y_portfolio", "cum3y_market", "sharpe_portfolio",
                    "sharpe_market"])
        for p in projections:
            w.writerow([p.name, fmt(p.cumulative_3y_portfolio), fmt(p.cumulative_3y_market),
                        fmt(p.ex_ante_sharpe_portfolio), fmt(p.ex_ante_sharpe_market)])
    return path


def read_projections(path) -> tuple[list[dict[str, str]], list[dict[str, str]]]:
    text = Path(path).read_text(encoding="utf-8")
    head, _, tail = text.partition("\n\n")
    return list(csv.DictReader(head.splitlines())), list(csv.DictReader(tail.splitlines()))


def render_report(
    *,
    summary,
    optimal: Mapping[str, Any],
    backtest: Backtest,
    fit: FactorModelFit,
    projections: Sequence[ScenarioProjection],
    manifest: Mapping[str, Any],
) -> str:
    """Markdown summary of one pipeline run."""
    lines = ["# Green portfolio report", ""]
    lines += [
        "## Universe", "",
        f"- assets: {summary.count} ("
        + ", ".join(f"{k} {v}" for k, v in summary.per_class.items()) + ")",
        f"- mean environmental score: {summary.mean_env_score:.2f}",
    ]
    if summary.sector_count is not None:
        lines.append(f"- sectors: {summary.sector_count}")
    lines += [
        "", "## Selected portfolio", "",
        f"- sample index {optimal['index']} of {manifest.get('samples')}",
        f"- mu {optimal['mu']:.4f}, sigma {optimal['sigma']:.4f}, es {optimal['es']:.2f}",
        f"- green Sharpe {optimal['green_sharpe']:.4f} (r_f = {optimal['r_f']})",
        "", "| ticker | weight |", "|---|---|",
    ]
    for t, v in sorted(optimal["weights"].items(), key=lambda kv: -kv[1]):
        lines.append(f"| {t} | {v:.4f} |")

    first, last = backtest.snapshots[0], backtest.snapshots[-1]
    lines += [
        "", "## Backtest", "",
        f"- {first.value:g} invested in {first.year} grows to {last.value:.2f} by {last.year}",
    ]
    if backtest.market_returns:
        growth = float(np.prod([1.0 + r for r in backtest.market_returns.values()]))
        lines.append(f"- the index over the same years: x{growth:.2f}")

    lines += ["", "## Factor model", "",
              f"- R^2 {fit.r_squared:.4f}, n = {fit.n_obs}, dof = {fit.dof}", "",
              "| term | coef | std err | t | p |", "|---|---|---|---|---|"]
    for i, name in enumerate(fit.names):
        lines.append(f"| {name} | {fit.params[i]:.6g} | {fit.std_errors[i]:.4g} | "
                     f"{fit.t_stats[i]:.3f} | {fit.p_values[i]:.4f} |")

    lines += ["", "## Scenarios", "",
              "| scenario | cum 3y portfolio | cum 3y market | Sharpe portfolio | Sharpe market |",
              "|---|---|---|---|---|"]
    for p in projections:
        lines.append(f"| {p.name} | {p.cumulative_3y_portfolio:.4f} | {p.cumulative_3y_market:.4f}"
                     f" | {p.ex_ante_sharpe_portfolio:.4f} | {p.ex_ante_sharpe_market:.4f} |")
    lines += ["", f"seed {manifest.get('seed')}, version {manifest.get('version')}", ""]
    return "\n".join(lines)
