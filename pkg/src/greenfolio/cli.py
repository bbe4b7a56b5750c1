"""Command-line entry point.

Usage::

    greenfolio run --config run.yaml --seed 7 --out out/
    greenfolio frontier --fixture --seed 7 --samples 100 --out out/

Every subcommand recomputes the stages it depends on in memory (the runs are
seeded, so this is deterministic) and writes only its own outputs. Files are
staged in a scratch directory and moved into ``--out`` only when the whole
command succeeds.

Exit codes: 0 success, 2 config error, 3 data validation error,
4 numerical error.
"""

from __future__ import annotations

import argparse
import hashlib
import logging
import shutil
import sys
import tempfile
from dataclasses import asdict, dataclass, field
from functools import cached_property
from importlib import resources
from pathlib import Path
from typing import Any, Callable, Mapping, Sequence

import numpy as np
import yaml

from . import DEFAULT_RISK_FREE, __version__
from .analytics import ReturnPanel, annual_volatility, covariance_matrix, mean_vector
from .errors import ConfigError, GreenfolioError, NumericalError
from .factor import fit_factor_model
from .frontier import (DEFAULT_INITIAL_VALUE, DEFAULT_SAMPLE_COUNT, SAMPLING_METHODS, PortfolioSample,
                       backtest, build_hull, evaluate_samples, optimal_index, sample_weights)
from .ingest import align_years, load_assets, load_factor_series
from .reporting import (optimal_dict, render_report, write_backtest, write_fit, write_hull,
                        write_json, write_projections, write_samples)
from .scenario import load_scenario_config, parse_rules, resolve, run_scenarios
from .universe import ScreeningConfig, screen, universe_summary

logger = logging.getLogger("greenfolio")

INPUT_NAMES = ("assets", "losses", "intensity", "market")


class StageError(Exception):
    def __init__(self, stage: str, cause: GreenfolioError):
        self.stage = stage
        self.cause = cause
        self.exit_code = cause.exit_code
        super().__init__(f"{stage} stage failed: {cause}")


def fixture_dir() -> Path:
    return Path(str(resources.files("greenfolio") / "data" / "fixture"))


@dataclass(frozen=True)
class RunConfig:
    inputs: Mapping[str, Path]
    seed: int
    r_f: float = DEFAULT_RISK_FREE
    sample_count: int = DEFAULT_SAMPLE_COUNT
    sampling: str = "normalized"
    span: tuple[int, int] | None = None
    initial_value: float = DEFAULT_INITIAL_VALUE
    screening: ScreeningConfig = field(default_factory=ScreeningConfig)
    scenario_config: Path | None = None
    scenario_doc: Mapping[str, Any] | None = None
    out: Path = Path("out")

    def __post_init__(self):
        missing = [k for k in INPUT_NAMES if k not in self.inputs]
        if missing:
            raise ConfigError(f"missing input paths: {missing}")
        if isinstance(self.seed, bool) or not isinstance(self.seed, int):
            raise ConfigError("seed must be an integer")
        if self.sample_count < 1:
            raise ConfigError("sample count must be at least 1")
        if not (-1.0 < self.r_f < 1.0):
            raise ConfigError(f"r_f {self.r_f} outside (-1, 1)")
        if self.sampling not in SAMPLING_METHODS:
            raise ConfigError(f"sampling must be one of {SAMPLING_METHODS}")
        if self.initial_value <= 0:
            raise ConfigError("initial_value must be positive")

    def echo(self) -> dict:
        return {
            "inputs": {k: str(v) for k, v in self.inputs.items()},
            "seed": self.seed,
            "r_f": self.r_f,
            "samples": self.sample_count,
            "sampling": self.sampling,
            "span": list(self.span) if self.span else None,
            "initial_value": self.initial_value,
            "screening": {**asdict(self.screening),
                          "ranking_metrics": list(self.screening.ranking_metrics)},
            "scenario_config": str(self.scenario_config) if self.scenario_config else None,
        }


def _read_yaml(path: Path) -> dict:
    try:
        data = yaml.safe_load(path.read_text(encoding="utf-8")) or {}
    except (OSError, yaml.YAMLError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: config must be a mapping")
    return data


def build_config(args: argparse.Namespace) -> RunConfig:
    """Merge the config file, ``--fixture`` and command-line flags."""
    data: dict[str, Any] = {}
    base = Path.cwd()
    if args.config:
        path = Path(args.config)
        data = _read_yaml(path)
        base = path.parent
    if args.fixture:
        inputs = {k: fixture_dir() / f"{k}.csv" for k in INPUT_NAMES}
    else:
        raw = data.get("inputs") or {}
        if not isinstance(raw, Mapping):
            raise ConfigError("inputs must be a mapping of name to path")
        inputs = {k: base / str(v) for k, v in raw.items()}
        if args.data_dir:
            inputs = {k: Path(args.data_dir) / f"{k}.csv" for k in INPUT_NAMES} | inputs

    seed = args.seed if args.seed is not None else data.get("seed")
    if seed is None:
        raise ConfigError("a seed is required (--seed or 'seed' in the config)")
    if isinstance(seed, str) and seed.strip().lstrip("-").isdigit():
        seed = int(seed)

    screening_raw = data.get("screening") or {}
    try:
        screening = ScreeningConfig(**{
            **screening_raw,
            **({"ranking_metrics": tuple(screening_raw["ranking_metrics"])}
               if "ranking_metrics" in screening_raw else {}),
        })
    except TypeError as exc:
        raise ConfigError(f"bad screening block: {exc}") from None

    scenario_config = None
    scenario_doc = None
    sc = data.get("scenarios")
    if isinstance(sc, (str, Path)):
        scenario_config = base / str(sc)
    elif isinstance(sc, Mapping):
        scenario_doc = sc
    if getattr(args, "scenarios", None):
        scenario_config, scenario_doc = Path(args.scenarios), None

    span = data.get("span")
    if span is not None:
        if not (isinstance(span, (list, tuple)) and len(span) == 2):
            raise ConfigError("span must be [start_year, end_year]")
        span = (int(span[0]), int(span[1]))

    def pick(flag, key, default):
        return flag if flag is not None else data.get(key, default)

    try:
        return RunConfig(
            inputs=inputs,
            seed=seed,
            r_f=float(pick(args.rf, "rf", DEFAULT_RISK_FREE)),
            sample_count=int(pick(args.samples, "samples", DEFAULT_SAMPLE_COUNT)),
            sampling=str(data.get("sampling", "normalized")),
            span=span,
            initial_value=float(data.get("initial_value", DEFAULT_INITIAL_VALUE)),
            screening=screening,
            scenario_config=scenario_config,
            scenario_doc=scenario_doc,
            out=Path(pick(args.out, "out", "out")),
        )
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from None


class Pipeline:
    """Lazily evaluated stages; each property is one stage."""

    def __init__(self, config: RunConfig):
        self.config = config

    def _stage(self, name: str, fn: Callable[[], Any]) -> Any:
        try:
            return fn()
        except StageError:
            raise
        except GreenfolioError as exc:
            raise StageError(name, exc) from exc

    @cached_property
    def data(self):
        def load():
            paths = self.config.inputs
            assets = load_assets(paths["assets"])
            losses, intensity, market = load_factor_series(
                paths["losses"], paths["intensity"], paths["market"])
            span = self.config.span or (market.years[0], market.years[-1])
            alignment = align_years(assets, market, span)
            return {"assets": assets, "losses": losses, "intensity": intensity,
                    "market": market, "alignment": alignment, "span": span}
        return self._stage("ingest", load)

    @cached_property
    def universe(self):
        def run():
            d = self.data
            selected = screen(d["alignment"].retained, self.config.screening, d["market"])
            return selected, universe_summary(selected)
        return self._stage("screen", run)

    @property
    def tickers(self) -> tuple[str, ...]:
        return tuple(a.ticker for a in self.universe[0])

    @cached_property
    def frontier(self):
        def run():
            selected, _ = self.universe
            panel = ReturnPanel.from_assets(selected, self.data["market"], self.data["span"])
            m, c = mean_vector(panel), covariance_matrix(panel)
            env = np.array([a.env_score for a in selected])
            w = sample_weights(len(selected), self.config.sample_count, self.config.seed,
                               self.config.sampling)
            mu, sigma, es = evaluate_samples(w, m, c, env)
            if np.any(sigma <= 0.0):
                raise NumericalError("a sampled portfolio has zero volatility")
            score = (mu - self.config.r_f) / sigma * es
            hull = build_hull(np.column_stack([mu, sigma, es])) if len(mu) >= 4 else None
            return {"weights": w, "mu": mu, "sigma": sigma, "es": es, "score": score,
                    "hull": hull}
        return self._stage("frontier", run)

    @cached_property
    def optimal(self) -> PortfolioSample:
        def run():
            f = self.frontier
            i = optimal_index(f["mu"], f["sigma"], f["es"], self.config.r_f)
            return PortfolioSample(f["weights"][i], float(f["mu"][i]), float(f["sigma"][i]),
                                   float(f["es"][i]), index=i)
        return self._stage("optimize", run)

    @cached_property
    def backtest(self):
        return self._stage("backtest", lambda: backtest(
            self.optimal.weights, self.universe[0], self.data["span"],
            self.config.initial_value, self.data["market"]))

    @cached_property
    def fit(self):
        d = self.data
        return self._stage("regress", lambda: fit_factor_model(
            self.backtest.returns, self.backtest.market_returns, d["losses"], d["intensity"],
            self.config.r_f))

    @cached_property
    def projections(self):
        def run():
            d = self.data
            if self.config.scenario_config is not None:
                rules, window = load_scenario_config(self.config.scenario_config)
            else:
                rules, window = parse_rules(self.config.scenario_doc or {})
            specs = [resolve(r, d["losses"], d["intensity"], d["market"], window) for r in rules]
            years = sorted(self.backtest.returns)
            sig_p = annual_volatility([self.backtest.returns[y] for y in years])
            sig_m = annual_volatility([self.backtest.market_returns[y] for y in years])
            return run_scenarios(self.fit, specs, self.config.r_f, (sig_p, sig_m))
        return self._stage("scenario", run)

    def manifest(self) -> dict:
        hashes = {}
        for k, p in self.config.inputs.items():
            try:
                hashes[k] = hashlib.sha256(Path(p).read_bytes()).hexdigest()
            except OSError:
                hashes[k] = None
        return {"toolkit": "greenfolio", "version": __version__, "seed": self.config.seed,
                "samples": self.config.sample_count, "config": self.config.echo(),
                "input_sha256": hashes}

    # ---- stage writers -------------------------------------------------

    def write_ingest(self, out: Path):
        d = self.data
        al = d["alignment"]
        write_json({
            "span": list(d["span"]),
            "retained": [a.ticker for a in al.retained],
            "excluded": {t: list(y) for t, y in al.missing.items()},
            "losses_years": [d["losses"].years[0], d["losses"].years[-1]],
            "intensity_years": [d["intensity"].years[0], d["intensity"].years[-1]],
            "market_years": [d["market"].years[0], d["market"].years[-1]],
        }, out / "ingest.json")

    def write_screen(self, out: Path):
        selected, s = self.universe
        write_json({
            "selected": [{"ticker": a.ticker, "cap_class": a.cap_class, "env_score": a.env_score}
                         for a in selected],
            "summary": {"count": s.count, "per_class": dict(s.per_class),
                        "mean_env_score": s.mean_env_score, "sector_count": s.sector_count},
        }, out / "universe.json")

    def write_frontier(self, out: Path):
        f = self.frontier
        write_samples(out / "samples.csv", self.tickers, f["weights"], f["mu"], f["sigma"],
                      f["es"], f["score"])
        if f["hull"] is None:
            raise StageError("frontier", NumericalError("fewer than 4 samples: no hull"))
        write_hull(out / "hull.json", f["hull"])

    def write_optimize(self, out: Path):
        write_json(optimal_dict(self.optimal, self.tickers, self.config.r_f), out / "optimal.json")

    def write_backtest(self, out: Path):
        write_backtest(out / "backtest.csv", self.backtest)

    def write_regress(self, out: Path):
        write_fit(out / "fit.json", self.fit)

    def write_scenario(self, out: Path):
        write_projections(out / "projections.csv", self.projections)

    def write_report(self, out: Path):
        text = render_report(summary=self.universe[1],
                             optimal=optimal_dict(self.optimal, self.tickers, self.config.r_f),
                             backtest=self.backtest, fit=self.fit, projections=self.projections,
                             manifest=self.manifest())
        (out / "report.md").write_text(text, encoding="utf-8")

    def write_run(self, out: Path):
        self.write_frontier(out)
        self.write_optimize(out)
        self.write_backtest(out)
        self.write_regress(out)
        self.write_scenario(out)
        write_json(self.manifest(), out / "manifest.json")
        self.write_report(out)


def run_pipeline(config: RunConfig, command: str = "run") -> list[Path]:
    """Run ``command`` and move its outputs into ``config.out``.

    On failure nothing is left behind in the output directory.
    """
    pipeline = Pipeline(config)
    out = Path(config.out)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ConfigError(f"cannot create output directory {out}: {exc}") from None
    staging = Path(tempfile.mkdtemp(prefix=".staging-", dir=out))
    try:
        getattr(pipeline, f"write_{command}")(staging)
        produced = sorted(staging.iterdir())
        final = []
        for p in produced:
            target = out / p.name
            p.replace(target)
            final.append(target)
        return final
    finally:
        shutil.rmtree(staging, ignore_errors=True)


SUBCOMMANDS = {
    "run": "full pipeline: every output plus manifest.json and report.md",
    "ingest": "load and align inputs -> ingest.json",
    "screen": "screen the universe -> universe.json",
    "frontier": "sample portfolios and build the hull -> samples.csv, hull.json",
    "optimize": "select the green portfolio -> optimal.json",
    "backtest": "buy-and-hold backtest -> backtest.csv",
    "regress": "fit the climate-extended CAPM -> fit.json",
    "scenario": "project climate scenarios -> projections.csv",
    "report": "human-readable summary -> report.md",
}


def make_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="YAML run configuration")
    common.add_argument("--seed", type=int, help="RNG seed (required here or in the config)")
    common.add_argument("--samples", type=int, help=f"portfolio samples (default {DEFAULT_SAMPLE_COUNT})")
    common.add_argument("--rf", type=float, help=f"risk-free rate (default {DEFAULT_RISK_FREE})")
    common.add_argument("--out", help="output directory")
    common.add_argument("--data-dir", help="directory holding assets/losses/intensity/market.csv")
    common.add_argument("--fixture", action="store_true", help="use the bundled synthetic dataset")
    common.add_argument("--scenarios", help="scenario YAML (overrides the config)")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="greenfolio", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"greenfolio {__version__}")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")
    sub.required = True
    for name, help_text in SUBCOMMANDS.items():
        sub.add_parser(name, parents=[common], help=help_text)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = make_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code not in (0, None) else 0
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        config = build_config(args)
        paths = run_pipeline(config, args.command)
    except StageError as exc:
        print(f"greenfolio: {exc}", file=sys.stderr)
        return exc.exit_code
    except GreenfolioError as exc:
        print(f"greenfolio: config: {exc}", file=sys.stderr)
        return exc.exit_code
    for p in paths:
        print(p)
    return 0


if __name__ == "__main__":
    sys.exit(main())
