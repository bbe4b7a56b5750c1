"""Random long-only portfolios, the green efficient frontier and selection.

Each portfolio is summarised by the triple (expected return, volatility,
environmental score). The frontier is the convex hull of those triples and
the selected portfolio maximises ``(mu - r_f) / sigma * es``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.spatial import ConvexHull, QhullError

from . import DEFAULT_RISK_FREE
from .errors import DataValidationError, NumericalError
from .ingest import AssetRecord, MarketSeries

logger = logging.getLogger(__name__)

DEFAULT_SAMPLE_COUNT = 20_000
DEFAULT_INITIAL_VALUE = 100.0
SAMPLING_METHODS = ("normalized", "dirichlet")


@dataclass(frozen=True)
class PortfolioSample:
    weights: np.ndarray
    mu: float
    sigma: float
    es: float
    index: int | None = None

    def __post_init__(self):
        w = np.array(self.weights, dtype=float, copy=True)
        if w.ndim != 1 or w.size == 0:
            raise DataValidationError("weights must be a non-empty vector")
        if np.any(w < 0.0):
            raise DataValidationError("negative weight (short selling is not allowed)")
        if abs(w.sum() - 1.0) > 1e-12:
            raise DataValidationError(f"weights sum to {w.sum()!r}, not 1")
        if self.sigma < 0.0:
            raise DataValidationError("sigma is negative")
        if not (0.0 <= self.es <= 100.0):
            raise DataValidationError(f"es {self.es} outside [0, 100]")
        w.flags.writeable = False
        object.__setattr__(self, "weights", w)

    def green_sharpe(self, r_f: float = DEFAULT_RISK_FREE) -> float:
        return green_sharpe(self.mu, self.sigma, self.es, r_f)


@dataclass(frozen=True)
class FrontierHull:
    """Convex hull of sample metric triples.

    ``vertices`` and ``facets`` index into ``points`` (one row per sample,
    columns mu, sigma, es). ``normals`` are unit outward normals in original
    units with matching ``offsets``, so ``normals @ x + offsets <= 0`` for
    every point inside.
    """

    points: np.ndarray
    vertices: np.ndarray
    facets: np.ndarray
    normals: np.ndarray
    offsets: np.ndarray

    def contains(self, x: np.ndarray, tol: float = 1e-9) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        return np.all(x @ self.normals.T + self.offsets <= tol, axis=1)

    def to_dict(self) -> dict:
        return {
            "vertices": [int(v) for v in self.vertices],
            "facets": [[int(i) for i in f] for f in self.facets],
            "normals": [[float(c) for c in n] for n in self.normals],
            "offsets": [float(o) for o in self.offsets],
        }


@dataclass(frozen=True)
class ValuationSnapshot:
    year: int
    units: np.ndarray
    prices: np.ndarray
    value: float

    def weights(self) -> np.ndarray:
        """Current weights ``x_i * S_i / V``."""
        return self.units * self.prices / self.value


@dataclass(frozen=True)
class Backtest:
    snapshots: tuple[ValuationSnapshot, ...]
    returns: dict[int, float]
    market_returns: dict[int, float] | None = None

    @property
    def values(self) -> dict[int, float]:
        return {s.year: s.value for s in self.snapshots}


def sample_weights(
    n_assets: int,
    count: int = DEFAULT_SAMPLE_COUNT,
    seed: int | None = None,
    method: str = "normalized",
) -> np.ndarray:
    """Draw ``count`` long-only weight vectors, one per row.

    ``"normalized"`` divides i.i.d. U(0, 1) draws by their sum. This is not
    uniform on the simplex; ``"dirichlet"`` (flat Dirichlet, via normalised
    exponentials) is available for sensitivity checks.
    """
    if n_assets < 1:
        raise DataValidationError("n_assets must be at least 1")
    if count < 1:
        raise DataValidationError("count must be at least 1")
    if method not in SAMPLING_METHODS:
        raise DataValidationError(f"unknown sampling method {method!r}")
    rng = np.random.default_rng(seed)
    if method == "normalized":
        # 1 - U lies in (0, 1], so no row sums to zero
        raw = 1.0 - rng.random((count, n_assets))
    else:
        raw = rng.standard_exponential((count, n_assets))
    return raw / raw.sum(axis=1, keepdims=True)


def _check_dims(weights, mean, cov, env):
    n = weights.shape[-1]
    if mean.shape != (n,) or env.shape != (n,) or cov.shape != (n, n):
        raise DataValidationError(
            f"dimension mismatch: weights {weights.shape}, mean {mean.shape}, "
            f"covariance {cov.shape}, env_scores {env.shape}"
        )


def portfolio_metrics(weights, mean_vector, covariance, env_scores) -> tuple[float, float, float]:
    """Return ``(mu, sigma, es)`` for one weight vector."""
    w = np.asarray(weights, dtype=float)
    m = np.asarray(mean_vector, dtype=float)
    c = np.asarray(covariance, dtype=float)
    e = np.asarray(env_scores, dtype=float)
    _check_dims(w, m, c, e)
    var = float(w @ c @ w)
    if var < -1e-12:
        raise NumericalError(f"negative portfolio variance {var}; covariance is not PSD")
    return float(m @ w), float(np.sqrt(max(var, 0.0))), float(e @ w)


def evaluate_samples(weights, mean_vector, covariance, env_scores):
    """Vectorised :func:`portfolio_metrics` over the rows of ``weights``.

    Returns three arrays ``(mu, sigma, es)`` in row order.
    """
    w = np.atleast_2d(np.asarray(weights, dtype=float))
    m = np.asarray(mean_vector, dtype=float)
    c = np.asarray(covariance, dtype=float)
    e = np.asarray(env_scores, dtype=float)
    _check_dims(w, m, c, e)
    var = np.einsum("ij,jk,ik->i", w, c, w)
    if np.any(var < -1e-12):
        raise NumericalError("negative portfolio variance; covariance is not PSD")
    return w @ m, np.sqrt(np.clip(var, 0.0, None)), w @ e


def make_samples(weights, mean_vector, covariance, env_scores) -> list[PortfolioSample]:
    mu, sigma, es = evaluate_samples(weights, mean_vector, covariance, env_scores)
    return [
        PortfolioSample(w, float(a), float(b), float(c), index=i)
        for i, (w, a, b, c) in enumerate(zip(np.atleast_2d(weights), mu, sigma, es))
    ]


def green_excess_return(mu: float, es: float, r_f: float = DEFAULT_RISK_FREE) -> float:
    return (mu - r_f) * es


def green_sharpe(mu: float, sigma: float, es: float, r_f: float = DEFAULT_RISK_FREE) -> float:
    """Sharpe ratio scaled by the environmental score."""
    if sigma <= 0.0:
        raise NumericalError("sigma must be positive for a Sharpe ratio")
    return (mu - r_f) / sigma * es


def optimal_index(mu, sigma, es, r_f: float = DEFAULT_RISK_FREE) -> int:
    """Index of the best green Sharpe ratio; ties go to lower sigma, then lower index."""
    mu = np.asarray(mu, dtype=float)
    sigma = np.asarray(sigma, dtype=float)
    es = np.asarray(es, dtype=float)
    if mu.size == 0:
        raise DataValidationError("no samples to select from")
    if np.any(sigma <= 0.0):
        raise NumericalError("degenerate sample with sigma = 0")
    score = (mu - r_f) / sigma * es
    best = np.flatnonzero(score == score.max())
    return int(best[np.argmin(sigma[best])])


def select_optimal(samples: Sequence[PortfolioSample], r_f: float = DEFAULT_RISK_FREE) -> PortfolioSample:
    if not samples:
        raise DataValidationError("no samples to select from")
    i = optimal_index([s.mu for s in samples], [s.sigma for s in samples],
                      [s.es for s in samples], r_f)
    return samples[i]


def _as_points(samples) -> np.ndarray:
    if len(samples) and isinstance(samples[0], PortfolioSample):
        return np.array([[s.mu, s.sigma, s.es] for s in samples], dtype=float)
    pts = np.asarray(samples, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 3:
        raise DataValidationError("hull input must be an (n, 3) array of (mu, sigma, es)")
    return pts


def build_hull(samples) -> FrontierHull:
    """Convex hull of the (mu, sigma, es) triples.

    Coordinates are divided by their per-axis range before Qhull runs, since
    es is two orders of magnitude larger than mu and sigma. Facets come back
    triangulated; normals and offsets are mapped back to original units.
    """
    pts = _as_points(samples)
    if len(pts) < 4:
        raise DataValidationError("a 3D hull needs at least 4 points")
    span = pts.max(axis=0) - pts.min(axis=0)
    if np.any(span <= 0.0):
        raise NumericalError("degenerate point set: an axis has zero range")
    z = (pts - pts.min(axis=0)) / span
    sv = np.linalg.svd(z - z.mean(axis=0), compute_uv=False)
    if sv[-1] < 1e-12:
        raise NumericalError("degenerate point set: points are coplanar")
    try:
        hull = ConvexHull(z, qhull_options="Qt")
    except QhullError as exc:
        raise NumericalError(f"hull construction failed: {exc}") from None

    facets = np.array(hull.simplices, dtype=int)
    vertices = np.array(sorted(hull.vertices), dtype=int)
    # z = (x - lo) / span, so n.z + d <= 0  <=>  (n / span).x + d - (n / span).lo <= 0
    lo = pts.min(axis=0)
    normals = hull.equations[:, :3] / span
    offsets = hull.equations[:, 3] - normals @ lo
    scale = np.linalg.norm(normals, axis=1)
    normals = normals / scale[:, None]
    offsets = offsets / scale
    # wind each triangle counter-clockwise about its outward normal
    a, b, c = pts[facets[:, 0]], pts[facets[:, 1]], pts[facets[:, 2]]
    flip = np.einsum("ij,ij->i", np.cross(b - a, c - a), normals) < 0.0
    facets[flip] = facets[flip][:, ::-1]
    return FrontierHull(pts, vertices, facets, normals, offsets)


def backtest(
    weights,
    assets: Sequence[AssetRecord],
    span: tuple[int, int],
    initial_value: float = DEFAULT_INITIAL_VALUE,
    market: MarketSeries | None = None,
) -> Backtest:
    """Buy-and-hold valuation of a weight vector from the first year of ``span``.

    Units ``x_i = w_i * V0 / S_i(start)`` are bought once and never rebalanced.
    """
    w = np.asarray(weights, dtype=float)
    if w.shape != (len(assets),):
        raise DataValidationError(f"{w.size} weights for {len(assets)} assets")
    if initial_value <= 0.0:
        raise DataValidationError("initial_value must be positive")
    start, end = span
    if end < start:
        raise DataValidationError(f"empty span {span}")
    for a in assets:
        gaps = [y for y in range(start, end + 1) if y not in a.prices]
        if gaps:
            raise DataValidationError(f"{a.ticker} missing years {gaps}")

    units = w * initial_value / np.array([a.prices[start] for a in assets])
    snaps = []
    for year in range(start, end + 1):
        prices = np.array([a.prices[year] for a in assets])
        value = initial_value if year == start else float(units @ prices)
        snaps.append(ValuationSnapshot(year, units, prices, value))
    returns = {
        s.year: s.value / prev.value - 1.0 for prev, s in zip(snaps, snaps[1:])
    }
    mret = None
    if market is not None:
        lv = market.index_levels
        mret = {y: lv[y] / lv[y - 1] - 1.0 for y in returns if y in lv and y - 1 in lv}
    return Backtest(tuple(snaps), returns, mret)
