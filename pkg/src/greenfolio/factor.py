"""Climate-extended CAPM fitted by ordinary least squares.

The model regresses the portfolio's excess return on the market's excess
return, a physical-risk proxy (annual disaster losses, USD bn) and a
transition-risk proxy (emissions intensity of GDP)::

    r_V - r_f = alpha + b1 (r_m - r_f) + b2 PF + b3 TF + e

Coefficient labels follow the usual regression-table names: ``const`` for
alpha, ``ind`` for the market excess return, ``pf`` and ``tf``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np
from scipy.linalg import solve_triangular
from scipy.special import betainc

from . import DEFAULT_RISK_FREE
from .errors import DataValidationError, NumericalError
from .ingest import IntensitySeries, LossSeries

COEF_NAMES = ("const", "ind", "pf", "tf")
MIN_OBSERVATIONS = 6
PIVOT_TOL = 1e-10


@dataclass(frozen=True)
class FactorModelFit:
    params: np.ndarray
    std_errors: np.ndarray
    t_stats: np.ndarray
    p_values: np.ndarray
    r_squared: float
    n_obs: int
    dof: int
    names: tuple[str, ...] = COEF_NAMES
    years: tuple[int, ...] | None = None

    @property
    def alpha(self) -> float:
        return float(self.params[0])

    @property
    def beta_market(self) -> float:
        return float(self.params[1])

    @property
    def beta_pf(self) -> float:
        return float(self.params[2])

    @property
    def beta_tf(self) -> float:
        return float(self.params[3])

    def to_dict(self) -> dict:
        def by_name(values):
            return {n: float(v) for n, v in zip(self.names, values)}

        return {
            "coefficients": by_name(self.params),
            "std_errors": by_name(self.std_errors),
            "t_stats": by_name(self.t_stats),
            "p_values": by_name(self.p_values),
            "r_squared": float(self.r_squared),
            "n_obs": int(self.n_obs),
            "dof": int(self.dof),
        }

    @classmethod
    def from_coefficients(cls, alpha, beta_market, beta_pf, beta_tf) -> "FactorModelFit":
        """A fit carrying only point estimates, for what-if projections."""
        nan = np.full(4, np.nan)
        return cls(np.array([alpha, beta_market, beta_pf, beta_tf], dtype=float),
                   nan, nan, nan, math.nan, 0, 0)


def t_cdf(t: float, dof: float) -> float:
    """Student-t CDF through the regularised incomplete beta function.

    For ``x = dof / (dof + t**2)`` the two-sided tail is ``I_x(dof/2, 1/2)``;
    computing both signs from that one quantity keeps ``cdf(-t) = 1 - cdf(t)``
    exact and ``cdf(0) = 0.5``.
    """
    if dof <= 0:
        raise NumericalError("t distribution needs positive degrees of freedom")
    if math.isinf(t):
        return 1.0 if t > 0 else 0.0
    tail = 0.5 * float(betainc(0.5 * dof, 0.5, dof / (dof + t * t)))
    return 1.0 - tail if t > 0 else tail


def t_two_sided_p(t: float, dof: float) -> float:
    """Two-sided p-value ``P(|T| >= |t|)``."""
    if math.isinf(t):
        return 0.0
    return float(betainc(0.5 * dof, 0.5, dof / (dof + t * t)))


def assemble_design(
    portfolio_returns: Mapping[int, float],
    market_returns: Mapping[int, float],
    losses: LossSeries,
    intensity: IntensitySeries,
    r_f: float = DEFAULT_RISK_FREE,
) -> tuple[np.ndarray, np.ndarray, tuple[int, ...]]:
    """Build the excess-return response and the 4-column design matrix.

    Rows are the years shared by all four series, in ascending order. PF and
    TF enter as levels of the year in question.
    """
    sources = {
        "portfolio returns": set(portfolio_returns),
        "market returns": set(market_returns),
        "losses": set(losses.entries),
        "intensity": set(intensity.entries),
    }
    years = sorted(set.intersection(*sources.values()))
    if len(years) < MIN_OBSERVATIONS:
        wanted = set(portfolio_returns)
        lacking = {k: sorted(wanted - v) for k, v in sources.items() if wanted - v}
        raise DataValidationError(
            f"only {len(years)} common years (need {MIN_OBSERVATIONS}); missing: {lacking}"
        )
    y = np.array([portfolio_returns[t] - r_f for t in years])
    x = np.column_stack([
        np.ones(len(years)),
        [market_returns[t] - r_f for t in years],
        [losses.entries[t] for t in years],
        [intensity.entries[t] for t in years],
    ])
    return y, x, tuple(years)


def ols_fit(response, design, names: Sequence[str] | None = None) -> FactorModelFit:
    """OLS via a QR factorisation with classical (non-robust) standard errors.

    Raises :class:`NumericalError` when the design is rank deficient (a pivot
    of R below ``1e-10`` relative to the largest) or the response is constant.
    """
    y = np.asarray(response, dtype=float)
    x = np.asarray(design, dtype=float)
    n, k = x.shape
    if y.shape != (n,):
        raise DataValidationError("response length differs from design rows")
    if n <= k:
        raise DataValidationError(f"{n} observations for {k} coefficients")
    names = tuple(names) if names is not None else (COEF_NAMES if k == 4 else
                                                    tuple(f"x{i}" for i in range(k)))

    q, r = np.linalg.qr(x, mode="reduced")
    pivots = np.abs(np.diag(r))
    if pivots.min() <= PIVOT_TOL * pivots.max():
        raise NumericalError("design matrix is rank deficient")
    beta = solve_triangular(r, q.T @ y)
    resid = y - x @ beta
    ssr = float(resid @ resid)
    centred = y - y.mean()
    sst = float(centred @ centred)
    if np.ptp(y) == 0.0 or sst == 0.0:
        raise NumericalError("response has zero variance; R^2 undefined")

    dof = n - k
    r_inv = solve_triangular(r, np.eye(k))
    cov = (ssr / dof) * (r_inv @ r_inv.T)
    se = np.sqrt(np.diag(cov))
    with np.errstate(divide="ignore", invalid="ignore"):
        t = beta / se
    p = np.array([t_two_sided_p(v, dof) for v in t])
    return FactorModelFit(
        params=beta,
        std_errors=se,
        t_stats=t,
        p_values=p,
        r_squared=min(1.0, max(0.0, 1.0 - ssr / sst)),
        n_obs=n,
        dof=dof,
        names=names,
    )


def fit_factor_model(
    portfolio_returns: Mapping[int, float],
    market_returns: Mapping[int, float],
    losses: LossSeries,
    intensity: IntensitySeries,
    r_f: float = DEFAULT_RISK_FREE,
) -> FactorModelFit:
    y, x, years = assemble_design(portfolio_returns, market_returns, losses, intensity, r_f)
    fit = ols_fit(y, x)
    return FactorModelFit(**{**fit.__dict__, "years": years})
