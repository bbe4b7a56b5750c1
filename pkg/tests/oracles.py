"""Independent reference computations used by the tests.

Nothing here imports from greenfolio: each function re-derives its result by
brute force, with explicit loops or mpmath quadrature, so that a bug in the
package cannot hide behind a shared helper.
"""

from __future__ import annotations

import itertools
import math

import mpmath
import numpy as np


def column_means(rows):
    n = len(rows)
    k = len(rows[0])
    return [sum(rows[t][j] for t in range(n)) / n for j in range(k)]


def two_pass_covariance(rows):
    n = len(rows)
    k = len(rows[0])
    mean = column_means(rows)
    cov = [[0.0] * k for _ in range(k)]
    for i in range(k):
        for j in range(k):
            s = 0.0
            for t in range(n):
                s += (rows[t][i] - mean[i]) * (rows[t][j] - mean[j])
            cov[i][j] = s / (n - 1)
    return cov


def metrics_double_loop(w, m, c, es):
    n = len(w)
    mu = sum(w[i] * m[i] for i in range(n))
    var = 0.0
    for i in range(n):
        for j in range(n):
            var += w[i] * w[j] * c[i][j]
    score = sum(w[i] * es[i] for i in range(n))
    return mu, math.sqrt(var), score


def exhaustive_argmax(mu, sigma, es, r_f):
    """Linear scan: best ((mu - r_f) / sigma) * es, ties to lower sigma then index."""
    best = None
    for i in range(len(mu)):
        score = (mu[i] - r_f) / sigma[i] * es[i]
        key = (score, -sigma[i], -i)
        if best is None or key > best[0]:
            best = (key, i)
    return best[1]


def facet_planes(points, facets):
    """Unit outward plane of each triangle, oriented with the point-cloud mean."""
    centre = np.mean(points, axis=0)
    planes = []
    for f in facets:
        a, b, c = (np.asarray(points[i], dtype=float) for i in f)
        n = np.cross(b - a, c - a)
        n = n / np.linalg.norm(n)
        d = -float(n @ a)
        if n @ centre + d > 0:
            n, d = -n, -d
        planes.append((n, d))
    return planes


def max_facet_violation(points, facets, queries):
    worst = -math.inf
    for n, d in facet_planes(points, facets):
        worst = max(worst, float(np.max(np.asarray(queries) @ n + d)))
    return worst


def brute_force_hull_vertices(points, tol=1e-12):
    """Indices of points lying on a supporting plane through three points.

    O(n^4); only for small sets. A point is a hull vertex if it is not in the
    convex hull of the others, tested via a linear program-free approach:
    it must be extreme along some plane spanned by point triples.
    """
    pts = np.asarray(points, dtype=float)
    n = len(pts)
    on_hull = set()
    for i, j, k in itertools.combinations(range(n), 3):
        nrm = np.cross(pts[j] - pts[i], pts[k] - pts[i])
        if np.linalg.norm(nrm) < tol:
            continue
        side = (pts - pts[i]) @ nrm
        if np.all(side <= tol) or np.all(side >= -tol):
            on_hull.update((i, j, k))
            on_hull.update(np.flatnonzero(np.abs(side) <= tol).tolist())
    return on_hull


def normal_equations(x, y):
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    xtx = x.T @ x
    beta = np.linalg.solve(xtx, x.T @ y)
    resid = y - x @ beta
    dof = x.shape[0] - x.shape[1]
    s2 = resid @ resid / dof
    se = np.sqrt(np.diag(s2 * np.linalg.inv(xtx)))
    r2 = 1 - (resid @ resid) / np.sum((y - y.mean()) ** 2)
    return beta, se, r2, dof


def t_cdf_quadrature(t, dof, dps=30):
    """Student-t CDF by integrating the density (mpmath quadrature)."""
    with mpmath.workdps(dps):
        nu = mpmath.mpf(dof)
        c = mpmath.gamma((nu + 1) / 2) / (mpmath.sqrt(nu * mpmath.pi) * mpmath.gamma(nu / 2))

        def pdf(x):
            return c * (1 + x * x / nu) ** (-(nu + 1) / 2)

        tt = mpmath.mpf(t)
        if tt >= 0:
            return float(mpmath.mpf(1) / 2 + mpmath.quad(pdf, [0, tt]))
        return float(mpmath.mpf(1) / 2 - mpmath.quad(pdf, [tt, 0]))


def two_sided_p_quadrature(t, dof):
    return 2.0 * (1.0 - t_cdf_quadrature(abs(t), dof))


def scenario_gaps(levels, losses, last_tf, coef, r_f, settings):
    """Re-evaluate the four default scenarios from raw inputs.

    ``levels`` are the market index levels in year order, ``losses`` the last
    ten annual losses, ``coef`` = (alpha, b_market, b_pf, b_tf). Returns the
    portfolio-minus-market cumulative 3-year gap per scenario, in order
    reference, mild, high, stress.
    """
    base = np.mean([(levels[-1] / levels[-1 - n]) ** (1.0 / n) - 1.0 for n in (10, 15, 20)])

    def pct(p):
        return float(np.percentile(losses, 100 * p))

    med = pct(0.5)
    grid = {
        "reference": ([base] * 3, [med] * 3, 0.006),
        "mild": ([base] * 3, [med, pct(0.70), pct(0.70)], 0.008),
        "high": ([base, base + settings["high_y2_offset"], base],
                 [pct(0.70), pct(0.85), pct(0.80)], 0.0095),
        "stress": ([base, -0.075, base + settings["stress_y3_offset"]],
                   [pct(0.75), 25.0, pct(settings["stress_y3_pct"])], 0.0105),
    }
    alpha, b1, b2, b3 = coef
    gaps = []
    for name in ("reference", "mild", "high", "stress"):
        mkt, pf, dec = grid[name]
        tf = [last_tf - dec * (k + 1) for k in range(3)]
        port = [r_f + alpha + b1 * (mkt[k] - r_f) + b2 * pf[k] + b3 * tf[k] for k in range(3)]
        cum_p = (1 + port[0]) * (1 + port[1]) * (1 + port[2]) - 1
        cum_m = (1 + mkt[0]) * (1 + mkt[1]) * (1 + mkt[2]) - 1
        gaps.append(cum_p - cum_m)
    return gaps
