"""Independent reference computations used by the tests.

Nothing here calls the solvers under test. The cone oracle is a
finite-element QP on a fine grid, solved by a generic conic solver.
"""
import math
import warnings

import numpy as np
import scipy.sparse as sp
from scipy import integrate, stats

from robustrisk.reference import PiecewiseAffine


# ---------------------------------------------------------- quadrature


def choquet(g, cdf, lo, hi, cuts=()):
    """int_0^inf g(1-G) dx + int_-inf^0 (g(1-G) - g(1)) dx on [lo, hi]."""
    g1 = g(1.0)
    pts = sorted({float(c) for c in np.clip([lo, hi, 0.0, *cuts], lo, hi)})

    def f(x):
        v = g(1.0 - cdf(x))
        return v if x >= 0 else v - g1

    tot = 0.0
    for a, b in zip(pts[:-1], pts[1:]):
        if b > a:
            tot += integrate.quad(f, a, b, limit=400, epsabs=1e-13, epsrel=1e-13)[0]
    return tot


def normal_choquet(g, mu, sigma, cuts=()):
    return choquet(g, lambda x: stats.norm.cdf(x, mu, sigma), mu - 40 * sigma,
                   mu + 40 * sigma, cuts)


def weight_moments(gamma, breaks=()):
    """(mean, sd) of a weight function on (0,1) by adaptive quadrature."""
    pts = list(breaks) or None
    m = integrate.quad(gamma, 0, 1, points=pts, limit=400, epsabs=1e-14)[0]
    s = integrate.quad(lambda u: gamma(u) ** 2, 0, 1, points=pts, limit=400, epsabs=1e-14)[0]
    return m, math.sqrt(s - m * m)


# plain distortion functions, written out directly
def g_es(alpha):
    return lambda t: min(t / (1 - alpha), 1.0)


def g_gd(t):
    return t * (1 - t)


def g_var_plus(alpha):
    return lambda t: 1.0 if t >= 1 - alpha else 0.0


# ------------------------------------------------------- cone oracle


def _solve(x, br, lv, xi):
    import cvxpy as cp

    h = np.diff(x)
    m = h.size
    g = PiecewiseAffine(br, lv, np.zeros_like(lv), np.zeros_like(lv))
    pts = np.union1d(x, br)
    a, bb = pts[:-1], pts[1:]
    lev = g((a + bb) / 2)
    j = np.clip(np.searchsorted(x, (a + bb) / 2) - 1, 0, m - 1)
    il = lev * ((x[j + 1] - a) ** 2 - (x[j + 1] - bb) ** 2) / (2 * h[j])
    ir = lev * ((bb - x[j]) ** 2 - (a - x[j]) ** 2) / (2 * h[j])
    b = np.bincount(j, il, m + 1) + np.bincount(j + 1, ir, m + 1)
    main = np.zeros(m + 1)
    main[:-1] += h / 3
    main[1:] += h / 3
    M = sp.diags([main, h / 6, h / 6], [0, 1, -1]).tocsc()
    D1 = sp.diags([-1 / h, 1 / h], [0, 1], shape=(m, m + 1))
    S = sp.diags([np.ones(m - 1), -np.ones(m - 1)], [1, 0], shape=(m - 1, m)) @ D1
    node = x[1:-1]
    sgn = np.where(node < xi, -1.0, np.where(node > xi, 1.0, 0.0))
    A = sp.vstack([D1, sp.diags(sgn) @ S]).tocsr()
    v = cp.Variable(m + 1)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        cp.Problem(cp.Minimize(cp.quad_form(v, M, assume_PSD=True) - 2 * b @ v),
                   [A @ v >= 0]).solve(solver="CLARABEL", tol_gap_abs=1e-14, tol_gap_rel=1e-14,
                                       tol_feas=1e-13, max_iter=2000)
    v = v.value
    return v, np.diff(v) / h


def _repair(x, s, xi, g):
    # solver noise can leave tiny violations; restore shape exactly
    from sklearn.isotonic import IsotonicRegression

    h = np.diff(x)
    mid = (x[:-1] + x[1:]) / 2
    s = s.copy()
    L = mid < xi
    R = ~L
    if L.any():
        s[L] = IsotonicRegression(increasing=False).fit_transform(mid[L], s[L], sample_weight=h[L])
    if R.any():
        s[R] = IsotonicRegression(increasing=True).fit_transform(mid[R], s[R], sample_weight=h[R])
    s = np.maximum(s, 0.0)
    v = np.r_[0.0, np.cumsum(s * h)]
    f = PiecewiseAffine(x, v[:-1] - s * x[:-1], s, np.zeros_like(s))
    shift = g.integral(0, 1) - f.integral(0, 1)
    return PiecewiseAffine(x, f.c0 + shift, s, np.zeros_like(s))


def cone_oracle(br, lv, xi, m=4096, window=64):
    """L2 projection of the step function (br, lv) onto the cone, on a grid.

    Uniform grid with m cells, one local refinement around kinks, then a
    shape repair so the returned function lies in the cone.
    """
    import cvxpy as cp

    br = np.asarray(br, float)
    lv = np.asarray(lv, float)
    g = PiecewiseAffine(br, lv, np.zeros_like(lv), np.zeros_like(lv))
    x = np.union1d(np.linspace(0, 1, m + 1), np.r_[xi, br])
    v, s = _solve(x, br, lv, xi)
    scale = max(np.abs(s).max(), np.abs(lv).max(), 1e-300)
    kink = np.nonzero(np.abs(np.diff(s)) > 1e-3 * scale)[0] + 1
    if kink.size:
        groups = np.split(kink, np.nonzero(np.diff(kink) > 1)[0] + 1)
        add = [np.linspace(x[max(k[0] - 2, 0)], x[min(k[-1] + 2, x.size - 1)], window)
               for k in groups]
        x2 = np.union1d(x, np.concatenate(add))
        x2 = x2[np.r_[True, np.diff(x2) > 1e-10]]
        try:
            _, s = _solve(x2, br, lv, xi)
            x = x2
        except cp.error.SolverError:
            pass
    return _repair(x, s, xi, g)


def l2(p, q, n=200001):
    """Grid L2 distance between two callables on (0,1)."""
    u = (np.arange(n) + 0.5) / n
    return math.sqrt(np.mean((p(u) - q(u)) ** 2))
