"""Distributionally robust portfolio selection.

For weights w the portfolio set reduces to a univariate set with
mean w'mu, sd sqrt(w'S0 w), radius eps*|w|^2 and reference F_{w'X0}.
Elliptical references admit closed forms written in the standardized
reference F0 with multiplier kappa = lam * sd.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize as sopt

from .distortion import MetricSpec, make_distortion, parse_metric, usc_version, weight_of
from .envelope import threshold_es_var, threshold_gluevar, threshold_iqd, threshold_var_plus
from .reference import (EmpiricalQuantile, NormalQuantile, ParameterError, location_scale,
                        standardized_t)
from .worstcase import InfeasibleError, MomentWassersteinSet, NumericError, worst_case

CONCAVE = ("gd", "mmd", "es", "identity")
CLOSED = CONCAVE + ("iqd+", "iqd-", "var", "var+", "gluevar", "gluevar+")


@dataclass(frozen=True)
class EllipticalReference:
    generator: str = "normal"
    df: float | None = None

    def __post_init__(self):
        if self.generator not in ("normal", "t"):
            raise ParameterError("generator must be 'normal' or 't'")
        if self.generator == "t" and not (self.df and self.df > 2):
            raise ParameterError("t generator needs df > 2")

    def standard(self):
        """F0 with mean 0 and variance 1."""
        if self.generator == "normal":
            return NormalQuantile(0.0, 1.0)
        return standardized_t(self.df)


@dataclass(frozen=True)
class SampleReference:
    rows: np.ndarray

    def __post_init__(self):
        r = np.atleast_2d(np.asarray(self.rows, dtype=float))
        object.__setattr__(self, "rows", r)


@dataclass(frozen=True, eq=False)
class PortfolioProblem:
    mu_vec: np.ndarray
    sigma0: np.ndarray
    epsilon: float
    metric: object
    reference: object = field(default_factory=EllipticalReference)
    bound: float | None = None
    xi: float | None = None

    def __post_init__(self):
        mu = np.asarray(self.mu_vec, dtype=float).ravel()
        s0 = np.atleast_2d(np.asarray(self.sigma0, dtype=float))
        object.__setattr__(self, "mu_vec", mu)
        object.__setattr__(self, "sigma0", s0)
        if s0.shape != (mu.size, mu.size):
            raise ParameterError("covariance shape does not match the mean vector")
        if not np.allclose(s0, s0.T, atol=1e-12):
            raise ParameterError("covariance must be symmetric")
        try:
            np.linalg.cholesky(s0)
        except np.linalg.LinAlgError:
            raise ParameterError("covariance must be positive definite") from None
        if not self.epsilon > 0:
            raise ParameterError("epsilon must be positive")
        m = self.metric
        if isinstance(m, str):
            m = parse_metric(m)
        object.__setattr__(self, "metric", m)
        if isinstance(self.reference, SampleReference) and self.reference.rows.shape[1] != mu.size:
            raise ParameterError("sample rows do not match the number of assets")
        if self.bound is not None:
            lp = sopt.linprog(np.zeros(mu.size), A_ub=[mu], b_ub=[self.bound],
                                  A_eq=[np.ones(mu.size)], b_eq=[1.0], bounds=[(0, None)] * mu.size)
            if lp.status != 0:
                raise ParameterError("admissible set {w in simplex : w'mu <= bound} is empty")

    @property
    def n(self):
        return self.mu_vec.size

    @property
    def distortion(self):
        return make_distortion(self.metric)

    def admissible(self, w, tol=1e-10):
        w = np.asarray(w, dtype=float)
        ok = np.all(w >= -tol) and abs(w.sum() - 1) <= tol
        if self.bound is not None:
            ok = ok and float(w @ self.mu_vec) <= self.bound + tol
        return bool(ok)


@dataclass
class PortfolioResult:
    weights: np.ndarray
    objective: float
    lambda_w: float | None
    diagnostics: dict = field(default_factory=dict)

    def to_dict(self):
        return {"weights": [float(x) for x in self.weights], "objective": self.objective,
                "lambda_w": self.lambda_w,
                "diagnostics": {k: v for k, v in self.diagnostics.items()
                                if isinstance(v, (int, float, str, bool, type(None)))}}


# ----------------------------------------------------------------- reduce


def _stats(problem, w):
    w = np.asarray(w, dtype=float)
    m = float(w @ problem.mu_vec)
    var = float(w @ problem.sigma0 @ w)
    if var <= 0:
        raise ParameterError(f"degenerate direction w={w}: zero portfolio variance")
    return m, math.sqrt(var), problem.epsilon * float(w @ w)


def reduce(problem, w):
    m, s, e = _stats(problem, w)
    ref = problem.reference
    if isinstance(ref, EllipticalReference):
        F = location_scale(ref.standard(), m, s)
    elif isinstance(ref, SampleReference):
        F = EmpiricalQuantile(ref.rows @ np.asarray(w, dtype=float))
    else:
        raise ParameterError("unknown reference type")
    return MomentWassersteinSet(m, s, e, F)


# ------------------------------------------------------------ closed forms


def _concave_consts(g, F0):
    w = weight_of(g)
    mean, var = w.mean_var()
    c0 = w.inner(F0.as_segments())
    return var, c0


def closed_concave(problem, w, F0=None):
    """Concave g: value and multiplier through B_w and A_w."""
    g = problem.distortion
    F0 = F0 or problem.reference.standard()
    m, s, e = _stats(problem, w)
    V, C0 = _concave_consts(g, F0)
    g1 = g.total
    if V <= 1e-300:
        return m * g1, 0.0
    s2 = s * s
    A = max(s2 - e / 2, C0 * s2 / math.sqrt(V))
    if A >= s2:
        B = 0.0
    elif A == C0 * s2 / math.sqrt(V):
        B = 0.0
    else:
        # B = kappa, normalised so the target correlation is A/s^2
        B = -C0 + math.sqrt((C0 * C0 - V) * A * A / (A * A - s2 * s2))
    val = m * g1 + s * (V + C0 * B) / math.sqrt(V + 2 * C0 * B + B * B)
    return val, B / s


class _Pieces:
    """k(u) on F0 as (l, r, const, kappa-coefficient) with closed integrals."""

    def __init__(self, F0, pieces):
        self.F0 = F0
        self.p = [q for q in pieces if q[1] > q[0]]

    def moments(self):
        F0 = self.F0
        mean = sq = cov = 0.0
        for l, r, c, a in self.p:
            pi = F0.partial_integral(l, r)
            si = F0.square_integral(l, r) if a else 0.0
            mean += c * (r - l) + a * pi
            sq += c * c * (r - l) + 2 * c * a * pi + a * a * si
            cov += c * pi + a * si
        return mean, sq - mean * mean, cov - mean * F0.mean

    def integral(self, lo, hi):
        tot = 0.0
        for l, r, c, a in self.p:
            l2, r2 = max(l, lo), min(r, hi)
            if r2 > l2:
                tot += c * (r2 - l2) + a * self.F0.partial_integral(l2, r2)
        return tot


def _var_pieces(alpha, kappa, F0):
    t, _ = threshold_var_plus(alpha, kappa, F0)
    c = (1.0 + kappa * F0.partial_integral(alpha, 1 - t)) / (1 - alpha - t)
    return [(0, alpha, 0, kappa), (alpha, 1 - t, c, 0), (1 - t, 1, 0, kappa)], c


def _iqd_pieces(alpha, kappa, F0):
    (t1, t2), _ = threshold_iqd(alpha, kappa, F0)
    c1 = (1 + kappa * F0.partial_integral(1 - alpha, 1 - t1)) / (alpha - t1)
    c2 = (kappa * F0.partial_integral(1 - t2, alpha) - 1) / (t2 - 1 + alpha)
    return [(0, 1 - t2, 0, kappa), (1 - t2, alpha, c2, 0), (alpha, 1 - alpha, 0, kappa),
            (1 - alpha, 1 - t1, c1, 0), (1 - t1, 1, 0, kappa)], (c1, c2)


def _glue_pieces(beta, alpha, h1, h2, kappa, F0):
    (u, c), _ = threshold_gluevar(alpha, beta, h1, h2, kappa, F0)
    s1 = h1 / (1 - beta)
    s2 = (h2 - h1) / (beta - alpha) if beta > alpha else s1
    lo = 1 - u
    p = [(0, alpha, 0, kappa), (alpha, lo, c, 0)]
    if lo < beta:
        p.append((lo, beta, s2, kappa))
    p.append((max(lo, beta), 1, s1, kappa))
    return p, c


def _family_pieces(spec, kappa, F0):
    f, p = spec.family, spec.params
    if f in ("var", "var+"):
        return _var_pieces(p[0], kappa, F0)
    if f in ("iqd+", "iqd-"):
        return _iqd_pieces(p[0], kappa, F0)
    return _glue_pieces(*p, kappa, F0)


def _family_value(spec, pieces, extra, F0):
    """rho of the standardized extremal quantile, i.e. (value - g(1) m)/s."""
    k = _Pieces(F0, pieces)
    mean, var, _ = k.moments()
    sd = math.sqrt(var)
    f, p = spec.family, spec.params
    if f in ("var", "var+"):
        return (extra - mean) / sd
    if f in ("iqd+", "iqd-"):
        c1, c2 = extra
        return (c1 - c2) / sd
    beta, alpha, h1, h2 = p
    s1 = h1 / (1 - beta)
    s2 = (h2 - h1) / (beta - alpha) if beta > alpha else 0.0
    tot = s1 * (k.integral(beta, 1) - mean * (1 - beta))
    if beta > alpha:
        tot += s2 * (k.integral(alpha, beta) - mean * (beta - alpha))
    tot += (1 - h2) * (extra - mean)
    return tot / sd


def _family_corr(spec, kappa, F0):
    pieces, _ = _family_pieces(spec, kappa, F0)
    _, var, cov = _Pieces(F0, pieces).moments()
    return cov / (math.sqrt(var) * F0.std)


def solve_lambda_w(problem, w, F0=None):
    """kappa/s for the activated Wasserstein constraint, else 0."""
    spec = problem.metric
    F0 = F0 or problem.reference.standard()
    m, s, e = _stats(problem, w)
    if spec.family in CONCAVE:
        return closed_concave(problem, w, F0)[1]
    target = 1 - e / (2 * s * s)
    c0 = _family_corr(spec, 0.0, F0)
    if not (2 * s * s * (1 - c0) > e):
        return 0.0
    f = lambda kap: _family_corr(spec, kap, F0) - target  # noqa: E731
    hi = 1.0
    n = 0
    while f(hi) < 0:
        hi *= 2
        n += 1
        if n > 200:
            raise NumericError(f"could not bracket eta for w={w}")
    kappa = sopt.brentq(f, 0.0 if hi == 1.0 else hi / 2, hi, xtol=1e-300, rtol=1e-13)
    return kappa / s


def closed_objective(problem, w, F0=None):
    spec = problem.metric
    if spec.family not in CLOSED or not isinstance(problem.reference, EllipticalReference):
        raise ParameterError(f"no closed form for {spec} with this reference")
    F0 = F0 or problem.reference.standard()
    if spec.family in CONCAVE:
        return closed_concave(problem, w, F0)
    if spec.family.startswith("gluevar"):
        beta, alpha, h1, h2 = spec.params
        if beta > alpha and h1 / (1 - beta) < (h2 - h1) / (beta - alpha) - 1e-12:
            raise ParameterError("GlueVaR closed form needs h1/(1-beta) >= (h2-h1)/(beta-alpha)")
    m, s, _ = _stats(problem, w)
    lam = solve_lambda_w(problem, w, F0)
    pieces, extra = _family_pieces(spec, lam * s, F0)
    g1 = make_distortion(spec).total
    return m * g1 + s * _family_value(spec, pieces, extra, F0), lam


def _has_closed(problem):
    spec = problem.metric
    if spec.family not in CLOSED or not isinstance(problem.reference, EllipticalReference):
        return False
    if spec.family.startswith("gluevar"):
        beta, alpha, h1, h2 = spec.params
        return beta == alpha or h1 / (1 - beta) >= (h2 - h1) / (beta - alpha) - 1e-12
    return True


def objective(problem, w, path="auto"):
    """Robust objective sup rho_g over the reduced set; returns (value, lambda)."""
    if path == "auto":
        path = "closed" if _has_closed(problem) and problem.xi is None else "generic"
    if problem.xi is not None:
        from .unimodal import worst_case_unimodal_wasserstein
        S = reduce(problem, w)
        # the admissible set needs eps strictly above the threshold
        r = worst_case_unimodal_wasserstein(problem.distortion, S, problem.xi, strict=True)
        return r.value, r.lam
    if path == "closed":
        return closed_objective(problem, w)
    try:
        r = worst_case(problem.distortion, reduce(problem, w))
    except InfeasibleError as exc:
        raise InfeasibleError(f"w={list(np.round(w, 12))}: {exc}", exc.threshold) from None
    return r.value, r.lam


# --------------------------------------------------------------- search


def _project_simplex(v):
    v = np.asarray(v, dtype=float)
    u = np.sort(v)[::-1]
    css = np.cumsum(u) - 1
    k = np.nonzero(u - css / np.arange(1, v.size + 1) > 0)[0][-1]
    return np.maximum(v - css[k] / (k + 1), 0.0)


def _w1_range(problem):
    """Feasible interval for w1 when n = 2."""
    lo, hi = 0.0, 1.0
    if problem.bound is not None:
        m1, m2 = problem.mu_vec
        # w1*m1 + (1-w1)*m2 <= bound
        d = m1 - m2
        if d > 0:
            hi = min(hi, (problem.bound - m2) / d)
        elif d < 0:
            lo = max(lo, (problem.bound - m2) / d)
        elif m2 > problem.bound:
            lo, hi = 1.0, 0.0
    return lo, hi


def optimize_weights(problem, seed=0, n_starts=8, path="auto", fn=None):
    """Multistart Nelder-Mead on the simplex; n = 2 uses a grid scan and bounded Brent."""
    rng = np.random.default_rng(seed)
    n = problem.n
    cache = {}
    diag = {"evaluations": 0, "failures": 0}

    def val(w):
        w = _project_simplex(w)
        key = tuple(np.round(w, 14))
        if key in cache:
            return cache[key][0]
        if not problem.admissible(w, 1e-9):
            cache[key] = (math.inf, None)
            return math.inf
        try:
            v, lam = fn(w) if fn else objective(problem, w, path)
        except (InfeasibleError, NumericError, ArithmeticError, ValueError):
            diag["failures"] += 1
            v, lam = math.inf, None
        diag["evaluations"] += 1
        cache[key] = (v, lam)
        return v

    starts = [np.eye(n)[i] for i in range(n)] + [np.full(n, 1.0 / n)]
    while len(starts) < n_starts:
        starts.append(rng.dirichlet(np.ones(n)))
    starts = starts[:max(n_starts, 1)]
    best_w, best_v = None, math.inf
    for w0 in starts:
        v0 = val(w0)
        if v0 < best_v:
            best_w, best_v = _project_simplex(w0), v0
        if n > 2:
            res = sopt.minimize(val, w0, method="Nelder-Mead",
                                    options={"xatol": 1e-9, "fatol": 1e-13, "maxfev": 400 * n})
            wv = _project_simplex(res.x)
            v = val(wv)
            if v < best_v:
                best_w, best_v = wv, v
    if n == 2:
        lo, hi = _w1_range(problem)
        grid = np.linspace(lo, hi, 101)
        vals = [val(np.array([a, 1 - a])) for a in grid]
        k = int(np.argmin(vals))
        if vals[k] < best_v:
            best_w, best_v = np.array([grid[k], 1 - grid[k]]), vals[k]
        a, b = grid[max(k - 1, 0)], grid[min(k + 1, grid.size - 1)]
        res = sopt.minimize_scalar(lambda x: val(np.array([x, 1 - x])), bounds=(a, b),
                                       method="bounded", options={"xatol": 1e-10})
        wv = np.array([res.x, 1 - res.x])
        v = val(wv)
        if v < best_v or (v == best_v and tuple(wv) < tuple(best_w)):
            best_w, best_v = wv, v
    if not math.isfinite(best_v):
        raise NumericError(f"all starts failed ({diag})")
    best_w = _project_simplex(best_w)
    lam = cache.get(tuple(np.round(best_w, 14)), (None, None))[1]
    return PortfolioResult(best_w, float(best_v), lam, diag)


def optimize_unimodal(problem, seed=0, n_starts=8):
    """Search with the unimodal bound; eps = inf uses the b-hat closed form."""
    if problem.xi is None:
        raise ParameterError("optimize_unimodal needs problem.xi")
    from .unimodal import unimodal_b_hat
    g = problem.distortion
    if math.isinf(problem.epsilon):
        b_hat = unimodal_b_hat(g, problem.xi)

        def fn(w):
            m, s, _ = _stats(problem, w)
            return m * g.total + b_hat * s, 0.0
        return optimize_weights(problem, seed, n_starts, fn=fn)
    return optimize_weights(problem, seed, n_starts)


def optimize(problem, seed=0, n_starts=8, path="auto"):
    if problem.xi is not None:
        return optimize_unimodal(problem, seed, n_starts)
    return optimize_weights(problem, seed, n_starts, path)


def metric_total(spec):
    return make_distortion(spec).total


__all__ = ["EllipticalReference", "SampleReference", "PortfolioProblem", "PortfolioResult",
           "reduce", "objective", "solve_lambda_w", "optimize", "optimize_unimodal",
           "closed_objective"]
