"""Projections onto unimodal quantile cones and the bounds built on them.

A member of the cone with inflection xi is written as

    P(u) = b + sum_{tau <= xi} theta_tau min(u, tau) + sum_{tau >= xi} eta_tau (u - tau)_+

with theta, eta >= 0: non-decreasing, concave left of xi, convex right of it.
For fixed knots the L2 fit is a non-negative least-squares problem, which
Gauss-Legendre with two nodes per piece integrates exactly when the target
is piecewise linear. Kink positions inside each piece are then refined.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize
from scipy.optimize import nnls

from .distortion import weight_of
from .reference import (ParameterError, PiecewiseAffine, SegmentQuantile, refined_grid)
from .worstcase import BoundResult, InfeasibleError, NumericError

GL = 1.0 / math.sqrt(3.0)
MAX_EXACT = 40          # pieces above this use fixed mid-piece kinks
FAST_PIECES = 256


class DegenerateProjection(ArithmeticError):
    """The projection is constant (b-hat = 0)."""


@dataclass(frozen=True)
class UnimodalCone:
    xi: float | None = None
    interval: tuple | None = None

    def __post_init__(self):
        if (self.xi is None) == (self.interval is None):
            raise ParameterError("give either xi or an interval")
        if self.xi is not None and not 0.0 <= self.xi <= 1.0:
            raise ParameterError("xi must lie in [0, 1]")
        if self.interval is not None:
            lo, hi = self.interval
            if not 0.0 <= lo < hi <= 1.0:
                raise ParameterError("interval must satisfy 0 <= xi1 < xi2 <= 1")

    def contains(self, f, tol=1e-9):
        if self.interval is not None:
            lo, hi = self.interval
            return any(in_cone(f, x, tol) for x in np.linspace(lo, hi, 65))
        return in_cone(f, self.xi, tol)


def _linear_in_cone(p, xi, tol):
    """p without a base part: continuous, non-decreasing, slopes down then up at xi."""
    inner = p.breaks[1:-1]
    if inner.size:
        lv = p.c0[:-1] + p.c1[:-1] * inner
        rv = p.c0[1:] + p.c1[1:] * inner
        if np.any(np.abs(lv - rv) > tol * (1 + np.abs(lv))):
            return False
    s = p.c1
    if np.any(s < -tol):
        return False
    mid = 0.5 * (p.breaks[:-1] + p.breaks[1:])
    left, right = s[mid < xi], s[mid > xi]
    return bool(np.all(np.diff(left) <= tol) and np.all(np.diff(right) >= -tol))


def in_cone(f, xi, tol=1e-9):
    """Sufficient test for cone membership; exact for functions without a base part."""
    if isinstance(f, SegmentQuantile):
        f = f.segments
    if not f.uses_base:
        return _linear_in_cone(f, xi, tol)
    lam = np.unique(f.c2)
    if lam.size != 1 or lam[0] < 0:
        return False
    inf = f.base.inflection_set()
    if inf is None or not (inf[0] - tol <= xi <= inf[1] + tol):
        return False
    rest = PiecewiseAffine(f.breaks, f.c0, f.c1, np.zeros_like(f.c2))
    return _linear_in_cone(rest, xi, tol)


# ------------------------------------------------------------------ NNLS core


def _nodes(cuts):
    a, b = cuts[:-1], cuts[1:]
    mid, half = 0.5 * (a + b), 0.5 * (b - a)
    u = np.concatenate([mid - GL * half, mid + GL * half])
    return u, np.concatenate([half, half])


def _nnls_warm(A, b, passive):
    """Lawson-Hanson active set started from a previous passive set.

    Consecutive lambda steps change the active set only a little, so this
    usually finishes in a handful of least-squares solves.
    """
    m, n = A.shape
    q, r = np.linalg.qr(A)
    c = q.T @ b
    P = passive.copy()
    x = np.zeros(n)
    tol = 10 * max(m, n) * np.finfo(float).eps * np.abs(A).sum(0).max() * max(1.0, np.abs(b).max())

    def ls(P):
        z = np.zeros(n)
        if P.any():
            z[P] = np.linalg.lstsq(r[:, P], c, rcond=None)[0]
        return z

    for _ in range(n):
        z = ls(P)
        bad = P & (z <= 0)
        if not bad.any():
            x = z
            break
        P &= ~bad
    for _ in range(3 * n):
        w = r.T @ (c - r @ x)
        w[P] = -np.inf
        j = int(np.argmax(w))
        if w[j] <= tol:
            return x
        P[j] = True
        while True:
            z = ls(P)
            neg = P & (z <= 0)
            if not neg.any():
                x = z
                break
            xs, zs = x[neg], z[neg]
            x = x + np.min(xs / (xs - zs)) * (z - x)
            P &= x > 1e-14
            x[~P] = 0.0
    return None


def _fit(target, left, right, cuts, warm=None):
    """Least-squares cone fit for fixed knots; returns (coef, intercept, residual^2).

    warm: optional dict carrying the previous active set between calls.
    """
    pts = np.unique(np.concatenate([[0.0, 1.0], cuts, left, right]))
    u, w = _nodes(pts)
    y = target(u)
    X = np.hstack([np.minimum(u[:, None], left[None, :]),
                   np.maximum(u[:, None] - right[None, :], 0.0)])
    ybar, Xbar = w @ y, w @ X
    sw = np.sqrt(w)
    A = sw[:, None] * (X - Xbar)
    b = sw * (y - ybar)
    if A.shape[1] == 0:
        return np.zeros(0), ybar, float(b @ b)
    coef = None
    prev = None if warm is None else warm.get("passive")
    if prev is not None and prev.size == A.shape[1]:
        coef = _nnls_warm(A, b, prev)
    if coef is None:
        coef = nnls(A, b, maxiter=50 * A.shape[1])[0]
    if warm is not None:
        warm["passive"] = coef > 0
    res = A @ coef - b
    return coef, float(ybar - Xbar @ coef), float(res @ res)


def _assemble(left, right, coef, intercept):
    """Continuous piecewise-linear PiecewiseAffine from knots and coefficients."""
    nl = left.size
    th, et = coef[:nl], coef[nl:]
    keep_l, keep_r = th > 0, et > 0
    L, R, th, et = left[keep_l], right[keep_r], th[keep_l], et[keep_r]
    br = np.unique(np.concatenate([[0.0, 1.0], L, R]))
    br = br[(br >= 0) & (br <= 1)]

    def P(u):
        u = np.asarray(u, dtype=float)
        return (intercept + np.minimum(u[..., None], L).dot(th)
                + np.maximum(u[..., None] - R, 0.0).dot(et))
    v = P(br)
    slope = np.diff(v) / np.diff(br)
    return PiecewiseAffine(br, v[:-1] - slope * br[:-1], slope, np.zeros_like(slope)), (L, th, R, et)


# ------------------------------------------------------------ result type


@dataclass
class ConeProjection:
    projected: PiecewiseAffine
    a_hat: float
    b_hat: float
    xi: float
    source: PiecewiseAffine | None = None
    parameters: dict = field(default_factory=dict)
    diagnostics: dict = field(default_factory=dict)

    def __call__(self, u):
        return self.projected(u)

    @property
    def degenerate(self):
        return self.b_hat <= 1e-12

    def orthogonality(self):
        """(<g - P, P>, <g - P, 1>) for the source weight g."""
        if self.source is None:
            raise ParameterError("no source stored")
        g, P = self.source, self.projected
        gp = _ip(g, P)
        return gp - P.square(), g.integral() - P.integral()

    def residual(self):
        g, P = self.source, self.projected
        return math.sqrt(max(g.square() - 2 * _ip(g, P) + P.square(), 0.0))

    def quantile(self, mu, sigma):
        """mu + sigma (P - a)/b as a quantile function."""
        if self.degenerate:
            raise DegenerateProjection("projection is constant")
        s = sigma / self.b_hat
        return SegmentQuantile(self.projected.affine(mu - s * self.a_hat, s), check=False)

    def to_csv(self, path, n=401):
        u = np.linspace(0.0, 1.0, n)
        u[0], u[-1] = 1e-9, 1 - 1e-9
        src = self.source(u) if self.source is not None else np.full(n, np.nan)
        with open(path, "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(["u", "gamma", "projected"])
            for row in zip(u, src, self.projected(u)):
                wr.writerow([f"{x:.12g}" for x in row])

    def to_dict(self):
        d = {"xi": self.xi, "a_hat": self.a_hat, "b_hat": self.b_hat,
             "pieces": int(self.projected.n_segments)}
        d.update({k: v for k, v in self.diagnostics.items()
                  if isinstance(v, (int, float, str, bool))})
        return d


def _ip(p, q):
    if p.uses_base and q.uses_base and p.base is not q.base:
        from .reference import _quad_product
        return _quad_product(p, q)
    return p.inner(q)


def _from_member(f, xi, source=None, **diag):
    a, var = f.mean_var()
    return ConeProjection(f, a, math.sqrt(var), xi, source if source is not None else f,
                          {}, dict(diag, fixed_point=True))


# -------------------------------------------------------------- step QP


def _as_step(gamma):
    if isinstance(gamma, tuple):
        br, lv = gamma
        br, lv = np.asarray(br, float), np.asarray(lv, float)
        return PiecewiseAffine(br, lv, np.zeros_like(lv), np.zeros_like(lv))
    return gamma


def _split(breaks, xi):
    b = np.asarray(breaks, dtype=float)
    if 0.0 < xi < 1.0 and not np.any(np.abs(b - xi) < 1e-15):
        b = np.sort(np.append(b, xi))
    return b


def _base_knots(cuts, xi):
    inner = cuts[1:-1]
    L = inner[inner < xi]
    R = inner[inner > xi]
    if xi > 0:
        L = np.append(L, xi)
    if xi < 1:
        R = np.insert(R, 0, xi)
    return L, R


def _scan_min(f, a, b, m=16, polish=3):
    """Grid scan then bounded Brent on the best few brackets (1-D, possibly multimodal).

    The grid is dense near both ends: kinks often hug a breakpoint.
    """
    fr = np.union1d(np.arange(1, m) / m, [0.002, 0.01, 0.03, 0.97, 0.99, 0.998])
    x = a + (b - a) * fr
    fx = np.array([f(t) for t in x])
    ext = np.r_[np.inf, fx, np.inf]
    loc = np.nonzero((fx <= ext[:-2]) & (fx <= ext[2:]))[0]
    loc = loc[np.argsort(fx[loc])][:polish]
    k = int(np.argmin(fx))
    bx, bf = float(x[k]), float(fx[k])
    for j in loc:
        lo = x[j - 1] if j > 0 else a
        hi = x[j + 1] if j < x.size - 1 else b
        r = optimize.minimize_scalar(f, bounds=(lo, hi), method="bounded",
                                     options={"xatol": 1e-13 * max(1.0, b - a)})
        if r.fun < bf:
            bx, bf = float(r.x), float(r.fun)
    return bx, bf


def project_step(gamma, xi, refine=True, starts=5, seed=0, tol=1e-12, warm=None):
    """Project a step (or piecewise-linear) weight onto the cone with inflection xi.

    gamma: PiecewiseAffine without a base part, or (breaks, levels).
    """
    gamma = _as_step(gamma)
    if gamma.uses_base:
        raise ParameterError("project_step needs a weight without a quantile part")
    if not 0.0 <= xi <= 1.0:
        raise ParameterError("xi must lie in [0, 1]")
    if in_cone(gamma, xi, 1e-12):
        return _from_member(gamma, xi)
    cuts = _split(gamma.breaks, xi)
    L0, R0 = _base_knots(cuts, xi)
    lo, hi = cuts[:-1], cuts[1:]
    n_int = lo.size
    side_left = hi <= xi

    def knots(kinks):
        kl = [k for k, s in zip(kinks, side_left) if k is not None and s]
        kr = [k for k, s in zip(kinks, side_left) if k is not None and not s]
        return np.sort(np.append(L0, kl)), np.sort(np.append(R0, kr))

    def value(kinks):
        L, R = knots(kinks)
        return _fit(gamma, L, R, cuts)

    # dense candidates give the active pieces and a starting point
    m = 7 if refine and n_int <= MAX_EXACT else 1
    frac = np.arange(1, m + 1) / (m + 1)
    dense = [lo[i] + frac * (hi[i] - lo[i]) for i in range(n_int)]
    Ld = np.sort(np.concatenate([L0] + [d for d, s in zip(dense, side_left) if s]))
    Rd = np.sort(np.concatenate([R0] + [d for d, s in zip(dense, side_left) if not s]))
    coef, icpt, res = _fit(gamma, Ld, Rd, cuts, None if refine else warm)
    best = (res, Ld, Rd, coef, icpt)
    sweeps = 0
    if refine and n_int <= MAX_EXACT:
        nl = Ld.size
        wts = np.concatenate([coef[:nl], coef[nl:]])
        pos = np.concatenate([Ld, Rd])
        init = []
        for i in range(n_int):
            sel = (pos > lo[i]) & (pos < hi[i]) & (wts > 0)
            init.append(float(np.average(pos[sel], weights=wts[sel])) if sel.any() else None)
        # a weighted breakpoint may really be a kink just inside a neighbouring piece
        for p in pos[(wts > 0)]:
            for i in np.nonzero((np.abs(lo - p) < 1e-15) | (np.abs(hi - p) < 1e-15))[0]:
                if init[i] is None:
                    init[i] = float(lo[i] + (hi[i] - lo[i]) * (0.02 if lo[i] == p else 0.98))
        active = [i for i in range(n_int) if init[i] is not None]
        rng = np.random.default_rng(seed)
        inits = [init]
        for f in (0.5, 1 / 3, 2 / 3):
            inits.append([lo[i] + f * (hi[i] - lo[i]) if i in active else None for i in range(n_int)])
        while len(inits) < starts:
            inits.append([rng.uniform(lo[i], hi[i]) if i in active else None for i in range(n_int)])
        for k0 in inits[:max(starts, 1)]:
            kinks = list(k0)
            cur = value(kinks)[2]
            for _ in range(100):
                prev = cur
                for i in active:
                    def f(a, i=i):
                        trial = list(kinks)
                        trial[i] = a
                        return value(trial)[2]
                    a_new, f_new = _scan_min(f, lo[i], hi[i])
                    if f_new < cur:
                        kinks[i], cur = a_new, f_new
                sweeps += 1
                if prev - cur < tol:
                    break
            L, R = knots(kinks)
            c, ic, rr = _fit(gamma, L, R, cuts)
            if rr < best[0]:
                best = (rr, L, R, c, ic)
    res, L, R, coef, icpt = best
    P, (Lk, th, Rk, et) = _assemble(L, R, coef, icpt)
    a, var = P.mean_var()
    params = {"left_knots": Lk.tolist(), "theta": th.tolist(), "right_knots": Rk.tolist(),
              "eta": et.tolist(), "intercept": icpt}
    diag = {"residual": math.sqrt(max(res, 0.0)), "sweeps": sweeps, "pieces_in": n_int,
            "refined": bool(refine and n_int <= MAX_EXACT), "fixed_point": False}
    return ConeProjection(P, a, math.sqrt(var), xi, gamma, params, diag)


# -------------------------------------------------------- general weights


def step_approximation(f, grid):
    """L2-best step function of f on the given u-grid (interval averages)."""
    grid = np.asarray(grid, dtype=float)
    lv = np.array([f.integral(a, b) / (b - a) for a, b in zip(grid[:-1], grid[1:])])
    return PiecewiseAffine(grid, lv, np.zeros_like(lv), np.zeros_like(lv))


def _grid_for(f, n):
    if f.uses_base:
        g = refined_grid(n + 1, 2.0)
    else:
        g = np.linspace(0.0, 1.0, n + 1)
    return np.union1d(g, f.breaks)


def _is_step(f):
    return not f.uses_base and np.all(f.c1 == 0)


def _l2_dist(p, q):
    return math.sqrt(max(p.square() - 2 * _ip(p, q) + q.square(), 0.0))


def project(gamma, xi, n=FAST_PIECES, refine=None, warm=None):
    """Project a weight (any PiecewiseAffine) onto the cone with inflection xi.

    Cone members are returned unchanged. Step weights with few pieces are
    projected exactly. Anything else is replaced by its n-piece step
    average first and the error bounds are reported in diagnostics.
    """
    gamma = _as_step(gamma)
    if in_cone(gamma, xi, 1e-12):
        return _from_member(gamma, xi)
    if _is_step(gamma) and gamma.n_segments <= MAX_EXACT:
        return project_step(gamma, xi, refine=True if refine is None else refine)
    if not gamma.uses_base and gamma.n_segments <= MAX_EXACT and refine is not False:
        # piecewise-linear targets are handled exactly by the same fit
        return project_step(gamma, xi, refine=True)
    step = step_approximation(gamma, _grid_for(gamma, n))
    pr = project_step(step, xi, refine=False if refine is None else refine, warm=warm)
    d = _l2_dist(gamma, step)
    pr.source = gamma
    pr.diagnostics["step_pieces"] = int(step.n_segments)
    pr.diagnostics["step_error"] = d
    if pr.b_hat > 0:
        ng, nn = math.sqrt(gamma.square()), math.sqrt(step.square())
        pr.diagnostics["projection_bound"] = d
        pr.diagnostics["quantile_bound_per_sigma"] = (2 + (2 * ng + nn) / pr.b_hat) * d / pr.b_hat
        pr.diagnostics["value_bound_per_sigma"] = (2 * ng + nn) * d / pr.b_hat
    return pr


# ------------------------------------------------------------------ bounds


def _weight(g):
    try:
        return weight_of(g)
    except ParameterError as exc:
        raise ParameterError(f"unimodal bounds need an absolutely continuous g: {exc}") from None


def unimodal_b_hat(g, xi):
    return project(_weight(g), xi).b_hat


def worst_case_unimodal(g, mu, sigma, xi):
    """sup rho_g over unimodal (inflection xi) laws with mean mu and sd sigma."""
    if not sigma > 0:
        raise ParameterError("sigma must be positive")
    gam = _weight(g)
    pr = project(gam, xi)
    diag = {"a_hat": pr.a_hat, "b_hat": pr.b_hat, "xi": xi}
    diag.update({k: v for k, v in pr.diagnostics.items() if isinstance(v, (int, float, bool))})
    if pr.degenerate:
        return BoundResult(g.total * mu, 0.0, None, "constant_gstar", True, diag)
    h = pr.quantile(mu, sigma)
    val = _ip(gam, h.segments)
    return BoundResult(val, 0.0, h, "unimodal", True, diag)


def _corr(p, q):
    mp, vp = p.mean_var()
    mq, vq = q.mean_var()
    if vp <= 0 or vq <= 0:
        return float("nan")
    return (_ip(p, q) - mp * mq) / math.sqrt(vp * vq)


def unimodal_wasserstein_feasibility(F, mu, sigma, xi):
    """(threshold, c0-hat, projection of F^{-1}) for the unimodal ball."""
    fs = F.as_segments()
    pr = project(fs, xi)
    if pr.degenerate:
        raise DegenerateProjection("projection of the reference quantile is constant")
    c0 = 1.0 if pr.diagnostics.get("fixed_point") else min(_corr(fs, pr.projected), 1.0)
    thr = (F.mean - mu) ** 2 + (F.std - sigma) ** 2 + 2 * F.std * sigma * (1 - c0)
    return thr, c0, pr


def _add(p, q, b):
    """p + b*q for PiecewiseAffine p (no base) and q (possibly with base)."""
    br = np.union1d(p.breaks, q.breaks)
    mid = 0.5 * (br[:-1] + br[1:])
    ip = np.clip(np.searchsorted(p.breaks, mid) - 1, 0, p.n_segments - 1)
    iq = np.clip(np.searchsorted(q.breaks, mid) - 1, 0, q.n_segments - 1)
    base = q.base if q.uses_base else p.base
    return PiecewiseAffine(br, p.c0[ip] + b * q.c0[iq], p.c1[ip] + b * q.c1[iq],
                           p.c2[ip] + b * q.c2[iq], base)


def _h_lambda(gam, fs, lam, S, xi, n, warm=None):
    k = _add(gam, fs, lam)
    pr = project(k, xi, n=n, warm=warm)
    if pr.degenerate:
        raise DegenerateProjection(f"projected k is constant at lambda={lam:.6g}")
    h = pr.quantile(S.mu, S.sigma)
    return pr, h


def _dist2(h, fs):
    return max(h.segments.square() - 2 * _ip(h.segments, fs) + fs.square(), 0.0)


def worst_case_unimodal_wasserstein(g, S, xi, n=FAST_PIECES, strict=False):
    """sup rho_g over unimodal laws in the moment/Wasserstein set S.

    strict=True treats eps equal to the unimodal threshold as infeasible.
    """
    S.check_feasible()
    if math.isinf(S.epsilon):
        return worst_case_unimodal(g, S.mu, S.sigma, xi)
    gam = _weight(g)
    F = S.reference
    fs = F.as_segments()
    thr, c0, fpr = unimodal_wasserstein_feasibility(F, S.mu, S.sigma, xi)
    eps = S.epsilon
    tie = 1e-10 * (1 + thr)
    diag = {"threshold": thr, "c0_hat": c0, "xi": xi}
    if eps < thr - tie or (strict and eps <= thr + tie):
        raise InfeasibleError(
            f"epsilon={eps:.6g} is below the unimodal threshold {thr:.10g}; the set is empty", thr)
    if eps <= thr + tie:
        h = fpr.quantile(S.mu, S.sigma)
        return BoundResult(_ip(gam, h.segments), math.inf, h, "singleton", True, diag)
    base = worst_case_unimodal(g, S.mu, S.sigma, xi)
    if base.extremal_quantile is None:
        return BoundResult(base.value, 0.0, None, "constant_gstar", True, diag)
    gpr = project(gam, xi)
    c1 = _corr(fs, gpr.projected)
    upper = (F.mean - S.mu) ** 2 + (F.std - S.sigma) ** 2 + 2 * F.std * S.sigma * (1 - c1)
    diag["upper"] = upper
    if eps >= upper - tie:
        base.diagnostics.update(diag)
        base.regime = "unimodal_boundary"
        return base

    warm = {}

    def f(lam):
        _, h = _h_lambda(gam, fs, lam, S, xi, n, warm)
        return _dist2(h, fs) - eps

    hi, it = 1.0, 0
    while f(hi) > 0:
        hi *= 2.0
        it += 1
        if it > 200:
            raise NumericError("could not bracket lambda for the unimodal ball")
    lo = hi / 2 if hi > 1 else 0.0
    lam = optimize.brentq(f, lo, hi, xtol=1e-300, rtol=1e-12)
    pr, h = _h_lambda(gam, fs, lam, S, xi, n, warm)
    val = _ip(gam, h.segments)
    diag.update(lam=lam, distance=math.sqrt(_dist2(h, fs)),
                **{k: v for k, v in pr.diagnostics.items() if isinstance(v, (int, float, bool))})
    return BoundResult(val, lam, h, "interior", True, diag)


def _chebyshev(lo, hi, m):
    k = np.arange(m)
    x = np.cos(np.pi * k / (m - 1))[::-1]
    return lo + 0.5 * (hi - lo) * (x + 1)


def worst_case_interval_inflection(g, mu, sigma, xi1, xi2, S=None, m=33):
    """Max over xi in [xi1, xi2] of the fixed-xi bound (a worst case, not unique)."""
    UnimodalCone(interval=(xi1, xi2))

    def solve(x):
        if S is None:
            return worst_case_unimodal(g, mu, sigma, x)
        return worst_case_unimodal_wasserstein(g, S, x)

    def val(x):
        try:
            return solve(x).value
        except InfeasibleError:
            return -math.inf

    grid = _chebyshev(xi1, xi2, m)
    vals = np.array([val(x) for x in grid])
    if not np.any(np.isfinite(vals)):
        raise InfeasibleError("every inflection point in the interval is infeasible",
                              float("nan"))
    k = int(np.argmax(vals))
    best_x, best_v = float(grid[k]), float(vals[k])
    a, b = grid[max(k - 1, 0)], grid[min(k + 1, m - 1)]
    if b > a:
        r = optimize.minimize_scalar(lambda x: -val(x), bounds=(a, b), method="bounded",
                                     options={"xatol": 1e-10})
        if -r.fun > best_v + 1e-14:
            best_x, best_v = float(r.x), float(-r.fun)
    ties = [float(x) for x, v in zip(grid, vals) if abs(v - best_v) <= 1e-8 * (1 + abs(best_v))]
    if ties and min(ties) < best_x and all(abs(v - best_v) <= 1e-8 * (1 + abs(best_v))
                                           for v in [val(min(ties))]):
        best_x = min(ties)
    res = solve(best_x)
    res.diagnostics.update(xi=best_x, near_ties=len(ties) > 1, grid_size=m,
                           unique=False)
    return res


__all__ = ["UnimodalCone", "ConeProjection", "DegenerateProjection", "in_cone",
           "project_step", "project", "step_approximation", "worst_case_unimodal",
           "unimodal_wasserstein_feasibility", "worst_case_unimodal_wasserstein",
           "worst_case_interval_inflection", "unimodal_b_hat"]
