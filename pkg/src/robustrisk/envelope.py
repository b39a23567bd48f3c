"""Concave envelopes of g and of the perturbed function g_lam.

    g_lam(t) = g(t) + lam * int_{1-t}^1 F^{-1}(s) ds

The object of interest is the envelope derivative k(u) = (g_lam^*)'(1-u),
stored as a PiecewiseAffine over the reference F: every segment is either
a contact piece (slope of g plus lam*F^{-1}) or a bridge (a constant).
"""
from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize

from .distortion import DistortionFunction, usc_version
from .reference import ParameterError, PiecewiseAffine

T_TOL = 1e-12


class RegimeError(RuntimeError):
    pass


@dataclass(frozen=True, eq=False)
class EnvelopeDerivative:
    source: DistortionFunction
    reference: object
    lam: float
    segments: PiecewiseAffine
    kinds: tuple
    method: str
    flags: dict = field(default_factory=dict)

    def __post_init__(self):
        m, v = self.segments.mean_var()
        object.__setattr__(self, "_mean", m)
        object.__setattr__(self, "_var", v)

    @property
    def a_lambda(self):
        return self._mean

    @property
    def b_lambda(self):
        return math.sqrt(self._var)

    @property
    def is_constant(self):
        return self._var <= 1e-24 * max(1.0, self._mean ** 2)

    def __call__(self, u):
        return self.segments(u)

    def cov_with_reference(self):
        F = self.reference
        return self.segments.inner(F.as_segments()) - self._mean * F.mean

    def one_minus_corr(self):
        """1 - Corr(F^{-1}(V), k(V)) computed without cancellation."""
        F = self.reference
        if self.is_constant:
            return 1.0
        # remove the lam*F component; the Gram determinant is unchanged
        r = self.segments.add_base(-self.lam) if self.lam else self.segments
        rm = r.integral()
        vr = max(r.square() - rm * rm, 0.0)
        cr = r.inner(F.as_segments()) - rm * F.mean
        vf = F.std ** 2
        det = max(vf * vr - cr * cr, 0.0)
        sb = F.std * self.b_lambda
        cov = cr + self.lam * vf
        if sb + cov <= 0:
            return 1.0 - cov / sb
        return det / (sb * (sb + cov))

    def corr(self):
        return 1.0 - self.one_minus_corr()

    def to_csv(self, path, n=401):
        u = np.linspace(0, 1, n)[1:-1]
        idx = np.clip(np.searchsorted(self.segments.breaks, u) - 1, 0, len(self.kinds) - 1)
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t", "value", "segment_kind"])
            for uu, v, i in zip(u, self(u), idx):
                w.writerow([repr(float(1 - uu)), repr(float(v)), self.kinds[i]])


# ------------------------------------------------------------------ helpers


def _L(F, t):
    """int_{1-t}^1 F^{-1}."""
    return F.partial_integral(1.0 - t, 1.0)


def _lamF(lam, F, u):
    if lam == 0:
        return 0.0
    return lam * float(F(u))


def _polish(margin, a, b, snap, cond):
    """Tighten the final bracket [a, b] of a bisection; returns a point with cond."""
    for p in snap:
        if a <= p <= b and cond(p):
            return p
    fa, fb = margin(a), margin(b)
    if not fa * fb < 0:
        return None
    if math.isfinite(fa) and math.isfinite(fb):
        t = optimize.brentq(margin, a, b, xtol=1e-300, rtol=4 * np.finfo(float).eps)
        side = a if cond(a) else b
        for _ in range(64):
            if cond(t):
                return t
            t = float(np.nextafter(t, side))
        return None
    # one end sits on an unbounded tail: bisect the distance to it geometrically
    e, o, fe = (a, b, fa) if not math.isfinite(fa) else (b, a, fb)
    sgn = 1.0 if o > e else -1.0
    near, far = 1e-300, abs(o - e)
    while far > near * (1 + 1e-13):
        mid = math.sqrt(near * far)
        if (margin(e + sgn * mid) > 0) == (fe > 0):
            near = mid
        else:
            far = mid
    for d in (near, far):
        if cond(e + sgn * d):
            return e + sgn * d
    return None


def _bisect_inf(margin, lo, hi, tol=T_TOL, snap=()):
    """Smallest t in [lo, hi) with margin(t) >= 0, assuming the true set is [t*, hi)."""
    def cond(t):
        return margin(t) >= 0

    if cond(lo):
        return lo, False
    a, b = lo, hi
    if not cond(hi - tol) and not cond(0.5 * (lo + hi)):
        # probe densely before concluding the set is empty
        probe = np.linspace(lo, hi, 65)[1:-1]
        ok = [p for p in probe if cond(p)]
        if not ok:
            return hi, True
        b = ok[0]
    while b - a > tol:
        mid = 0.5 * (a + b)
        if cond(mid):
            b = mid
        else:
            a = mid
    t = _polish(margin, a, b, snap, cond)
    if t is not None:
        b = t
    if b - lo <= 2 * tol:
        # tangency below float resolution next to an unbounded tail
        return lo, False
    return b, False


def _bisect_sup(margin, lo, hi, tol=T_TOL, snap=()):
    """Largest t in (lo, hi] with margin(t) <= 0, assuming the true set is (lo, t*]."""
    def cond(t):
        return margin(t) <= 0

    if cond(hi):
        return hi, False
    a, b = lo, hi
    if not cond(lo + tol) and not cond(0.5 * (lo + hi)):
        probe = np.linspace(lo, hi, 65)[1:-1]
        ok = [p for p in probe if cond(p)]
        if not ok:
            return lo, True
        a = ok[-1]
    while b - a > tol:
        mid = 0.5 * (a + b)
        if cond(mid):
            a = mid
        else:
            b = mid
    t = _polish(margin, a, b, snap, cond)
    if t is not None:
        a = t
    if hi - a <= 2 * tol:
        return hi, False
    return a, False


def _gap(lhs, rhs):
    """lhs - rhs with an infinite rhs mapped to a signed infinity."""
    if not math.isfinite(rhs):
        return -rhs
    return lhs - rhs


# ------------------------------------------------------- named thresholds


def threshold_var_plus(alpha, lam, F):
    """t_{1-alpha,lam}: tangency point left of the jump of VaR+ at 1-alpha."""
    return _threshold_jump_left(1.0 - alpha, lam, F)


def _threshold_jump_left(a, lam, F):
    # inf{t in [0,a): (1 + lam*int_{1-a}^{1-t} F^{-1})/(a-t) >= lam F^{-1}(1-t)}
    def margin(t):
        if lam == 0:
            return 1.0
        rhs = lam * float(F(1.0 - t))
        return _gap((1.0 + lam * F.partial_integral(1.0 - a, 1.0 - t)) / (a - t), rhs)
    return _bisect_inf(margin, 0.0, a)


def threshold_iqd(alpha, lam, F):
    """(t_{alpha,lam}, t-hat_{alpha,lam}) for IQD+ with flags."""
    t1, f1 = _threshold_jump_left(alpha, lam, F)

    def margin(t):
        # (lam*int_{1-t}^{alpha} F^{-1} - 1)/(t-1+alpha) <= lam F^{-1}(1-t)
        rhs = _lamF(lam, F, 1.0 - t)
        return _gap((lam * F.partial_integral(1.0 - t, alpha) - 1.0) / (t - 1.0 + alpha), rhs)
    t2, f2 = _bisect_sup(margin, 1.0 - alpha, 1.0)
    return (t1, t2), f1 or f2


def threshold_es_var(alpha1, alpha2, lam, F):
    """(u_{a1,a2,lam}, c_{a1,a2,lam})."""
    d1 = 1.0 - alpha1

    def chord(t):
        x = t - 1.0 + alpha2
        return (min(x, alpha2 - alpha1) / d1 + lam * F.partial_integral(1.0 - t, alpha2) - 1.0) / x

    def margin(t):
        rhs = (1.0 / d1 if t < d1 else 0.0) + _lamF(lam, F, 1.0 - t)
        return _gap(chord(t), rhs)
    u, flag = _bisect_sup(margin, 1.0 - alpha2, 1.0, snap=(d1,))
    return (u, chord(u)), flag


def threshold_gluevar(alpha, beta, h1, h2, lam, F):
    """(u^{h1,h2}_{alpha,beta,lam}, c^{h1,h2}_{alpha,beta,lam}) for the USC GlueVaR."""
    if h1 / (1 - beta) < (h2 - h1) / (beta - alpha) - 1e-12 if beta > alpha else False:
        raise ParameterError("GlueVaR closed form needs h1/(1-beta) >= (h2-h1)/(beta-alpha)")
    s1 = h1 / (1.0 - beta)
    s2 = (h2 - h1) / (beta - alpha) if beta > alpha else s1

    def gval(t):
        return s1 * t if t < 1.0 - beta else h1 + s2 * (t - (1.0 - beta))

    def chord(t):
        return (1.0 - gval(t) + lam * F.partial_integral(alpha, 1.0 - t)) / (1.0 - alpha - t)

    def margin(t):
        slope = s1 if t < 1.0 - beta else s2
        if t == 0.0 and lam == 0:
            slope = s1
        return _gap(chord(t), slope + _lamF(lam, F, 1.0 - t))
    u, flag = _bisect_inf(margin, 0.0, 1.0 - alpha, snap=(1.0 - beta,))
    return (u, chord(u)), flag


# ------------------------------------------------------------- assemblies


def _concave_segments(g, F, lam):
    pieces = []
    t = g.t
    for j in range(t.size - 1):
        s, q = g.slope[j], g.quad[j]
        pieces.append((1 - t[j + 1], 1 - t[j], s + 2 * q * (1 - t[j]), -2 * q, lam))
    return pieces


def _assemble(pieces, F):
    # slivers come from 1 - (1 - x) round-off
    pieces = [p for p in pieces if p[1] - p[0] > 1e-14]
    kinds = []
    seg = PiecewiseAffine.build(pieces, base=F)
    for i in range(seg.n_segments):
        kinds.append("affine" if seg.c2[i] != 0 else "constant")
    return seg, tuple(kinds)


def _named(g, F, lam):
    fam, p = g.family, g.params
    if fam == "var+":
        alpha = p[0]
        t, flag = threshold_var_plus(alpha, lam, F)
        c = (1.0 + lam * F.partial_integral(alpha, 1.0 - t)) / (1.0 - alpha - t)
        pieces = [(0.0, alpha, 0.0, 0.0, lam), (alpha, 1.0 - t, c, 0.0, 0.0),
                  (1.0 - t, 1.0, 0.0, 0.0, lam)]
        return pieces, {"t": t, "empty_set": flag}
    if fam == "iqd+":
        alpha = p[0]
        (t1, t2), flag = threshold_iqd(alpha, lam, F)
        c1 = (1.0 + lam * F.partial_integral(1.0 - alpha, 1.0 - t1)) / (alpha - t1)
        c2 = (lam * F.partial_integral(1.0 - t2, alpha) - 1.0) / (t2 - 1.0 + alpha)
        pieces = [(0.0, 1.0 - t2, 0.0, 0.0, lam), (1.0 - t2, alpha, c2, 0.0, 0.0),
                  (alpha, 1.0 - alpha, 0.0, 0.0, lam), (1.0 - alpha, 1.0 - t1, c1, 0.0, 0.0),
                  (1.0 - t1, 1.0, 0.0, 0.0, lam)]
        return pieces, {"t": t1, "t_hat": t2, "empty_set": flag}
    if fam == "es-var":
        a1, a2 = p
        (u, c), flag = threshold_es_var(a1, a2, lam, F)
        s = 1.0 / (1.0 - a1)
        top = 1.0 - u
        pieces = [(0.0, min(a1, top), 0.0, 0.0, lam)]
        if a1 < top:
            pieces.append((a1, top, s, 0.0, lam))
        pieces += [(top, a2, c, 0.0, 0.0), (a2, 1.0, s, 0.0, lam)]
        return pieces, {"u": u, "c": c, "empty_set": flag}
    if fam == "gluevar+":
        beta, alpha, h1, h2 = p
        (u, c), flag = threshold_gluevar(alpha, beta, h1, h2, lam, F)
        s1 = h1 / (1.0 - beta)
        s2 = (h2 - h1) / (beta - alpha) if beta > alpha else s1
        lo = 1.0 - u
        pieces = [(0.0, alpha, 0.0, 0.0, lam), (alpha, lo, c, 0.0, 0.0)]
        if lo < beta:
            pieces.append((lo, beta, s2, 0.0, lam))
        pieces.append((max(lo, beta), 1.0, s1, 0.0, lam))
        return pieces, {"u": u, "c": c, "empty_set": flag}
    return None, None


NAMED = ("var+", "iqd+", "es-var", "gluevar+")


def _gluevar_ok(g):
    beta, alpha, h1, h2 = g.params
    return beta == alpha or h1 / (1 - beta) >= (h2 - h1) / (beta - alpha) - 1e-12


# ---------------------------------------------------------- generic hull


def _upper_hull(x, y):
    """Indices of the upper concave hull (monotone chain), x sorted ascending."""
    hull = []
    for i in range(x.size):
        while len(hull) >= 2:
            o, a = hull[-2], hull[-1]
            cross = (x[a] - x[o]) * (y[i] - y[o]) - (y[a] - y[o]) * (x[i] - x[o])
            if cross >= 0:
                hull.pop()
            else:
                break
        hull.append(i)
    return hull


class _Arcs:
    """Pieces of g_lam as separate arcs plus USC vertex points."""

    def __init__(self, g, F, lam):
        self.g, self.F, self.lam = g, F, lam

    def L(self, t):
        return 0.0 if self.lam == 0 else self.lam * _L(self.F, t)

    def value(self, j, t):
        g = self.g
        x = t - g.t[j]
        return g.right[j] + g.slope[j] * x + g.quad[j] * x * x + self.L(t)

    def deriv(self, j, t):
        g = self.g
        d = g.slope[j] + 2 * g.quad[j] * (t - g.t[j])
        if self.lam:
            d += self.lam * float(self.F(1.0 - t))
        return d

    def affine(self, j):
        a, b = self.g.t[j], self.g.t[j + 1]
        da, db = self.deriv(j, a + 1e-9 * (b - a)), self.deriv(j, b - 1e-9 * (b - a))
        return abs(da - db) <= 1e-12 * (1 + abs(da))

    def vertex(self, i):
        return self.g.point[i] + self.L(self.g.t[i])


def _arc_grid(a, b, n):
    s = 0.5 - 0.5 * np.cos(np.linspace(0.0, math.pi, n))
    pts = a + (b - a) * s
    # extra clustering near t = 0 and t = 1 where lam*F^{-1} is steep
    extra = [p for p in (10.0 ** -np.arange(2, 12)) if a < p < b]
    extra += [1 - p for p in (10.0 ** -np.arange(2, 12)) if a < 1 - p < b]
    return np.unique(np.concatenate([pts, extra]))


def _generic(g, F, lam, n_per_arc=801):
    if lam and len(F.breakpoints):
        # lam * int F^{-1} kinks wherever F^{-1} jumps: split the arcs there
        g = g.with_knots(1.0 - np.asarray(F.breakpoints))
        n_per_arc = max(9, min(n_per_arc, 40000 // g.t.size))
    arcs = _Arcs(g, F, lam)
    xs, ys, arc_id = [], [], []
    for i in range(g.t.size):
        xs.append(g.t[i])
        ys.append(arcs.vertex(i))
        arc_id.append(-1 - i)  # vertex marker
    for j in range(g.t.size - 1):
        a, b = g.t[j], g.t[j + 1]
        if arcs.affine(j):
            continue  # interior points lie on the chord below the vertices
        grid = _arc_grid(a, b, n_per_arc)[1:-1]
        for t in grid:
            xs.append(t)
            ys.append(arcs.value(j, t))
            arc_id.append(j)
    xs, ys, arc_id = np.array(xs), np.array(ys), np.array(arc_id)
    order = np.lexsort((-ys, xs))
    xs, ys, arc_id = xs[order], ys[order], arc_id[order]
    hull = _upper_hull(xs, ys)
    nodes = [(xs[h], ys[h], arc_id[h], h) for h in hull]
    # consecutive hull nodes are in contact if adjacent samples of one arc (or arc and its end vertex)
    def contact(p, q):
        (_, _, ap, hp), (_, _, aq, hq) = p, q
        if ap >= 0 and ap == aq and g.quad[ap] <= 0:
            # lam * int F^{-1} is concave, so a concave arc is touched on an interval
            return ap
        if hq != hp + 1:
            return None
        if ap >= 0 and aq >= 0 and ap == aq:
            return ap
        if ap >= 0 and aq < 0 and (-1 - aq) == ap + 1 and _joined(g, ap + 1, "left"):
            return ap
        if aq >= 0 and ap < 0 and (-1 - ap) == aq and _joined(g, aq, "right"):
            return aq
        return None

    # group into contact runs and bridges
    links = []
    for p, q in zip(nodes[:-1], nodes[1:]):
        links.append(contact(p, q))
    # refine bridge endpoints sitting strictly inside arcs
    pos_t = [n[0] for n in nodes]
    pos_y = [n[1] for n in nodes]
    for k, arc in enumerate(links):
        if arc is not None:
            continue
        for _ in range(60):
            moved = 0.0
            for end, other in ((k, k + 1), (k + 1, k)):
                a = nodes[end][2]
                if a < 0:
                    continue
                newt = _tangent(arcs, a, pos_t[end], pos_t[other], pos_y[other], g)
                if newt is not None:
                    # stay between the neighbouring hull nodes
                    lo = pos_t[end - 1] if end > 0 else -math.inf
                    hi = pos_t[end + 1] if end + 1 < len(pos_t) else math.inf
                    newt = min(max(newt, lo), hi)
                    moved = max(moved, abs(newt - pos_t[end]))
                    pos_t[end], pos_y[end] = newt, arcs.value(a, newt)
            if moved < 1e-15:
                break
    pieces, kinds = [], []
    for k, arc in enumerate(links):
        tl, tr = pos_t[k], pos_t[k + 1]
        if tr <= tl:
            continue
        if arc is None:
            c = (pos_y[k + 1] - pos_y[k]) / (tr - tl)
            pieces.append((1 - tr, 1 - tl, c, 0.0, 0.0))
        else:
            s, q = g.slope[arc], g.quad[arc]
            pieces.append((1 - tr, 1 - tl, s + 2 * q * (1 - g.t[arc]), -2 * q, lam))
    pieces = _merge_contacts(pieces)
    return pieces


def _joined(g, i, side):
    lim = g.left[i] if side == "left" else g.right[i]
    return abs(lim - g.point[i]) <= 1e-12


def _merge_contacts(pieces):
    pieces = sorted(pieces, key=lambda p: p[0])
    out = []
    for p in pieces:
        if out and out[-1][2:] == p[2:] and abs(out[-1][1] - p[0]) < 1e-15:
            out[-1] = (out[-1][0], p[1]) + p[2:]
        else:
            out.append(p)
    return out


def _tangent(arcs, j, t0, T, Y, g):
    """Point on arc j near t0 whose tangent passes through (T, Y)."""
    a, b = g.t[j], g.t[j + 1]
    if T == t0:
        return None
    if arcs.affine(j):
        return None  # the hull can only touch an affine arc at its ends

    def f(t):
        return arcs.deriv(j, t) - (Y - arcs.value(j, t)) / (T - t)
    width = (b - a) * 0.01
    lo, hi = max(a, t0 - width), min(b, t0 + width)
    if T > t0:
        hi = min(hi, T)
    else:
        lo = max(lo, T)
    eps = 1e-14
    lo, hi = lo + eps, hi - eps
    if hi <= lo:
        return None
    try:
        fl, fh = f(lo), f(hi)
    except (ZeroDivisionError, ValueError):
        return None
    if not (np.isfinite(fl) and np.isfinite(fh)) or fl * fh > 0:
        return None
    from scipy.optimize import brentq
    return brentq(f, lo, hi, xtol=1e-15, rtol=1e-14)


# ------------------------------------------------------------------ API


def g_lambda_envelope(g, F, lam, method="auto", n_per_arc=801):
    """Envelope derivative of g_lam; g is replaced by its USC version."""
    if lam < 0:
        raise ParameterError("lambda must be non-negative")
    g = usc_version(g)
    flags = {}
    if method == "auto":
        if g.is_concave:
            method = "concave"
        # the named tangency tests assume a continuous reference quantile
        elif (g.family in NAMED and (g.family != "gluevar+" or _gluevar_ok(g))
              and (lam == 0 or not len(F.breakpoints))):
            method = "named"
        else:
            method = "generic"
    if method == "concave":
        if not g.is_concave:
            raise ParameterError("concave path needs a concave g")
        pieces = _concave_segments(g, F, lam)
    elif method == "named":
        pieces, flags = _named(g, F, lam)
        if pieces is None:
            raise ParameterError(f"no closed form for {g.family}")
    elif method == "generic":
        pieces = _generic(g, F, lam, n_per_arc)
    else:
        raise ParameterError(f"unknown envelope method {method!r}")
    seg, kinds = _assemble(pieces, F)
    env = EnvelopeDerivative(g, F, float(lam), seg, kinds, method, flags)
    if not seg.is_nondecreasing(1e-5):
        warnings.warn(f"assembled envelope derivative for {g!r} is not monotone", RuntimeWarning)
        flags["monotone"] = False
    return env


def concave_envelope(g):
    """Exact g* for g made of linear or convex pieces; grid hull otherwise."""
    g = usc_version(g)
    if g.is_concave:
        return g
    if np.all(g.quad >= 0):
        hull = _upper_hull(g.t, g.point)
        t = g.t[hull]
        v = g.point[hull]
        return DistortionFunction.continuous(t, v)
    # fall back to a fine grid hull
    grid = np.unique(np.concatenate([g.t, np.linspace(0, 1, 20001)]))
    vals = np.maximum(g(grid), np.interp(grid, g.t, g.point))
    hull = _upper_hull(grid, vals)
    return DistortionFunction.continuous(grid[hull], vals[hull])


def convex_envelope(g):
    from .distortion import negate
    return negate(concave_envelope(negate(g)))


def c0_correlation(g, F):
    env = g_lambda_envelope(g, F, 0.0)
    if env.is_constant:
        return 0.0
    return env.corr()
