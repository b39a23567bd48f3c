"""Distortion functions g on [0,1] and distortion risk metrics.

Positive values are losses. For a distribution G with quantile q,

    rho_g(G) = int_0^inf g(1-G(x)) dx + int_-inf^0 (g(1-G(x)) - g(1)) dx
             = int_0^1 gamma(u) q(u) du      (g absolutely continuous)

with weight gamma(u) = g'_-(1-u).
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate

from .reference import EmpiricalQuantile, ParameterError, PiecewiseAffine

_TOL = 1e-12


@dataclass(frozen=True)
class MetricSpec:
    family: str
    params: tuple = ()

    def __str__(self):
        if not self.params:
            return self.family
        return f"{self.family}({','.join(repr(p) for p in self.params)})"


# family -> ordered parameter names
FAMILIES = {
    "gd": (),
    "mmd": (),
    "identity": (),
    "iqd+": ("alpha",),
    "iqd-": ("alpha",),
    "var": ("alpha",),
    "var+": ("alpha",),
    "es": ("alpha",),
    "rvar": ("alpha", "beta"),
    "gluevar": ("beta", "alpha", "h1", "h2"),
    "gluevar+": ("beta", "alpha", "h1", "h2"),
    "es-var": ("alpha1", "alpha2"),
}
_ALIASES = {"iqd": "iqd+", "cvar": "es", "mean": "identity", "es_minus_var": "es-var",
            "esvar": "es-var", "var_plus": "var+", "iqd_plus": "iqd+", "iqd_minus": "iqd-",
            "gluevar_hat": "gluevar+"}

_CALL = re.compile(r"^\s*([A-Za-z_][\w+\-]*?)\s*(?:\((.*)\))?\s*$")


def _number(tok):
    tok = tok.strip()
    if "/" in tok:
        a, b = tok.split("/", 1)
        return float(a) / float(b)
    return float(tok)


def parse_metric(text):
    """Parse e.g. ``es(0.95)``, ``iqd+(0.05)``, ``gluevar(beta=0.975,alpha=0.95,h1=1/3,h2=2/3)``."""
    m = _CALL.match(text)
    if not m:
        raise ParameterError(f"cannot parse metric {text!r}")
    name = m.group(1).lower()
    name = _ALIASES.get(name, name)
    if name not in FAMILIES:
        raise ParameterError(f"unknown metric family {m.group(1)!r}")
    names = FAMILIES[name]
    args = [a for a in (m.group(2) or "").split(",") if a.strip()]
    vals = {}
    pos = 0
    for a in args:
        if "=" in a:
            k, v = a.split("=", 1)
            k = k.strip().lower()
            if k not in names:
                raise ParameterError(f"{name} has no parameter {k!r}")
            vals[k] = _number(v)
        else:
            if pos >= len(names):
                raise ParameterError(f"too many arguments for {name}")
            vals[names[pos]] = _number(a)
            pos += 1
    missing = [k for k in names if k not in vals]
    if missing:
        raise ParameterError(f"{name} missing parameter(s): {', '.join(missing)}")
    spec = MetricSpec(name, tuple(vals[k] for k in names))
    validate_spec(spec)
    return spec


def validate_spec(spec):
    f, p = spec.family, spec.params
    if f not in FAMILIES:
        raise ParameterError(f"unknown family {f!r}")
    if len(p) != len(FAMILIES[f]):
        raise ParameterError(f"{f} expects {len(FAMILIES[f])} parameters")
    if f in ("iqd+", "iqd-") and not 0 < p[0] < 0.5:
        raise ParameterError("IQD requires alpha in (0, 1/2)")
    if f in ("var", "var+") and not 0 < p[0] < 1:
        raise ParameterError("VaR requires alpha in (0, 1)")
    if f == "es" and not 0 <= p[0] < 1:
        raise ParameterError("ES requires alpha in [0, 1)")
    if f == "rvar" and not 0 < p[0] < p[1] < 1:
        raise ParameterError("RVaR requires 0 < alpha < beta < 1")
    if f in ("gluevar", "gluevar+"):
        beta, alpha, h1, h2 = p
        if not (0 < alpha <= beta < 1):
            raise ParameterError("GlueVaR requires 0 < alpha <= beta < 1")
        if not (0 <= h1 <= h2 <= 1):
            raise ParameterError("GlueVaR requires 0 <= h1 <= h2 <= 1")
    if f == "es-var" and not 0 < p[0] < p[1] < 1:
        raise ParameterError("ES-VaR requires 0 < alpha1 < alpha2 < 1")


@dataclass(frozen=True, eq=False)
class DistortionFunction:
    """Piecewise quadratic g with explicit jump triples at the breakpoints.

    On (t[i], t[i+1]): g(t) = right[i] + slope[i]*(t - t[i]) + quad[i]*(t - t[i])**2.
    Only the Gini deviation uses a nonzero quadratic term.
    """

    t: np.ndarray
    left: np.ndarray
    point: np.ndarray
    right: np.ndarray
    slope: np.ndarray
    quad: np.ndarray
    family: str = "custom"
    params: tuple = ()
    shape_hint: str = field(default="general")

    def __post_init__(self):
        t = np.asarray(self.t, float)
        for name in ("t", "left", "point", "right", "slope", "quad"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), float))
        m = t.size - 1
        if m < 1 or t[0] != 0 or t[-1] != 1 or np.any(np.diff(t) <= 0):
            raise ParameterError("breakpoints must increase strictly from 0 to 1")
        if not (self.left.size == self.point.size == self.right.size == m + 1
                and self.slope.size == self.quad.size == m):
            raise ParameterError("inconsistent piece arrays")
        w = np.diff(t)
        ends = self.right[:-1] + self.slope * w + self.quad * w * w
        if np.any(np.abs(ends - self.left[1:]) > 1e-9 * (1 + np.abs(ends))):
            raise ParameterError("piece values do not match the left limits")
        if abs(self.point[0]) > _TOL or abs(self.right[0]) > _TOL:
            raise ParameterError("g must satisfy g(0) = g(0+) = 0")
        if abs(self.point[-1] - self.left[-1]) > _TOL:
            raise ParameterError("g must satisfy g(1) = g(1-)")
        if self.shape_hint == "general":
            object.__setattr__(self, "shape_hint", self._detect_shape())

    # -- construction helpers
    @classmethod
    def continuous(cls, knots, values, family="custom", params=()):
        """Continuous piecewise-linear g through (knots, values)."""
        t = np.asarray(knots, float)
        v = np.asarray(values, float)
        slope = np.diff(v) / np.diff(t)
        return cls(t, v, v, v, slope, np.zeros_like(slope), family, params)

    def _detect_shape(self):
        inner = slice(1, -1)
        cont = (np.allclose(self.left[inner], self.point[inner], atol=1e-13)
                and np.allclose(self.right[inner], self.point[inner], atol=1e-13))
        if not cont:
            return "general"
        d = np.diff(self.slope)
        # slope at end of piece i vs start of piece i+1
        w = np.diff(self.t)
        end_slopes = self.slope + 2 * self.quad * w
        dd = self.slope[1:] - end_slopes[:-1]
        if np.all(self.quad <= 0) and np.all(dd <= 1e-12):
            return "concave"
        if np.all(self.quad >= 0) and np.all(dd >= -1e-12):
            return "convex"
        del d
        return "general"

    # -- evaluation
    @property
    def total(self):
        """g(1)."""
        return float(self.point[-1])

    @property
    def is_concave(self):
        return self.shape_hint == "concave"

    @property
    def has_jumps(self):
        inner = slice(1, -1)
        return not (np.allclose(self.left[inner], self.point[inner], atol=1e-13)
                    and np.allclose(self.right[inner], self.point[inner], atol=1e-13))

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        scalar = t.ndim == 0
        t = np.atleast_1d(t)
        i = np.clip(np.searchsorted(self.t, t, side="right") - 1, 0, self.t.size - 2)
        x = t - self.t[i]
        out = self.right[i] + self.slope[i] * x + self.quad[i] * x * x
        at = np.searchsorted(self.t, t)
        hit = (at < self.t.size) & (self.t[np.minimum(at, self.t.size - 1)] == t)
        out = np.where(hit, self.point[np.minimum(at, self.t.size - 1)], out)
        return float(out[0]) if scalar else out

    def derivative(self, t):
        """Left derivative on (0,1]."""
        t = np.asarray(t, dtype=float)
        i = np.clip(np.searchsorted(self.t, t, side="left") - 1, 0, self.t.size - 2)
        return self.slope[i] + 2 * self.quad[i] * (t - self.t[i])

    def same_as(self, other):
        return (self.t.shape == other.t.shape and np.allclose(self.t, other.t, atol=0)
                and np.allclose(self.point, other.point, atol=1e-14)
                and np.allclose(self.left, other.left, atol=1e-14)
                and np.allclose(self.right, other.right, atol=1e-14)
                and np.allclose(self.slope, other.slope, atol=1e-14)
                and np.allclose(self.quad, other.quad, atol=1e-14))

    def with_knots(self, extra):
        """The same function with extra (continuous) breakpoints inserted."""
        extra = np.asarray(extra, float)
        extra = extra[(extra > 0) & (extra < 1)]
        t = np.union1d(self.t, extra)
        if t.size == self.t.size:
            return self
        j = np.clip(np.searchsorted(self.t, t, side="right") - 1, 0, self.t.size - 2)
        old = np.isin(t, self.t)
        k = np.searchsorted(self.t, t)
        x = t - self.t[j]
        val = self.right[j] + self.slope[j] * x + self.quad[j] * x * x
        pick = lambda arr: np.where(old, arr[np.minimum(k, self.t.size - 1)], val)
        left, point, right = pick(self.left), pick(self.point), pick(self.right)
        jj, xx = j[:-1], x[:-1]
        return DistortionFunction(t, left, point, right, self.slope[jj] + 2 * self.quad[jj] * xx,
                                  self.quad[jj], "custom", (), self.shape_hint)

    def replace(self, **kw):
        d = dict(t=self.t, left=self.left, point=self.point, right=self.right, slope=self.slope,
                 quad=self.quad, family=self.family, params=self.params, shape_hint="general")
        d.update(kw)
        return DistortionFunction(**d)

    def __repr__(self):
        if self.family != "custom":
            return str(MetricSpec(self.family, self.params))
        return f"DistortionFunction(pieces={self.t.size - 1}, shape={self.shape_hint})"


def _pieces(t, vals, slopes, family, params, quad=None):
    """vals: list of (left, point, right) per breakpoint."""
    vals = np.asarray(vals, float)
    slopes = np.asarray(slopes, float)
    return DistortionFunction(np.asarray(t, float), vals[:, 0], vals[:, 1], vals[:, 2], slopes,
                              np.zeros_like(slopes) if quad is None else np.asarray(quad, float),
                              family, tuple(params))


def make_distortion(spec):
    if isinstance(spec, str):
        spec = parse_metric(spec)
    validate_spec(spec)
    f, p = spec.family, spec.params
    if f == "identity":
        return _pieces([0, 1], [(0, 0, 0), (1, 1, 1)], [1.0], f, p)
    if f == "gd":
        return _pieces([0, 1], [(0, 0, 0), (0, 0, 0)], [1.0], f, p, quad=[-1.0])
    if f == "mmd":
        return _pieces([0, 0.5, 1], [(0, 0, 0), (0.5, 0.5, 0.5), (0, 0, 0)], [1.0, -1.0], f, p)
    if f in ("iqd+", "iqd-"):
        a = p[0]
        top = 1.0 if f == "iqd+" else 0.0
        return _pieces([0, a, 1 - a, 1], [(0, 0, 0), (0, top, 1), (1, top, 0), (0, 0, 0)],
                       [0, 0, 0], f, p)
    if f in ("var", "var+"):
        a = p[0]
        mid = 1.0 if f == "var+" else 0.0
        return _pieces([0, 1 - a, 1], [(0, 0, 0), (0, mid, 1), (1, 1, 1)], [0, 0], f, p)
    if f == "es":
        a = p[0]
        if a == 0:
            return _pieces([0, 1], [(0, 0, 0), (1, 1, 1)], [1.0], f, p)
        return _pieces([0, 1 - a, 1], [(0, 0, 0), (1, 1, 1), (1, 1, 1)], [1 / (1 - a), 0], f, p)
    if f == "rvar":
        a, b = p
        return _pieces([0, 1 - b, 1 - a, 1], [(0, 0, 0), (0, 0, 0), (1, 1, 1), (1, 1, 1)],
                       [0, 1 / (b - a), 0], f, p)
    if f in ("gluevar", "gluevar+"):
        beta, alpha, h1, h2 = p
        top = 1.0 if f == "gluevar+" else h2
        if alpha == beta:
            return _pieces([0, 1 - alpha, 1], [(0, 0, 0), (h1, top, 1), (1, 1, 1)],
                           [h1 / (1 - beta), 0], f, p)
        return _pieces([0, 1 - beta, 1 - alpha, 1],
                       [(0, 0, 0), (h1, h1, h1), (h2, top, 1), (1, 1, 1)],
                       [h1 / (1 - beta), (h2 - h1) / (beta - alpha), 0], f, p)
    if f == "es-var":
        a1, a2 = p
        v = (1 - a2) / (1 - a1)
        return _pieces([0, 1 - a2, 1 - a1, 1],
                       [(0, 0, 0), (v, v, v - 1), (0, 0, 0), (0, 0, 0)],
                       [1 / (1 - a1), 1 / (1 - a1), 0], f, p)
    raise ParameterError(f"no constructor for {f}")


_USC_FAMILY = {"var": "var+", "iqd-": "iqd+", "gluevar": "gluevar+"}


def usc_version(g):
    """Lift interior point values to max(g(t-), g(t), g(t+))."""
    pt = g.point.copy()
    pt[1:-1] = np.maximum.reduce([g.left[1:-1], g.point[1:-1], g.right[1:-1]])
    if np.array_equal(pt, g.point):
        return g
    fam = _USC_FAMILY.get(g.family, g.family)
    return g.replace(point=pt, family=fam)


def negate(g):
    fam = g.family[4:] if g.family.startswith("neg:") else "neg:" + g.family
    if g.family == "custom":
        fam = "custom"
    return g.replace(left=-g.left, point=-g.point, right=-g.right, slope=-g.slope,
                     quad=-g.quad, family=fam)


def weight_of(g):
    """gamma(u) = g'_-(1-u) as a PiecewiseAffine in u (no base term)."""
    if g.has_jumps:
        raise ParameterError("g is not absolutely continuous (has jumps); no weight function")
    return _weight_segments(g)


def _weight_segments(g):
    t = g.t
    m = t.size - 1
    pieces = []
    for j in range(m):
        s, q = g.slope[j], g.quad[j]
        pieces.append((1 - t[j + 1], 1 - t[j], s + 2 * q * (1 - t[j]), -2 * q, 0.0))
    return PiecewiseAffine.build(pieces)


def weight_kind(w):
    return "step" if np.all(w.c1 == 0) and not w.uses_base else (
        "piecewise_linear" if not w.uses_base else "analytic_callable_on_grid")


def rho(g, q, method="quantile"):
    """Distortion risk metric of the distribution with quantile q.

    method="quantile": slope pieces integrated against q plus jump terms
    (left/right quantiles at jumps); method="stieltjes": the x-space
    double integral through q.cdf.
    """
    if method == "quantile":
        return _rho_quantile(g, q)
    if method == "stieltjes":
        return _rho_stieltjes(g, q)
    raise ParameterError(f"unknown method {method!r}")


def _rho_quantile(g, q):
    t = g.t
    tot = 0.0
    for j in range(t.size - 1):
        lo, hi = 1 - t[j + 1], 1 - t[j]
        s, c = g.slope[j], g.quad[j]
        a0, a1 = s + 2 * c * (1 - t[j]), -2 * c
        if a0 != 0:
            tot += a0 * q.partial_integral(lo, hi)
        if a1 != 0:
            tot += a1 * q.moment_integral(lo, hi)
    bp = np.asarray(q.breakpoints, dtype=float)
    for i in range(1, t.size - 1):
        u = _snap(1 - t[i], bp)
        up, down = g.point[i] - g.left[i], g.right[i] - g.point[i]
        if up:
            tot += up * float(q.right(u))
        if down:
            tot += down * float(q(u))
    if not math.isfinite(tot):
        raise ArithmeticError("distortion integral is not finite")
    return float(tot)


def _snap(u, bp, tol=1e-12):
    # 1 - t is inexact in floating point; align jumps with breakpoints of q
    if bp.size:
        j = int(np.argmin(np.abs(bp - u)))
        if abs(bp[j] - u) <= tol:
            return float(bp[j])
    return u


def _rho_stieltjes(g, q):
    if isinstance(q, EmpiricalQuantile):
        x = np.unique(q.values)
        surv = 1.0 - q.cdf(x)
        return float(g.total * x[0] + np.sum(g(surv[:-1]) * np.diff(x)))
    g1 = g.total
    # split points: where 1-G(x) crosses a breakpoint of g, and 0
    cuts = sorted({0.0} | {float(q(1 - ti)) for ti in g.t[1:-1]}
                  | {float(q(1 - ti)) for ti in np.linspace(0.02, 0.98, 49)})
    cuts = [c for c in cuts if math.isfinite(c)]

    def f(x):
        v = g(1.0 - float(q.cdf(x)))
        return v if x >= 0 else v - g1

    lo, hi = float(q(0.0)), float(q(1.0))
    pts = [lo] + [c for c in cuts if lo < c < hi] + [hi]
    tot = 0.0
    for a, b in zip(pts[:-1], pts[1:]):
        if b <= a:
            continue
        val, _ = integrate.quad(f, a, b, limit=400, epsabs=1e-13, epsrel=1e-12)
        tot += val
    return float(tot)
