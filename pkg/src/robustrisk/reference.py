"""Quantile functions on (0, 1) with exact partial integrals.

Every quantile exposes three integrals over a sub-interval [a, b] of (0, 1):

    partial_integral(a, b)  = int_a^b q(u) du
    moment_integral(a, b)   = int_a^b u q(u) du
    square_integral(a, b)   = int_a^b q(u)^2 du

These are all the envelope and projection code ever needs, so analytic
families get closed forms and everything else is exact for its own
piecewise structure.
"""
from __future__ import annotations

import csv
import math
import re
from abc import ABC, abstractmethod

import numpy as np
from scipy import integrate, optimize, special, stats

_SQRT_PI = math.sqrt(math.pi)
_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(64)
TAIL_DELTA = 1e-9


class ParameterError(ValueError):
    pass


def _check_interval(a, b):
    if not (0.0 <= a <= b <= 1.0):
        raise ParameterError(f"need 0 <= a <= b <= 1, got a={a}, b={b}")


class QuantileFunction(ABC):
    """Left-continuous non-decreasing quantile function."""

    kind = "abstract"

    def _init_moments(self):
        m = self.partial_integral(0.0, 1.0)
        s2 = self.square_integral(0.0, 1.0) - m * m
        self._mean = float(m)
        self._std = float(math.sqrt(max(s2, 0.0)))

    @property
    def mean(self):
        return self._mean

    @property
    def std(self):
        return self._std

    @property
    def degenerate(self):
        return self._std <= 1e-14 * max(1.0, abs(self._mean))

    @abstractmethod
    def __call__(self, u): ...

    def right(self, u):
        """Right quantile; equals the left quantile away from jumps."""
        return self(u)

    @abstractmethod
    def cdf(self, x): ...

    @abstractmethod
    def partial_integral(self, a, b): ...

    @abstractmethod
    def square_integral(self, a, b): ...

    def moment_integral(self, a, b):
        # integration by parts against the running partial integral
        _check_interval(a, b)
        if b == a:
            return 0.0
        inner, _ = integrate.quad(lambda s: self.partial_integral(a, s), a, b,
                                  limit=200, epsabs=1e-13, epsrel=1e-12)
        return b * self.partial_integral(a, b) - inner

    @property
    def breakpoints(self):
        """Interior u-locations where q jumps or kinks."""
        return np.empty(0)

    def inflection_set(self):
        """Inflection points xi for which q is known to lie in the unimodal cone.

        Returns None when unknown, a tuple (lo, hi) for an interval.
        """
        return None

    def as_segments(self):
        return PiecewiseAffine([0.0, 1.0], [0.0], [0.0], [1.0], base=self)


# ---------------------------------------------------------------- analytic


class NormalQuantile(QuantileFunction):
    kind = "normal"

    def __init__(self, loc=0.0, scale=1.0):
        if not scale > 0:
            raise ParameterError("normal scale must be positive")
        self.loc = float(loc)
        self.scale = float(scale)
        self._init_moments()

    def __repr__(self):
        return f"normal({self.loc:g},{self.scale:g})"

    def __call__(self, u):
        return self.loc + self.scale * special.ndtri(u)

    def cdf(self, x):
        return special.ndtr((np.asarray(x, dtype=float) - self.loc) / self.scale)

    @staticmethod
    def _phi(z):
        return np.where(np.isfinite(z), np.exp(-0.5 * np.square(np.where(np.isfinite(z), z, 0.0))) / math.sqrt(2 * math.pi), 0.0)

    def _std_pi(self, a, b):
        za, zb = special.ndtri(a), special.ndtri(b)
        return float(self._phi(za) - self._phi(zb))

    def partial_integral(self, a, b):
        _check_interval(a, b)
        return self.loc * (b - a) + self.scale * self._std_pi(a, b)

    def _std_mi(self, a, b):
        def prim(u):
            z = special.ndtri(u)
            if not np.isfinite(z):
                return 0.0 if z < 0 else 0.5 / _SQRT_PI
            return -u * float(self._phi(z)) + special.ndtr(math.sqrt(2) * z) / (2 * _SQRT_PI)
        return prim(b) - prim(a)

    def moment_integral(self, a, b):
        _check_interval(a, b)
        return self.loc * (b * b - a * a) / 2 + self.scale * self._std_mi(a, b)

    def square_integral(self, a, b):
        _check_interval(a, b)

        def zphi(u):
            z = special.ndtri(u)
            return 0.0 if not np.isfinite(z) else z * float(self._phi(z))
        std_si = (b - a) - (zphi(b) - zphi(a))
        return (self.loc ** 2 * (b - a) + 2 * self.loc * self.scale * self._std_pi(a, b)
                + self.scale ** 2 * std_si)

    def inflection_set(self):
        return (0.5, 0.5)


class StudentTQuantile(QuantileFunction):
    """loc + scale * T_nu^{-1}(u); use `standardized_t` for unit variance."""

    kind = "student_t"

    def __init__(self, df, loc=0.0, scale=1.0):
        if not df > 2:
            raise ParameterError("student_t needs df > 2 for a finite variance")
        if not scale > 0:
            raise ParameterError("student_t scale must be positive")
        self.df = float(df)
        self.loc = float(loc)
        self.scale = float(scale)
        self._dist = stats.t(self.df)
        self._init_moments()

    def __repr__(self):
        return f"t({self.df:g},{self.loc:g},{self.scale:g})"

    def __call__(self, u):
        return self.loc + self.scale * self._dist.ppf(u)

    def cdf(self, x):
        return self._dist.cdf((np.asarray(x, dtype=float) - self.loc) / self.scale)

    def _x(self, u):
        return float(self._dist.ppf(u))

    def _first(self, x):
        # antiderivative of x f(x)
        nu = self.df
        if not np.isfinite(x):
            return 0.0
        return -(nu + x * x) * float(self._dist.pdf(x)) / (nu - 1)

    def _second(self, x):
        # antiderivative of x^2 f(x)
        nu = self.df
        if x == -np.inf:
            return 0.0
        if x == np.inf:
            return nu / (nu - 2)
        return (nu * float(self._dist.cdf(x)) - x * (nu + x * x) * float(self._dist.pdf(x))) / (nu - 2)

    def _std_pi(self, a, b):
        return self._first(self._x(b)) - self._first(self._x(a))

    def partial_integral(self, a, b):
        _check_interval(a, b)
        return self.loc * (b - a) + self.scale * self._std_pi(a, b)

    def square_integral(self, a, b):
        _check_interval(a, b)
        xa, xb = self._x(a), self._x(b)
        return (self.loc ** 2 * (b - a) + 2 * self.loc * self.scale * self._std_pi(a, b)
                + self.scale ** 2 * (self._second(xb) - self._second(xa)))

    def moment_integral(self, a, b):
        _check_interval(a, b)
        if b == a:
            return 0.0
        # u = F(x): int x F(x) f(x) dx over the x-range
        xa, xb = self._x(a), self._x(b)
        val, _ = integrate.quad(lambda x: x * self._dist.cdf(x) * self._dist.pdf(x), xa, xb,
                                limit=200, epsabs=1e-13, epsrel=1e-12)
        return self.loc * (b * b - a * a) / 2 + self.scale * val

    def inflection_set(self):
        return (0.5, 0.5)


def standardized_t(df):
    """Student-t reference with mean 0 and variance 1."""
    return StudentTQuantile(df, 0.0, math.sqrt((df - 2.0) / df))


class UniformQuantile(QuantileFunction):
    kind = "uniform"

    def __init__(self, low=0.0, high=1.0):
        if not high > low:
            raise ParameterError("uniform needs high > low")
        self.low = float(low)
        self.high = float(high)
        self._init_moments()

    def __repr__(self):
        return f"uniform({self.low:g},{self.high:g})"

    def __call__(self, u):
        return self.low + (self.high - self.low) * np.asarray(u, dtype=float)

    def cdf(self, x):
        return np.clip((np.asarray(x, dtype=float) - self.low) / (self.high - self.low), 0.0, 1.0)

    def partial_integral(self, a, b):
        _check_interval(a, b)
        w = self.high - self.low
        return self.low * (b - a) + w * (b * b - a * a) / 2

    def moment_integral(self, a, b):
        _check_interval(a, b)
        w = self.high - self.low
        return self.low * (b * b - a * a) / 2 + w * (b ** 3 - a ** 3) / 3

    def square_integral(self, a, b):
        _check_interval(a, b)
        lo, w = self.low, self.high - self.low
        return lo * lo * (b - a) + lo * w * (b * b - a * a) + w * w * (b ** 3 - a ** 3) / 3

    def inflection_set(self):
        return (0.0, 1.0)


# --------------------------------------------------------------- empirical


class EmpiricalQuantile(QuantileFunction):
    """Step quantile: q(u) = x_(i) for u in ((i-1)/n, i/n]."""

    kind = "empirical"

    def __init__(self, sample):
        x = np.sort(np.asarray(sample, dtype=float).ravel())
        if x.size == 0 or not np.all(np.isfinite(x)):
            raise ParameterError("empirical sample must be non-empty and finite")
        self.values = x
        self.n = x.size
        n = self.n
        edges = np.arange(n + 1) / n
        self._c0 = np.concatenate([[0.0], np.cumsum(x) / n])
        self._c1 = np.concatenate([[0.0], np.cumsum(x * (edges[1:] ** 2 - edges[:-1] ** 2) / 2)])
        self._c2 = np.concatenate([[0.0], np.cumsum(x * x) / n])
        self._init_moments()

    def __repr__(self):
        return f"empirical(n={self.n})"

    def _index(self, u, right=False):
        u = np.asarray(u, dtype=float)
        k = np.floor(u * self.n) if right else np.ceil(u * self.n) - 1
        return np.clip(k, 0, self.n - 1).astype(int)

    def __call__(self, u):
        return self.values[self._index(u)]

    def right(self, u):
        return self.values[self._index(u, right=True)]

    def cdf(self, x):
        return np.searchsorted(self.values, np.asarray(x, dtype=float), side="right") / self.n

    def _cum(self, u, which):
        n = self.n
        k = min(int(math.floor(u * n)), n)
        rest = u - k / n
        if which == 0:
            base, extra = self._c0[k], (rest * self.values[k] if k < n else 0.0)
        elif which == 1:
            base = self._c1[k]
            extra = self.values[k] * (u * u - (k / n) ** 2) / 2 if k < n else 0.0
        else:
            base, extra = self._c2[k], (rest * self.values[k] ** 2 if k < n else 0.0)
        return base + extra

    def partial_integral(self, a, b):
        _check_interval(a, b)
        return self._cum(b, 0) - self._cum(a, 0)

    def moment_integral(self, a, b):
        _check_interval(a, b)
        return self._cum(b, 1) - self._cum(a, 1)

    def square_integral(self, a, b):
        _check_interval(a, b)
        return self._cum(b, 2) - self._cum(a, 2)

    @property
    def breakpoints(self):
        return np.arange(1, self.n) / self.n


# ----------------------------------------------------------- affine family


class AffineQuantile(QuantileFunction):
    """shift + scale * base(u) with scale > 0."""

    kind = "affine_of"

    def __init__(self, base, shift=0.0, scale=1.0):
        if not scale > 0:
            raise ParameterError("affine scale must be positive to keep q non-decreasing")
        self.base = base
        self.shift = float(shift)
        self.scale = float(scale)
        self._init_moments()

    def __repr__(self):
        return f"{self.shift:g}+{self.scale:g}*{self.base!r}"

    def __call__(self, u):
        return self.shift + self.scale * self.base(u)

    def right(self, u):
        return self.shift + self.scale * self.base.right(u)

    def cdf(self, x):
        return self.base.cdf((np.asarray(x, dtype=float) - self.shift) / self.scale)

    def partial_integral(self, a, b):
        return self.shift * (b - a) + self.scale * self.base.partial_integral(a, b)

    def moment_integral(self, a, b):
        return self.shift * (b * b - a * a) / 2 + self.scale * self.base.moment_integral(a, b)

    def square_integral(self, a, b):
        return (self.shift ** 2 * (b - a) + 2 * self.shift * self.scale * self.base.partial_integral(a, b)
                + self.scale ** 2 * self.base.square_integral(a, b))

    @property
    def breakpoints(self):
        return self.base.breakpoints

    def inflection_set(self):
        return self.base.inflection_set()


def location_scale(q, loc, scale):
    """Return loc + scale*q, collapsing nested affine wrappers and closed families."""
    if isinstance(q, NormalQuantile):
        return NormalQuantile(loc + scale * q.loc, scale * q.scale)
    if isinstance(q, StudentTQuantile):
        return StudentTQuantile(q.df, loc + scale * q.loc, scale * q.scale)
    if isinstance(q, UniformQuantile):
        return UniformQuantile(loc + scale * q.low, loc + scale * q.high)
    if isinstance(q, AffineQuantile):
        return AffineQuantile(q.base, loc + scale * q.shift, scale * q.scale)
    if isinstance(q, SegmentQuantile):
        return SegmentQuantile(q.segments.affine(loc, scale))
    return AffineQuantile(q, loc, scale)


def standardize(q):
    if q.degenerate:
        raise ParameterError("cannot standardize a degenerate (constant) quantile")
    return location_scale(q, -q.mean / q.std, 1.0 / q.std)


# ------------------------------------------------------ piecewise-affine


class PiecewiseAffine:
    """f(u) = c0 + c1*u + c2*F^{-1}(u) on each segment (breaks[i], breaks[i+1]).

    Used for weight functions, envelope derivatives and extremal quantiles.
    All products of two such functions over a shared base integrate exactly.
    """

    def __init__(self, breaks, c0, c1, c2, base=None):
        self.breaks = np.asarray(breaks, dtype=float)
        self.c0 = np.asarray(c0, dtype=float)
        self.c1 = np.asarray(c1, dtype=float)
        self.c2 = np.asarray(c2, dtype=float)
        m = self.c0.size
        if self.breaks.size != m + 1 or self.c1.size != m or self.c2.size != m:
            raise ParameterError("segment arrays have inconsistent lengths")
        if self.breaks[0] != 0.0 or self.breaks[-1] != 1.0 or np.any(np.diff(self.breaks) <= 0):
            raise ParameterError("segment breaks must increase strictly from 0 to 1")
        if base is None and np.any(self.c2 != 0):
            raise ParameterError("c2 terms need a base quantile")
        self.base = base

    @classmethod
    def build(cls, pieces, base=None, tol=0.0):
        """From (l, r, c0, c1, c2) tuples; drops empty pieces and merges equal neighbours."""
        out = []
        for l, r, a0, a1, a2 in sorted(pieces, key=lambda p: p[0]):
            if r - l <= tol:
                continue
            if out and out[-1][2:] == (a0, a1, a2) and abs(out[-1][1] - l) <= 1e-15:
                out[-1] = (out[-1][0], r, a0, a1, a2)
            else:
                out.append((l, r, a0, a1, a2))
        breaks = [out[0][0]] + [p[1] for p in out]
        breaks[0], breaks[-1] = 0.0, 1.0
        return cls(breaks, [p[2] for p in out], [p[3] for p in out], [p[4] for p in out], base)

    @property
    def n_segments(self):
        return self.c0.size

    @property
    def uses_base(self):
        return bool(np.any(self.c2 != 0))

    def _eval(self, u, side):
        u = np.asarray(u, dtype=float)
        idx = np.clip(np.searchsorted(self.breaks, u, side=side) - 1, 0, self.n_segments - 1)
        out = self.c0[idx] + self.c1[idx] * u
        if self.uses_base:
            c2 = self.c2[idx]
            fq = self.base(u) if side == "left" else self.base.right(u)
            out = out + np.where(c2 != 0, c2 * np.where(c2 != 0, fq, 0.0), 0.0)
        return out

    def __call__(self, u):
        return self._eval(u, "left")

    def right(self, u):
        return self._eval(u, "right")

    def affine(self, shift, scale):
        return PiecewiseAffine(self.breaks, shift + scale * self.c0, scale * self.c1,
                               scale * self.c2, self.base)

    def add_base(self, lam):
        """Add lam*F^{-1}(u) on every segment."""
        return PiecewiseAffine(self.breaks, self.c0, self.c1, self.c2 + lam, self.base)

    def _base_ints(self, a, b, need_m, need_s):
        f = self.base
        p = f.partial_integral(a, b)
        m = f.moment_integral(a, b) if need_m else 0.0
        s = f.square_integral(a, b) if need_s else 0.0
        return p, m, s

    def _segments_on(self, a, b):
        lo = max(int(np.searchsorted(self.breaks, a, side="right")) - 1, 0)
        hi = min(int(np.searchsorted(self.breaks, b, side="left")), self.n_segments)
        for i in range(lo, hi):
            l, r = max(self.breaks[i], a), min(self.breaks[i + 1], b)
            if r > l:
                yield i, l, r

    def integral(self, a=0.0, b=1.0):
        tot = 0.0
        for i, l, r in self._segments_on(a, b):
            tot += self.c0[i] * (r - l) + self.c1[i] * (r * r - l * l) / 2
            if self.c2[i] != 0:
                tot += self.c2[i] * self.base.partial_integral(l, r)
        return tot

    def moment(self, a=0.0, b=1.0):
        tot = 0.0
        for i, l, r in self._segments_on(a, b):
            tot += self.c0[i] * (r * r - l * l) / 2 + self.c1[i] * (r ** 3 - l ** 3) / 3
            if self.c2[i] != 0:
                tot += self.c2[i] * self.base.moment_integral(l, r)
        return tot

    def square(self, a=0.0, b=1.0):
        return self.inner(self, a, b)

    def inner(self, other, a=0.0, b=1.0):
        """int_a^b self*other, exact when both share the same base."""
        if self.uses_base and other.uses_base and self.base is not other.base:
            return _quad_product(self, other, a, b)
        base = self.base if self.uses_base else other.base
        cuts = np.union1d(self.breaks, other.breaks)
        cuts = cuts[(cuts >= a) & (cuts <= b)]
        cuts = np.union1d(cuts, [a, b])
        tot = 0.0
        for l, r in zip(cuts[:-1], cuts[1:]):
            if r <= l:
                continue
            mid = 0.5 * (l + r)
            i = min(int(np.searchsorted(self.breaks, mid)) - 1, self.n_segments - 1)
            j = min(int(np.searchsorted(other.breaks, mid)) - 1, other.n_segments - 1)
            a0, a1, a2 = self.c0[i], self.c1[i], self.c2[i]
            b0, b1, b2 = other.c0[j], other.c1[j], other.c2[j]
            i0, i1, i2 = r - l, (r * r - l * l) / 2, (r ** 3 - l ** 3) / 3
            tot += a0 * b0 * i0 + (a0 * b1 + a1 * b0) * i1 + a1 * b1 * i2
            kp, km, ks = a0 * b2 + a2 * b0, a1 * b2 + a2 * b1, a2 * b2
            if kp or km or ks:
                p, m, s = base.partial_integral(l, r), 0.0, 0.0
                if km:
                    m = base.moment_integral(l, r)
                if ks:
                    s = base.square_integral(l, r)
                tot += kp * p + km * m + ks * s
        return tot

    def mean_var(self):
        m = self.integral()
        return m, max(self.square() - m * m, 0.0)

    def is_nondecreasing(self, tol=1e-9):
        """Check monotonicity within segments (sampled) and across breaks."""
        if not self.uses_base and np.any(self.c1 < -tol):
            return False
        inner = self.breaks[1:-1]
        if inner.size and np.any(self.right(inner) < self(inner) - tol * (1 + np.abs(self(inner)))):
            return False
        if self.uses_base and np.any(self.c2 < -tol):
            return False
        return True


def _panel_points(extra=()):
    pts = [TAIL_DELTA, 1 - TAIL_DELTA]
    for k in range(1, 9):
        pts += [10.0 ** -k, 1 - 10.0 ** -k]
    pts += list(np.linspace(0.1, 0.9, 9))
    pts += [p for p in extra if TAIL_DELTA < p < 1 - TAIL_DELTA]
    return np.unique(pts)


def gauss_legendre(f, a, b, breaks=()):
    """Composite 64-node Gauss-Legendre of f on [a,b] with panels at `breaks`."""
    cuts = np.unique(np.concatenate([[a, b], [x for x in breaks if a < x < b]]))
    tot = 0.0
    for l, r in zip(cuts[:-1], cuts[1:]):
        x = 0.5 * (r - l) * _GL_NODES + 0.5 * (r + l)
        tot += 0.5 * (r - l) * float(np.dot(_GL_WEIGHTS, f(x)))
    return tot


def _quad_product(p, q, a=0.0, b=1.0):
    brk = list(getattr(p, "breaks", ())) + list(getattr(q, "breaks", ()))
    if hasattr(p, "breakpoints"):
        brk += list(p.breakpoints)
    if hasattr(q, "breakpoints"):
        brk += list(q.breakpoints)
    lo, hi = max(a, TAIL_DELTA), min(b, 1 - TAIL_DELTA)
    pts = _panel_points(brk)
    body = gauss_legendre(lambda u: p(u) * q(u), lo, hi, pts)
    # tails: comonotone quantiles, so the product is bounded by the geometric mean
    tail = 0.0
    for l, r in ((a, lo), (hi, b)):
        if r > l:
            sp, sq = _square(p, l, r), _square(q, l, r)
            s = np.sign(p(0.5 * (l + r))) * np.sign(q(0.5 * (l + r)))
            tail += s * math.sqrt(max(sp, 0.0) * max(sq, 0.0))
    return body + tail


def _square(f, a, b):
    if isinstance(f, PiecewiseAffine):
        return f.square(a, b)
    return f.square_integral(a, b)


class SegmentQuantile(QuantileFunction):
    """Quantile given by a non-decreasing PiecewiseAffine."""

    kind = "grid"

    def __init__(self, segments, check=True):
        if check and not segments.is_nondecreasing(1e-7):
            raise ParameterError("segment quantile is not non-decreasing")
        self.segments = segments
        self._init_moments()

    def __repr__(self):
        return f"segments(n={self.segments.n_segments})"

    def __call__(self, u):
        return self.segments(u)

    def right(self, u):
        return self.segments.right(u)

    def partial_integral(self, a, b):
        _check_interval(a, b)
        return self.segments.integral(a, b)

    def moment_integral(self, a, b):
        _check_interval(a, b)
        return self.segments.moment(a, b)

    def square_integral(self, a, b):
        _check_interval(a, b)
        return self.segments.square(a, b)

    @property
    def breakpoints(self):
        own = self.segments.breaks[1:-1]
        if self.segments.uses_base:
            own = np.union1d(own, self.segments.base.breakpoints)
        return own

    def cdf(self, x):
        x = np.atleast_1d(np.asarray(x, dtype=float))
        out = np.empty_like(x)
        for k, xv in enumerate(x):
            out[k] = self._cdf1(xv)
        return out

    def _cdf1(self, x):
        # sup{u : q(u) <= x}
        lo, hi = 0.0, 1.0
        if self(1 - 1e-15) <= x:
            return 1.0
        if self.right(1e-15) > x:
            return 0.0
        for _ in range(100):
            mid = 0.5 * (lo + hi)
            if self(mid) <= x:
                lo = mid
            else:
                hi = mid
            if hi - lo < 1e-15:
                break
        # the sup sits exactly on a breakpoint when x falls in a gap of q
        bp = self.breakpoints
        if bp.size:
            j = int(np.argmin(np.abs(bp - lo)))
            if abs(bp[j] - lo) <= 1e-12 and self(bp[j]) <= x:
                return float(bp[j])
        return lo

    def inflection_set(self):
        s = self.segments
        if s.uses_base:
            return None
        slopes = s.c1
        jumps = s.right(s.breaks[1:-1]) - s(s.breaks[1:-1])
        if np.any(np.abs(jumps) > 1e-12):
            return None
        # concave-then-convex: slopes non-increasing up to the minimum, then non-decreasing
        k = int(np.argmin(slopes))
        if np.all(np.diff(slopes[: k + 1]) <= 1e-12) and np.all(np.diff(slopes[k:]) >= -1e-12):
            return (float(s.breaks[k]), float(s.breaks[k + 1]))
        return None


def grid_quantile(u, values):
    """Piecewise-linear quantile through (u_i, values_i) with u_0 = 0, u_m = 1."""
    u = np.asarray(u, dtype=float)
    v = np.asarray(values, dtype=float)
    if u[0] != 0.0 or u[-1] != 1.0:
        raise ParameterError("grid must start at 0 and end at 1")
    if np.any(np.diff(v) < 0):
        raise ParameterError("grid values must be non-decreasing")
    slope = np.diff(v) / np.diff(u)
    c0 = v[:-1] - slope * u[:-1]
    return SegmentQuantile(PiecewiseAffine(u, c0, slope, np.zeros_like(slope)))


def refined_grid(m=4096, exponent=2.0):
    """u-grid on [0,1] clustered toward both ends."""
    s = np.linspace(-1.0, 1.0, m)
    u = 0.5 + 0.5 * np.sign(s) * (1 - (1 - np.abs(s)) ** exponent)
    u[0], u[-1] = 0.0, 1.0
    return u


def quantile_from_ppf(ppf, m=4096, exponent=2.0, clip=1e-12):
    """Grid quantile sampled from a callable ppf (endpoints clipped)."""
    u = refined_grid(m, exponent)
    v = ppf(np.clip(u, clip, 1 - clip))
    v = np.maximum.accumulate(v)
    return grid_quantile(u, v)


# ------------------------------------------------------------- Wasserstein


def inner(p, q):
    """int_0^1 p(u) q(u) du."""
    sp = p.segments if isinstance(p, SegmentQuantile) else p.as_segments()
    sq = q.segments if isinstance(q, SegmentQuantile) else q.as_segments()
    if sp.uses_base and sq.uses_base and sp.base is not sq.base:
        pb, qb = sp.base, sq.base
        if _same_family(pb, qb):
            return sp.inner(_rebase(sq, pb))
        return _quad_product(p, q)
    return sp.inner(sq)


def _same_family(a, b):
    if type(a) is not type(b):
        return False
    if isinstance(a, EmpiricalQuantile):
        return np.array_equal(a.values, b.values)
    keys = {NormalQuantile: ("loc", "scale"), StudentTQuantile: ("df", "loc", "scale"),
            UniformQuantile: ("low", "high")}.get(type(a))
    if keys is None:
        return a is b
    return all(getattr(a, k) == getattr(b, k) for k in keys)


def _rebase(seg, base):
    return PiecewiseAffine(seg.breaks, seg.c0, seg.c1, seg.c2, base)


def wasserstein2(p, q):
    d2 = p.square_integral(0.0, 1.0) + q.square_integral(0.0, 1.0) - 2 * inner(p, q)
    return math.sqrt(max(d2, 0.0))


def moments(q):
    return q.mean, q.std


def partial_integral(q, a, b):
    return q.partial_integral(a, b)


# ---------------------------------------------------------------- I/O


def read_sample_csv(path, header=None):
    """Single-column CSV; header=None sniffs a non-numeric first row."""
    vals = []
    with open(path, newline="") as fh:
        rows = [r for r in csv.reader(fh) if r and r[0].strip()]
    if not rows:
        raise ParameterError(f"{path}: no data")
    if header is None:
        try:
            float(rows[0][0])
            header = False
        except ValueError:
            header = True
    for r in rows[1 if header else 0:]:
        vals.append(float(r[0]))
    return EmpiricalQuantile(vals)


def write_quantile_csv(path, q, u=None):
    u = refined_grid(513) if u is None else np.asarray(u)
    u = np.clip(u, 1e-9, 1 - 1e-9)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["u", "value"])
        for a, b in zip(u, q(u)):
            w.writerow([repr(float(a)), repr(float(b))])


def read_grid_csv(path):
    data = np.loadtxt(path, delimiter=",", skiprows=1)
    return grid_quantile(data[:, 0], data[:, 1])


def find_root(f, lo, hi, xtol=1e-14, rtol=1e-12):
    return optimize.brentq(f, lo, hi, xtol=xtol, rtol=rtol, maxiter=500)


_REF = re.compile(r"^\s*([A-Za-z_]+)\s*(?:\((.*)\))?\s*$")


def parse_reference(text):
    """``normal(0,1)``, ``t(5)`` / ``t(5,loc,scale)``, ``uniform(a,b)``,
    ``sample:path.csv`` (empirical) or ``grid:path.csv`` (u,value columns)."""
    text = str(text).strip()
    for prefix, reader in (("sample:", read_sample_csv), ("grid:", read_grid_csv)):
        if text.lower().startswith(prefix):
            return reader(text[len(prefix):])
    m = _REF.match(text)
    if not m:
        raise ParameterError(f"cannot parse reference {text!r}")
    name = m.group(1).lower()
    try:
        args = [float(a) for a in (m.group(2) or "").split(",") if a.strip()]
    except ValueError:
        raise ParameterError(f"non-numeric argument in reference {text!r}") from None
    if name in ("normal", "gaussian", "n") and len(args) <= 2:
        return NormalQuantile(*args)
    if name in ("t", "student_t", "student") and 1 <= len(args) <= 3:
        return StudentTQuantile(*args)
    if name in ("uniform", "u") and len(args) in (0, 2):
        return UniformQuantile(*args)
    raise ParameterError(f"unknown reference {text!r} (normal, t, uniform, sample:, grid:)")
