"""Worst- and best-case distortion risk over mean/variance/Wasserstein sets."""
from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize

from .distortion import negate, rho, usc_version, weight_of
from .envelope import RegimeError, g_lambda_envelope
from .reference import ParameterError, SegmentQuantile, location_scale, write_quantile_csv

TIE_TOL = 1e-10


class InfeasibleError(ValueError):
    def __init__(self, message, threshold):
        super().__init__(message)
        self.threshold = threshold


class NumericError(ArithmeticError):
    pass


@dataclass(frozen=True)
class MomentWassersteinSet:
    mu: float
    sigma: float
    epsilon: float
    reference: object

    def __post_init__(self):
        if not self.sigma > 0:
            raise ParameterError("sigma must be positive")
        if not self.epsilon > 0:
            raise ParameterError("epsilon must be positive (use inf to drop the ball)")

    @property
    def lower_bound(self):
        F = self.reference
        return (F.mean - self.mu) ** 2 + (F.std - self.sigma) ** 2

    @property
    def feasible(self):
        return math.isinf(self.epsilon) or self.epsilon >= self.lower_bound * (1 - 1e-12)

    def check_feasible(self):
        if not self.feasible:
            lb = self.lower_bound
            raise InfeasibleError(
                f"epsilon={self.epsilon:.6g} is below the moment floor {lb:.10g}; "
                f"the set is empty", lb)

    def upper_threshold(self, c0):
        F = self.reference
        return self.lower_bound + 2 * F.std * self.sigma * (1 - c0)


@dataclass
class BoundResult:
    value: float
    lam: float | None
    extremal_quantile: object | None
    regime: str
    attained: bool
    diagnostics: dict = field(default_factory=dict)

    def to_dict(self, quantile_csv_path=None):
        d = {"value": self.value, "lambda": self.lam, "regime": self.regime,
             "attained": self.attained}
        if quantile_csv_path:
            d["quantile_csv_path"] = str(quantile_csv_path)
        return d

    def to_json(self, quantile_csv_path=None):
        return json.dumps(self.to_dict(quantile_csv_path))

    def write_quantile(self, path, u=None):
        if self.extremal_quantile is None:
            raise ParameterError("no extremal quantile to write")
        write_quantile_csv(path, self.extremal_quantile, u)


# ------------------------------------------------------------ quantiles


def h_lambda(env, mu, sigma):
    """mu + sigma*(k(u) - a_lam)/b_lam as a quantile."""
    b = env.b_lambda
    if env.is_constant or b <= 0:
        raise RegimeError("envelope derivative is constant; no extremal quantile")
    scale = sigma / b
    return SegmentQuantile(env.segments.affine(mu - scale * env.a_lambda, scale), check=False)


def distance_sq(env, S):
    """d_W(F, H_lam)^2 from the envelope, without forming h."""
    return S.lower_bound + 2 * S.reference.std * S.sigma * env.one_minus_corr()


def _envelope(g, F, lam, method):
    return g_lambda_envelope(g, F, lam, method=method)


def solve_lambda(g, S, method="auto", max_iter=200, rtol=1e-10):
    """lambda_eps > 0 with d_W(F, H_lam) = sqrt(eps) in the interior regime."""
    g = usc_version(g)
    eps = S.epsilon
    env0 = _envelope(g, S.reference, 0.0, method)
    c0 = 0.0 if env0.is_constant else env0.corr()
    lo_b, up_b = S.lower_bound, S.upper_threshold(c0)
    if not (lo_b < eps < up_b):
        raise RegimeError(f"epsilon={eps:.6g} is outside the interior regime ({lo_b:.6g}, {up_b:.6g})")
    trail = []

    def f(lam):
        env = _envelope(g, S.reference, lam, method)
        trail.append((lam, env))
        return distance_sq(env, S) - eps

    hi = 1.0
    it = 0
    while f(hi) > 0:
        hi *= 2.0
        it += 1
        if it > 200:
            raise NumericError("could not bracket lambda")
    lo = 0.0
    if hi > 1.0:
        lo = hi / 2
    lam = optimize.brentq(f, lo, hi, xtol=1e-300, rtol=max(rtol, 4 * np.finfo(float).eps),
                          maxiter=max_iter)
    return lam, trail


def lambda_concave_closed_form(g, S):
    """Closed-form multiplier for concave g (uses mu_F, sigma_F, V_g, C_{g,F})."""
    g = usc_version(g)
    if not g.is_concave:
        raise ParameterError("closed form needs a concave g")
    F = S.reference
    w = weight_of(g)
    wm, vg = w.mean_var()
    cg = w.inner(F.as_segments()) - wm * F.mean
    mu, sd, mf, sf = S.mu, S.sigma, F.mean, F.std
    ce = (mf ** 2 + sf ** 2 + mu ** 2 + sd ** 2 - 2 * mu * mf - S.epsilon) / 2
    den = ce * ce - sd * sd * sf * sf
    # C_eps is a covariance bounded by sigma*sigma_F, so den < 0 inside the regime
    if den == 0 or ce <= 0:
        raise RegimeError("epsilon is outside the interior regime (C_eps at its bound)")
    disc = cg * cg - sf * sf * (vg * ce * ce - sd * sd * cg * cg) / den
    if disc < 0:
        raise RegimeError("negative discriminant: epsilon is outside the interior regime")
    lam = (-cg + math.sqrt(disc)) / (sf * sf)
    if lam < 0:
        raise RegimeError("negative multiplier: epsilon is above the upper threshold")
    return lam


# ------------------------------------------------------------ main entry


def worst_case(g, S, method="auto", check_continuity=None):
    """Sharp sup of rho_g over the set S (positive values are losses)."""
    S.check_feasible()
    gh = usc_version(g)
    attained = gh is g or gh.same_as(g)
    F = S.reference
    env0 = _envelope(gh, F, 0.0, method)
    const = env0.is_constant
    c0 = 0.0 if const else env0.corr()
    upper = S.upper_threshold(c0)
    diag = {"c0": c0, "lower": S.lower_bound, "upper": upper, "envelope": env0.method}
    eps = S.epsilon
    if not math.isinf(eps) and eps <= S.lower_bound + TIE_TOL * (1 + S.lower_bound):
        # the set is one law: F shifted and rescaled to (mu, sigma)
        if F.degenerate:
            raise ParameterError("reference is degenerate; the set at the floor is undefined")
        h = location_scale(F, S.mu - S.sigma * F.mean / F.std, S.sigma / F.std)
        return BoundResult(rho(g, h), math.inf, h, "singleton", True, diag)
    if math.isinf(eps) or eps >= upper - TIE_TOL * (1 + abs(upper)):
        if const:
            return BoundResult(gh.total * S.mu, 0.0, None, "constant_gstar",
                               attained and gh.is_concave, diag)
        h = h_lambda(env0, S.mu, S.sigma)
        val = rho(gh, h)
        return _finish(val, 0.0, h, "boundary_lambda0", attained, diag)
    lam, trail = solve_lambda(gh, S, method)
    env = _envelope(gh, F, lam, method)
    h = h_lambda(env, S.mu, S.sigma)
    val = rho(gh, h)
    if check_continuity is None:
        check_continuity = env.method == "generic"
    if check_continuity:
        _continuity(gh, S, trail, diag)
    diag["iterations"] = len(trail)
    return _finish(val, lam, h, "interior", attained, diag)


def _finish(val, lam, h, regime, attained, diag):
    if not attained:
        diag["underlying_regime"] = regime
        return BoundResult(val, lam, None, "usc_no_attainer", False, diag)
    return BoundResult(val, lam, h, regime, True, diag)


def _continuity(g, S, trail, diag):
    pts = sorted((lam, rho(g, h_lambda(env, S.mu, S.sigma))) for lam, env in trail
                 if not env.is_constant)
    vals = np.array([v for _, v in pts])
    bad = np.any(np.diff(vals) > 1e-7 * (1 + np.abs(vals[:-1])))
    diag["continuity_ok"] = not bad
    if bad:
        warnings.warn("rho along the lambda trajectory is not monotone; the continuity "
                      "hypothesis may fail for this g", RuntimeWarning)


def best_case(g, S, method="auto"):
    """inf of rho_g over S, as minus the sup of rho_{-g}."""
    r = worst_case(negate(g), S, method)
    return BoundResult(-r.value, r.lam, r.extremal_quantile, r.regime, r.attained,
                       dict(r.diagnostics, side="best"))
