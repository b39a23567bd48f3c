import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from robustrisk.distortion import make_distortion, weight_of
from robustrisk.reference import (NormalQuantile, ParameterError, PiecewiseAffine,
                                  location_scale, standardized_t, wasserstein2)
from robustrisk.unimodal import (UnimodalCone, in_cone, project, project_step,
                                 unimodal_wasserstein_feasibility, worst_case_interval_inflection,
                                 worst_case_unimodal, worst_case_unimodal_wasserstein)
from robustrisk.worstcase import InfeasibleError, MomentWassersteinSet, worst_case

from oracles import cone_oracle, l2

FAST = 64


def step(br, lv):
    lv = np.asarray(lv, float)
    return PiecewiseAffine(br, lv, np.zeros_like(lv), np.zeros_like(lv))


def cone_member(rng, xi, k=6):
    """Random continuous non-decreasing f, concave on (0, xi), convex on (xi, 1)."""
    left = np.sort(rng.uniform(0, xi, k))
    right = np.sort(rng.uniform(xi, 1, k))
    br = np.unique(np.r_[0.0, left, xi, right, 1.0])
    mid = (br[:-1] + br[1:]) / 2
    s = np.empty(mid.size)
    L = mid < xi
    s[L] = np.sort(rng.exponential(1, L.sum()))[::-1]
    s[~L] = np.sort(rng.exponential(1, (~L).sum()))
    v = np.r_[0.0, np.cumsum(s * np.diff(br))] + rng.normal()
    return PiecewiseAffine(br, v[:-1] - s * br[:-1], s, np.zeros_like(s))


def dist(p, q):
    return math.sqrt(max(p.square() - 2 * p.inner(q) + q.square(), 0.0))


def test_mmd_projection_is_linear():
    pr = project_step(([0, 0.5, 1], [-1.0, 1.0]), 0.5)
    exact = PiecewiseAffine([0, 1], [-1.5], [3.0], [0.0])
    assert dist(pr.projected, exact) <= 1e-6
    assert pr.b_hat == pytest.approx(math.sqrt(3) / 2, abs=1e-9)


@pytest.mark.parametrize("xi", [0.0, 0.2, 0.5, 0.9, 1.0])
def test_gd_weight_is_fixed(xi):
    w = weight_of(make_distortion("gd"))
    pr = project(w, xi)
    assert dist(pr.projected, w) <= 1e-8
    assert pr.diagnostics.get("fixed_point")


def test_cone_membership():
    assert in_cone(PiecewiseAffine([0, 1], [0.0], [1.0], [0.0]), 0.3)
    assert not in_cone(step([0, 0.5, 1], [0, 1]), 0.5)
    rng = np.random.default_rng(1)
    f = cone_member(rng, 0.4)
    assert in_cone(f, 0.4) and UnimodalCone(xi=0.4).contains(f)
    assert UnimodalCone(interval=(0.3, 0.5)).contains(f)
    with pytest.raises(ParameterError):
        UnimodalCone(xi=1.5)
    with pytest.raises(ParameterError):
        UnimodalCone(xi=0.3, interval=(0.1, 0.2))


def test_projection_against_oracle_small_battery():
    rng = np.random.default_rng(31)
    for _ in range(8):
        n = int(rng.integers(1, 17))
        br = np.sort(np.r_[0, rng.uniform(0, 1, n - 1), 1])
        lv = rng.normal(size=n)
        xi = float(rng.uniform())
        pr = project_step((br, lv), xi)
        o = cone_oracle(br, lv, xi)
        assert l2(pr.projected, o) <= 1e-4
        a, b = pr.orthogonality()
        assert abs(a) <= 1e-6 and abs(b) <= 1e-6
        assert in_cone(pr.projected, xi, 1e-9)


@given(st.integers(0, 2 ** 31), st.integers(1, 12), st.floats(0.0, 1.0))
def test_projection_beats_cone_members(seed, n, xi):
    rng = np.random.default_rng(seed)
    br = np.unique(np.r_[0, rng.uniform(0, 1, n - 1), 1])
    g = step(br, rng.normal(size=br.size - 1))
    pr = project_step(g, xi)
    r = pr.residual()
    assert in_cone(pr.projected, xi, 1e-9)
    for _ in range(5):
        o = cone_member(rng, xi)
        # optimality of a projection onto a convex cone
        assert r <= dist(g, o) + 1e-9
        assert dist(pr.projected, o) ** 2 <= dist(g, o) ** 2 - r * r + 1e-8


def test_projection_is_idempotent():
    rng = np.random.default_rng(4)
    pr = project_step(([0, 0.2, 0.7, 1], [1.0, -2.0, 0.5]), 0.3)
    again = project(pr.projected, 0.3)
    assert dist(again.projected, pr.projected) <= 1e-9
    f = cone_member(rng, 0.6)
    assert dist(project(f, 0.6).projected, f) == 0.0


def test_step_approximation_bounds():
    # a normal quantile is not a step function: it is averaged first and the error reported
    f = NormalQuantile().as_segments()
    pr = project(f, 0.2, n=FAST)
    assert in_cone(pr.projected, 0.2, 1e-9)
    d = pr.diagnostics
    assert d["step_pieces"] <= FAST and d["step_error"] > 0
    fine = project(f, 0.2, n=4 * FAST)
    assert fine.diagnostics["step_error"] < d["step_error"]
    assert dist(pr.projected, fine.projected) <= d["step_error"] + fine.diagnostics["step_error"]


# -------------------------------------------------------------- bounds


def test_unimodal_known_values():
    r = worst_case_unimodal(make_distortion("gd"), 0.0, 2.0, 0.3)
    assert r.value == pytest.approx(2.0 / math.sqrt(3), abs=1e-9)
    r = worst_case_unimodal(make_distortion("mmd"), 1.0, 1.0, 0.5)
    assert r.value == pytest.approx(math.sqrt(3) / 2, abs=1e-7)
    h = r.extremal_quantile
    assert h.mean == pytest.approx(1.0) and h.std == pytest.approx(1.0)


def test_unimodal_rejects_jumps():
    with pytest.raises(ParameterError):
        worst_case_unimodal(make_distortion("var(0.9)"), 0, 1, 0.5)
    with pytest.raises(ParameterError):
        worst_case_unimodal(make_distortion("es-var(0.9,0.95)"), 0, 1, 0.5)


def test_unimodal_threshold_infeasible_and_singleton():
    F = location_scale(standardized_t(5), 0.1, 1.2)
    mu, sigma, xi = 0.0, 1.0, 0.15
    thr, c0, fpr = unimodal_wasserstein_feasibility(F, mu, sigma, xi)
    assert thr > MomentWassersteinSet(mu, sigma, 1.0, F).lower_bound
    g = make_distortion("es(0.9)")
    with pytest.raises(InfeasibleError) as exc:
        worst_case_unimodal_wasserstein(g, MomentWassersteinSet(mu, sigma, thr * 0.99, F), xi)
    assert exc.value.threshold == pytest.approx(thr)
    assert f"{thr:.10g}" in str(exc.value)
    r = worst_case_unimodal_wasserstein(g, MomentWassersteinSet(mu, sigma, thr, F), xi)
    assert r.regime == "singleton"
    # independent recomputation of (F_xi - mu_F) sigma / sigma_F + mu
    P = project(F.as_segments(), xi).projected
    a, v = P.mean_var()
    u = np.linspace(0.001, 0.999, 999)
    expect = (P(u) - a) * sigma / math.sqrt(v) + mu
    assert np.max(np.abs(r.extremal_quantile(u) - expect)) <= 1e-7
    assert a == pytest.approx(F.mean, abs=1e-10)
    with pytest.raises(InfeasibleError):
        worst_case_unimodal_wasserstein(g, MomentWassersteinSet(mu, sigma, thr, F), xi,
                                        strict=True)


def test_unimodal_ball_interior_contract():
    F = NormalQuantile(0.0, 1.0)
    S0 = MomentWassersteinSet(0.1, 1.3, math.inf, F)
    g = make_distortion("es(0.9)")
    thr, _, _ = unimodal_wasserstein_feasibility(F, 0.1, 1.3, 0.3)
    eps = thr + 0.05
    r = worst_case_unimodal_wasserstein(g, MomentWassersteinSet(0.1, 1.3, eps, F), 0.3, n=FAST)
    assert r.regime == "interior"
    h = r.extremal_quantile
    assert h.mean == pytest.approx(0.1, abs=1e-9) and h.std == pytest.approx(1.3, abs=1e-9)
    assert wasserstein2(h, F) == pytest.approx(math.sqrt(eps), abs=1e-7)
    assert r.value <= worst_case_unimodal(g, 0.1, 1.3, 0.3).value + 1e-9
    assert r.value <= worst_case(g, S0).value


def test_bound_ordering_battery():
    rng = np.random.default_rng(8)
    for k in range(6):
        g = make_distortion(["es(0.9)", "gd", "mmd", "iqd(0.1)"][k % 4])
        if g.has_jumps:
            g = make_distortion("es(0.8)")
        F = NormalQuantile(rng.normal(0, 0.2), rng.uniform(0.7, 1.5))
        mu, sigma, xi = rng.normal(0, 0.2), rng.uniform(0.7, 1.5), rng.uniform(0.1, 0.9)
        thr, _, _ = unimodal_wasserstein_feasibility(F, mu, sigma, xi)
        eps = thr + rng.uniform(0.01, 0.5)
        S = MomentWassersteinSet(mu, sigma, eps, F)
        uw = worst_case_unimodal_wasserstein(g, S, xi, n=FAST).value
        um = worst_case_unimodal(g, mu, sigma, xi).value
        mo = worst_case(g, MomentWassersteinSet(mu, sigma, math.inf, F)).value
        wb = worst_case(g, S).value
        assert uw <= um + 1e-7 and um <= mo + 1e-7 and uw <= wb + 1e-7


def test_interval_inflection_dominates_grid():
    g = make_distortion("es(0.9)")
    r = worst_case_interval_inflection(g, 0.0, 1.0, 0.2, 0.6, m=9)
    for xi in np.linspace(0.2, 0.6, 5):
        assert r.value >= worst_case_unimodal(g, 0.0, 1.0, xi).value - 1e-9
    assert r.diagnostics["unique"] is False


def test_projection_export(tmp_path):
    pr = project_step(([0, 0.5, 1], [-1.0, 1.0]), 0.5)
    pr.to_csv(tmp_path / "p.csv", n=5)
    assert (tmp_path / "p.csv").read_text().splitlines()[0] == "u,gamma,projected"
    assert pr.to_dict()["pieces"] >= 1
