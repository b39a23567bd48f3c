import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import stats
from scipy.spatial import ConvexHull

from robustrisk.distortion import make_distortion, weight_of
from robustrisk.envelope import concave_envelope, convex_envelope, g_lambda_envelope
from robustrisk.reference import EmpiricalQuantile, NormalQuantile, ParameterError

NON_CONCAVE = ["var(0.95)", "var+(0.9)", "iqd(0.05)", "iqd(0.2)", "es-var(0.9,0.95)",
               "gluevar(0.975,0.95,1/3,2/3)", "gluevar+(0.99,0.9,0.2,0.5)", "rvar(0.1,0.5)"]


def _turn(o, a, b):
    return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])


def hull_envelope(g, mu, s, lam, n=40001):
    """Upper concave hull of g_lam on a grid, scipy ConvexHull."""
    ends = np.geomspace(1e-13, 1e-2, 3000)
    t = np.unique(np.concatenate([np.linspace(0, 1, n), ends, 1 - ends, g.t]))
    # int_{1-t}^1 F^{-1} for F = N(mu, s^2)
    z = stats.norm.ppf(np.clip(1 - t, 1e-300, 1))
    L = mu * t + s * stats.norm.pdf(z)
    # include both one-sided limits at jumps
    pts = [np.c_[t, g(t) + lam * L]]
    for side in (g.left, g.right):
        pts.append(np.c_[g.t, side + lam * np.interp(g.t, t, L)])
    P = np.vstack(pts)
    h = ConvexHull(P)
    V = P[np.unique(h.simplices)]
    V = V[np.argsort(V[:, 0])]
    # upper chain only
    up = [V[0]]
    for p in V[1:]:
        while len(up) >= 2 and _turn(up[-2], up[-1], p) >= 0:
            up.pop()
        up.append(p)
    up = np.array(up)
    return lambda x: np.interp(x, up[:, 0], up[:, 1])


def env_values(env, t):
    return np.array([env.segments.integral(1 - x, 1.0) for x in t])


@pytest.mark.parametrize("name", NON_CONCAVE)
@pytest.mark.parametrize("lam", [0.0, 0.05, 0.7, 3.0])
def test_envelope_matches_hull(name, lam):
    g = make_distortion(name)
    F = NormalQuantile(0.4, 1.3)
    env = g_lambda_envelope(g, F, lam)
    t = np.linspace(0, 1, 301)
    ref = hull_envelope(g, 0.4, 1.3, lam)(t)
    assert np.max(np.abs(env_values(env, t) - ref)) < 2e-6


@pytest.mark.parametrize("name", ["var+(0.95)", "iqd(0.05)", "es-var(0.9,0.95)",
                                  "gluevar(0.975,0.95,1/3,2/3)"])
@pytest.mark.parametrize("lam", [0.0, 0.1, 1.0, 10.0])
def test_named_and_generic_agree(name, lam):
    g = make_distortion(name)
    F = NormalQuantile(-0.2, 0.8)
    a = g_lambda_envelope(g, F, lam, method="named")
    b = g_lambda_envelope(g, F, lam, method="generic")
    d = a.segments.add_base(0.0)
    diff = np.sqrt(max(d.square() - 2 * d.inner(b.segments) + b.segments.square(), 0.0))
    assert diff < 1e-6
    assert a.corr() == pytest.approx(b.corr(), abs=1e-8)


def test_concave_path_is_the_weight():
    g = make_distortion("es(0.9)")
    F = NormalQuantile()
    env = g_lambda_envelope(g, F, 0.0)
    assert env.method == "concave"
    u = np.linspace(0.01, 0.99, 99)
    assert np.allclose(env(u), weight_of(g)(u))
    env = g_lambda_envelope(g, F, 2.0)
    assert np.allclose(env(u), weight_of(g)(u) + 2.0 * F(u))
    with pytest.raises(ParameterError):
        g_lambda_envelope(make_distortion("var(0.9)"), F, 0.0, method="concave")
    with pytest.raises(ParameterError):
        g_lambda_envelope(g, F, -1.0)


def test_envelope_of_var_is_es():
    ge = concave_envelope(make_distortion("var(0.9)"))
    t = np.linspace(0, 1, 101)
    assert np.allclose(ge(t), np.minimum(t / 0.1, 1.0))
    gc = convex_envelope(make_distortion("var(0.9)"))
    assert np.allclose(gc(t), np.maximum((t - 0.1) / 0.9, 0.0), atol=1e-12)


def test_empirical_reference_generic_path():
    rng = np.random.default_rng(5)
    F = EmpiricalQuantile(rng.normal(size=300))
    for name in ("var+(0.95)", "iqd(0.1)", "gluevar(0.975,0.95,1/3,2/3)"):
        env = g_lambda_envelope(make_distortion(name), F, 0.3)
        assert env.method == "generic"
        assert env.segments.is_nondecreasing(1e-9)


def test_csv_export(tmp_path):
    env = g_lambda_envelope(make_distortion("iqd(0.1)"), NormalQuantile(), 0.5)
    p = tmp_path / "env.csv"
    env.to_csv(p, n=11)
    lines = p.read_text().splitlines()
    assert lines[0] == "t,value,segment_kind" and len(lines) == 10


@given(st.sampled_from(NON_CONCAVE), st.floats(0, 20), st.floats(-3, 3), st.floats(0.2, 4))
def test_envelope_invariants(name, lam, mu, s):
    g = make_distortion(name)
    F = NormalQuantile(mu, s)
    env = g_lambda_envelope(g, F, lam)
    # k is non-decreasing and the envelope dominates g_lam with equal total;
    # tangency points within 1e-11 of a tail are only resolved to ~1e-6 in k
    assert env.segments.is_nondecreasing(1e-6)
    assert env.segments.integral() == pytest.approx(g.total + lam * mu, abs=1e-9)
    t = np.linspace(0.001, 0.999, 97)
    L = np.array([F.partial_integral(1 - x, 1) for x in t])
    assert np.all(env_values(env, t) >= g(t) + lam * L - 1e-9)
    assert -1 - 1e-12 <= env.corr() <= 1 + 1e-12
