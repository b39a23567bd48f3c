import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from robustrisk.portfolio import (EllipticalReference, PortfolioProblem, SampleReference,
                                  closed_objective, objective, optimize, reduce, solve_lambda_w)
from robustrisk.reference import NormalQuantile, ParameterError
from robustrisk.worstcase import worst_case

MU = (-2.0, -1.0)
COV = ((4.0, 0.5), (0.5, 1.0))
CLOSED = ["gd", "mmd", "es(0.95)", "iqd(0.05)", "var(0.975)", "var+(0.9)",
          "gluevar(0.975,0.95,1/3,2/3)"]


def test_reduce_moments():
    p = PortfolioProblem(MU, COV, 0.01, "es(0.9)")
    S = reduce(p, [0.25, 0.75])
    assert S.mu == pytest.approx(-1.25)
    assert S.sigma == pytest.approx(math.sqrt(0.0625 * 4 + 2 * 0.25 * 0.75 * 0.5 + 0.5625))
    assert S.epsilon == pytest.approx(0.01 * (0.0625 + 0.5625))
    assert isinstance(S.reference, NormalQuantile)
    assert S.reference.std == pytest.approx(S.sigma)


@pytest.mark.parametrize("metric", CLOSED)
@pytest.mark.parametrize("eps", [1.0, 0.01, 1e-6])
def test_closed_matches_generic(metric, eps):
    p = PortfolioProblem(MU, COV, eps, metric)
    for w1 in (0.1, 0.3, 0.8):
        w = np.array([w1, 1 - w1])
        a, _ = objective(p, w, "closed")
        b, _ = objective(p, w, "generic")
        assert a == pytest.approx(b, abs=1e-7 * (1 + abs(b)))


def test_closed_matches_generic_student_t():
    p = PortfolioProblem(MU, COV, 0.05, "iqd(0.05)", EllipticalReference("t", 6))
    w = np.array([0.4, 0.6])
    a, _ = closed_objective(p, w)
    b, _ = objective(p, w, "generic")
    assert a == pytest.approx(b, abs=1e-7)


def test_lambda_matches_univariate_solver():
    p = PortfolioProblem(MU, COV, 0.01, "es(0.95)")
    w = np.array([0.3, 0.7])
    r = worst_case(p.distortion, reduce(p, w))
    assert solve_lambda_w(p, w) == pytest.approx(r.lam, rel=1e-6)


def test_two_asset_optimum_against_grid():
    p = PortfolioProblem(MU, COV, 0.01, "es(0.95)")
    res = optimize(p)
    grid = np.linspace(0, 1, 2001)
    vals = [objective(p, np.array([a, 1 - a]))[0] for a in grid]
    assert res.objective <= min(vals) + 1e-9
    assert abs(res.weights[0] - grid[int(np.argmin(vals))]) < 2e-3
    assert p.admissible(res.weights)


def test_three_assets_multistart():
    mu = (-1.0, -1.5, -0.5)
    cov = np.diag([1.0, 2.0, 0.5])
    p = PortfolioProblem(mu, cov, 0.05, "gd")
    res = optimize(p, n_starts=6)
    assert p.admissible(res.weights, 1e-9)
    rng = np.random.default_rng(0)
    for w in rng.dirichlet(np.ones(3), 30):
        assert res.objective <= objective(p, w)[0] + 1e-6


def test_bound_constraint():
    p = PortfolioProblem(MU, COV, 0.01, "es(0.95)", bound=-1.8)
    res = optimize(p)
    assert float(res.weights @ np.array(MU)) <= -1.8 + 1e-9
    with pytest.raises(ParameterError):
        PortfolioProblem(MU, COV, 0.01, "es(0.95)", bound=-5.0)


def test_problem_validation():
    with pytest.raises(ParameterError):
        PortfolioProblem(MU, ((1, 2), (3, 1)), 0.1, "gd")
    with pytest.raises(ParameterError):
        PortfolioProblem(MU, ((1, 2), (2, 1)), 0.1, "gd")
    with pytest.raises(ParameterError):
        PortfolioProblem(MU, COV, 0.0, "gd")
    with pytest.raises(ParameterError):
        EllipticalReference("t")


def test_sample_reference():
    rng = np.random.default_rng(3)
    X = rng.multivariate_normal(MU, COV, size=300)
    p = PortfolioProblem(X.mean(0), np.cov(X.T, bias=True), 0.05, "es(0.9)",
                         SampleReference(X))
    res = optimize(p, n_starts=3)
    assert p.admissible(res.weights)
    assert math.isfinite(res.objective)


def test_unimodal_portfolio_moment_only():
    p = PortfolioProblem(MU, COV, math.inf, "gd", xi=0.5)
    res = optimize(p)
    # GD weight is already unimodal, so this is mean*0 + sd/sqrt(3): minimum variance
    w1 = (1.0 - 0.5) / (4.0 + 1.0 - 2 * 0.5)
    assert res.weights[0] == pytest.approx(w1, abs=1e-6)
    d = res.to_dict()
    assert set(d) >= {"weights", "objective", "lambda_w"}


@given(st.floats(0.01, 0.99), st.floats(1e-4, 2.0), st.sampled_from(CLOSED))
def test_objective_monotone_in_epsilon(w1, eps, metric):
    w = np.array([w1, 1 - w1])
    a = objective(PortfolioProblem(MU, COV, eps, metric), w)[0]
    b = objective(PortfolioProblem(MU, COV, 2 * eps, metric), w)[0]
    assert a <= b + 1e-9 * (1 + abs(b))
