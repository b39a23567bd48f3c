"""scikit-learn style wrappers around the bound and portfolio solvers."""
from __future__ import annotations

import math

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_array, check_is_fitted

from .distortion import make_distortion, parse_metric
from .portfolio import EllipticalReference, PortfolioProblem, SampleReference, optimize
from .reference import EmpiricalQuantile, NormalQuantile, ParameterError
from .unimodal import worst_case_unimodal, worst_case_unimodal_wasserstein
from .worstcase import MomentWassersteinSet, best_case, worst_case


class WorstCaseRisk(BaseEstimator):
    """Worst-case distortion risk around a loss sample.

    fit(X) takes a 1-d loss sample. The reference law is the empirical
    quantile of X (reference="empirical") or a normal with the sample
    moments (reference="normal"). mu and sigma default to the sample
    moments; pass them to pin the moment constraints.
    """

    def __init__(self, metric="es(0.95)", epsilon=math.inf, mu=None, sigma=None,
                 reference="empirical", xi=None):
        self.metric = metric
        self.epsilon = epsilon
        self.mu = mu
        self.sigma = sigma
        self.reference = reference
        self.xi = xi

    def _reference(self, x):
        if self.reference == "empirical":
            return EmpiricalQuantile(x)
        if self.reference == "normal":
            return NormalQuantile(x.mean(), x.std())
        raise ParameterError("reference must be 'empirical' or 'normal'")

    def fit(self, X, y=None):
        x = check_array(X, ensure_2d=False).ravel()
        if x.size < 2:
            raise ParameterError("need at least two observations")
        g = make_distortion(parse_metric(self.metric))
        ref = self._reference(x)
        mu = float(x.mean()) if self.mu is None else float(self.mu)
        sigma = float(x.std()) if self.sigma is None else float(self.sigma)
        S = MomentWassersteinSet(mu, sigma, self.epsilon, ref)
        if self.xi is None:
            res = worst_case(g, S)
            self.best_case_ = best_case(g, S).value
        elif math.isinf(self.epsilon):
            res = worst_case_unimodal(g, mu, sigma, self.xi)
        else:
            res = worst_case_unimodal_wasserstein(g, S, self.xi)
        self.result_ = res
        self.value_ = res.value
        self.lambda_ = res.lam
        self.regime_ = res.regime
        self.extremal_quantile_ = res.extremal_quantile
        self.mu_, self.sigma_ = mu, sigma
        return self

    def score(self, X=None, y=None):
        """Minus the worst-case risk, so larger is better."""
        check_is_fitted(self, "value_")
        return -self.value_


class RobustPortfolio(BaseEstimator):
    """Long-only weights minimising the worst-case risk of the portfolio loss.

    mean and cov describe the asset losses. fit(X) optionally takes joint
    loss samples (rows) to use as an empirical reference; without X the
    reference is elliptical (normal or t with df).
    """

    def __init__(self, metric="es(0.95)", epsilon=0.01, mean=None, cov=None,
                 generator="normal", df=None, bound=None, xi=None, n_starts=8,
                 random_state=0):
        self.metric = metric
        self.epsilon = epsilon
        self.mean = mean
        self.cov = cov
        self.generator = generator
        self.df = df
        self.bound = bound
        self.xi = xi
        self.n_starts = n_starts
        self.random_state = random_state

    def fit(self, X=None, y=None):
        if self.mean is None or self.cov is None:
            raise ParameterError("mean and cov are required")
        if X is not None:
            ref = SampleReference(check_array(X))
        else:
            ref = EllipticalReference(self.generator, self.df)
        prob = PortfolioProblem(self.mean, self.cov, self.epsilon, self.metric, ref,
                                self.bound, self.xi)
        res = optimize(prob, seed=self.random_state, n_starts=self.n_starts)
        self.weights_ = np.asarray(res.weights)
        self.objective_ = res.objective
        self.lambda_ = res.lambda_w
        self.n_features_in_ = prob.n
        return self

    def predict(self, X):
        """Portfolio loss w'x for each row."""
        check_is_fitted(self, "weights_")
        return check_array(X) @ self.weights_

    def score(self, X=None, y=None):
        check_is_fitted(self, "objective_")
        return -self.objective_
