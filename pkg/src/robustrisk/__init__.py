"""Worst-case distortion risk metrics over moment and Wasserstein sets."""
from .distortion import (DistortionFunction, MetricSpec, make_distortion, negate, parse_metric,
                         rho, usc_version, weight_of)
from .envelope import RegimeError, concave_envelope, g_lambda_envelope
from .estimators import RobustPortfolio, WorstCaseRisk
from .portfolio import (EllipticalReference, PortfolioProblem, PortfolioResult, SampleReference,
                        optimize)
from .reference import (EmpiricalQuantile, NormalQuantile, ParameterError, StudentTQuantile,
                        UniformQuantile, parse_reference, wasserstein2)
from .unimodal import (ConeProjection, DegenerateProjection, UnimodalCone, project, project_step,
                       worst_case_interval_inflection, worst_case_unimodal,
                       worst_case_unimodal_wasserstein)
from .worstcase import (BoundResult, InfeasibleError, MomentWassersteinSet, NumericError,
                        best_case, worst_case)

__version__ = "0.1.0"
