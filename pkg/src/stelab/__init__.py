"""Closed-form theory and simulation of straight-through-estimator training for a
two-linear-layer network with binary activation and Gaussian inputs."""

from .gaussian import PqValue, gauss_capped_moments, gauss_indicator_moments, pq, xi
from .landscape import (
    CriticalPointReport,
    PointClass,
    classify_point,
    critical_points,
    reduced_hessian,
    stationarity_residual,
)
from .model import (
    DomainError,
    GradientPair,
    ModelParams,
    TeacherParams,
    angle,
    population_grad,
    population_loss,
    sherman_morrison_inverse_apply,
)
from .montecarlo import (
    McEstimate,
    SampleBatch,
    estimate_expectation,
    sample_coarse_grad,
    sample_grad_v,
    sample_loss,
)
from .optimizer import DescentConfig, RunOutcome, check_global_region, run, run_auto, step
from .ste import SteKind, correlation, correlation_closed_form, descent_ratio, expected_coarse_grad, h_value

__version__ = "0.1.0"
