"""Likelihood inference and Fisher-metric geometry for two-parameter models."""

__version__ = "0.1.0"

from .config import ExperimentConfig, bundled_configs, load_config
from .estimator import InformationGeometryEstimator
from .exceptions import (
    ConfigError,
    DomainError,
    InfogeoError,
    IntegrationError,
    OptimizationError,
    SingularMetricError,
)
from .geometry import (
    Design,
    GeodesicCurve,
    MetricField,
    TensorAtPoint,
    christoffel,
    christoffel_first_kind,
    curve_length,
    fisher_metric,
    fisher_metrics,
    geodesic_fan,
    geodesic_shoot,
    observation_fim,
    ricci_tensor,
    riemann_tensor,
    scalar_curvature,
    tensors_at,
)
from .gridscan import Axis, ScalarGrid, curvature_grid, loglik_grid
from .likelihood import (
    ContourPolyline,
    Dataset,
    MleResult,
    chi2_quantile,
    confidence_threshold,
    kl_divergence_normal,
    kl_divergence_normal_mc,
    log_likelihood,
    mle,
    normalized_log_likelihood,
    trace_confidence_contour,
)
from .models import (
    ModelOutput,
    ModelSpec,
    ParameterPoint,
    mean,
    model_jacobian,
    model_jacobians,
    sir_rhs,
    solve_forward,
)
from .odeint import IvpProblem, Trajectory, integrate_heun, integrate_rk54
from .synth import SynthConfig, generate
