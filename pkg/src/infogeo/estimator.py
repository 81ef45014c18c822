"""scikit-learn style estimator wrapping the functional API."""

from __future__ import annotations

import math

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_array, check_is_fitted

from .geometry import Design, MetricField, fisher_metric, geodesic_fan, tensors_at
from .likelihood import Dataset, chi2_quantile, log_likelihood, mle, trace_confidence_contour
from .models import ModelSpec, solve_forward

__all__ = ["InformationGeometryEstimator"]


def _to_dataset(X, y, species):
    """Build a Dataset from ``(times, values)`` or a ``(n, 1 + M)`` array."""
    if isinstance(X, Dataset):
        if y is not None:
            raise ValueError("y must be None when X is a Dataset")
        return X
    if y is None:
        arr = check_array(X, ensure_min_features=2)
        t, values = arr[:, 0], arr[:, 1:]
    else:
        t = check_array(np.asarray(X, dtype=float).reshape(-1, 1)).ravel()
        values = check_array(np.asarray(y, dtype=float).reshape(t.size, -1))
    if values.shape[1] != len(species):
        raise ValueError(f"expected {len(species)} value columns for species {species}, got {values.shape[1]}")
    times = np.unique(t)
    blocks = tuple(values[t == tj] for tj in times)
    return Dataset(times, blocks, species)


class InformationGeometryEstimator(BaseEstimator):
    """Maximum-likelihood fit of a two-parameter model plus its Fisher geometry.

    Parameters
    ----------
    family : str
        Model family, e.g. ``"logistic"`` or ``"sir"``.
    inferred : tuple of str
        The two parameters to estimate.
    fixed : dict, optional
        Values of the remaining family parameters.
    species : tuple of str, optional
        Observed outputs; defaults to the family default.
    initial_conditions : dict, optional
        ODE initial state (sir).
    alpha : float
        Confidence level of regions and geodesic lengths.
    start : dict, optional
        Optimizer start; defaults to the centre of ``bounds``.
    bounds : dict, optional
        Search box ``name -> (lo, hi)``.
    multistart : bool
        Add Latin-hypercube starts (needs finite ``bounds``).
    random_state : int
        Seed of the multistart design.

    Attributes
    ----------
    spec_ : ModelSpec
    data_ : Dataset
    mle_ : MleResult
    theta_ : ndarray of shape (2,)
    loglik_ : float
    """

    def __init__(
        self,
        family="univariate-normal",
        inferred=("mu", "sigma"),
        fixed=None,
        species=None,
        initial_conditions=None,
        alpha=0.95,
        start=None,
        bounds=None,
        multistart=False,
        random_state=0,
    ):
        self.family = family
        self.inferred = inferred
        self.fixed = fixed
        self.species = species
        self.initial_conditions = initial_conditions
        self.alpha = alpha
        self.start = start
        self.bounds = bounds
        self.multistart = multistart
        self.random_state = random_state

    def _spec(self):
        return ModelSpec(
            self.family, dict(self.fixed or {}), tuple(self.inferred), self.species,
            self.initial_conditions,
        )

    def fit(self, X, y=None):
        """Fit by maximum likelihood.

        ``X`` is a :class:`Dataset`, an array whose first column is time and
        remaining columns the observed species, or a time vector with the
        observations passed as ``y``.
        """
        spec = self._spec()
        data = _to_dataset(X, y, spec.species)
        result = mle(
            spec, data, start=self.start, bounds=self.bounds, multistart=self.multistart,
            random_state=self.random_state,
        )
        self.spec_ = spec
        self.data_ = data
        self.mle_ = result
        self.theta_ = np.array(result.theta_hat.values)
        self.loglik_ = result.loglik_at_mle
        self.n_features_in_ = 1
        return self

    def predict(self, X):
        """Model means at times ``X``; shape ``(n,)`` for one species, else ``(n, M)``."""
        check_is_fitted(self, "theta_")
        t = check_array(np.asarray(X, dtype=float).reshape(-1, 1)).ravel()
        times, inverse = np.unique(t, return_inverse=True)
        means = solve_forward(self.spec_, self.theta_, times).means[inverse]
        return means[:, 0] if means.shape[1] == 1 else means

    def score(self, X, y=None):
        """Mean log-likelihood per scalar observation at the fitted parameters."""
        check_is_fitted(self, "theta_")
        data = _to_dataset(X, y, self.spec_.species)
        return log_likelihood(self.spec_, self.theta_, data) / data.n_observations

    def metric(self, **kwargs) -> MetricField:
        """Fisher metric field for the fitted data design."""
        check_is_fitted(self, "theta_")
        return MetricField.from_model(self.spec_, Design.from_dataset(self.data_), **kwargs)

    def fisher_information(self, theta=None):
        """Fisher metric at ``theta`` (default: the MLE)."""
        check_is_fitted(self, "theta_")
        theta = self.theta_ if theta is None else theta
        return fisher_metric(self.spec_, Design.from_dataset(self.data_), theta)

    def confidence_region(self, alpha=None, box=None):
        """Likelihood confidence contour about the MLE."""
        check_is_fitted(self, "theta_")
        alpha = self.alpha if alpha is None else alpha
        return trace_confidence_contour(self.spec_, self.data_, self.mle_, alpha, box)

    def geodesics(self, n=20, alpha=None):
        """``n`` geodesics from the MLE with the chi-squared confidence length."""
        check_is_fitted(self, "theta_")
        alpha = self.alpha if alpha is None else alpha
        length = math.sqrt(chi2_quantile(self.spec_.nu, alpha))
        return geodesic_fan(self.metric(), self.theta_, length, n=n)

    def scalar_curvature(self, theta=None):
        """Scalar curvature at ``theta`` (default: the MLE)."""
        check_is_fitted(self, "theta_")
        theta = self.theta_ if theta is None else theta
        return tensors_at(self.metric(), theta).scalar
