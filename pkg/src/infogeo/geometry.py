"""Fisher-metric geometry of two-parameter statistical models.

The Fisher metric of a normal observation model with constant ``sigma`` is
``G = J^T O J``, where ``J`` is the model Jacobian and ``O`` the Fisher
information of the observation process: ``N_j / sigma^2`` for every mean
output and, when ``sigma`` is inferred, ``2 sum N / sigma^2`` for ``sigma``.

Curvature conventions (``d_k`` is the partial with respect to ``theta_k``)::

    Gamma_kij   = (d_i g_kj + d_j g_ki - d_k g_ij) / 2          first kind
    Gamma^m_ij  = g^mk Gamma_kij                                 second kind
    R_ijkl      = d_k Gamma_ijl - d_l Gamma_ijk
                  + Gamma_ril Gamma^r_jk - Gamma_rik Gamma^r_jl
    Ric_jl      = g^ik R_ijkl
    Sc          = g^jl Ric_jl

With these signs ``R_1212 = K det G`` for Gaussian curvature ``K`` and
``Sc = 2 K`` on a surface, so the univariate normal has ``Sc = -1/N``.
All metric derivatives are central differences.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy.integrate import simpson

from ._validation import check_counts, check_times
from .exceptions import DomainError, IntegrationError, SingularMetricError
from .models import ModelSpec, model_jacobians
from .odeint import IvpProblem, integrate_rk54

__all__ = [
    "Design",
    "MetricField",
    "TensorAtPoint",
    "GeodesicCurve",
    "observation_fim",
    "fisher_metric",
    "fisher_metrics",
    "christoffel",
    "christoffel_first_kind",
    "riemann_tensor",
    "ricci_tensor",
    "scalar_curvature",
    "tensors_at",
    "geodesic_shoot",
    "geodesic_fan",
    "curve_length",
]

COND_LIMIT = 1e12


@dataclass(frozen=True, eq=False)
class Design:
    """Observation design: times, replicate counts per time and observed species."""

    times: np.ndarray
    counts: np.ndarray
    species: tuple

    def __post_init__(self):
        times = check_times(self.times)
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "counts", check_counts(self.counts, times.size))
        object.__setattr__(self, "species", tuple(self.species))

    @classmethod
    def from_dataset(cls, data):
        return cls(data.times, data.counts, data.species)

    def scaled(self, factor):
        """The same design with every count multiplied by an integer ``factor``."""
        return Design(self.times, self.counts * int(factor), self.species)


def observation_fim(sigma, counts, species_count, sigma_inferred) -> np.ndarray:
    """Diagonal Fisher information of the normal observation process.

    Parameters
    ----------
    sigma : float
        Observation standard deviation.
    counts : array_like of int
        Replicates ``N_j`` per time point.
    species_count : int
        Observed outputs per time point ``M``.
    sigma_inferred : bool
        Append the ``sigma`` entry ``2 sum N / sigma^2``.

    Returns
    -------
    ndarray, shape (L*M [+1], L*M [+1])
    """
    if not sigma > 0:
        raise DomainError(f"sigma must be positive, got {sigma}")
    counts = np.atleast_1d(np.asarray(counts))
    if np.any(counts < 1):
        raise ValueError("counts must be at least 1")
    w = np.repeat(counts.astype(float), int(species_count)) / sigma**2
    if sigma_inferred:
        w = np.append(w, 2.0 * w.sum())
    return np.diag(w)


def fisher_metric(spec: ModelSpec, design: Design, theta, *, strict=False) -> np.ndarray:
    """Fisher metric ``J^T O J`` at ``theta``.

    With ``strict=True`` a metric whose condition number exceeds ``1e12``
    (or that is not positive definite) raises :class:`SingularMetricError`;
    otherwise it is returned as computed.
    """
    G = fisher_metrics(spec, design, [theta])[0]
    if strict:
        _check_metric(G)
    return G


def fisher_metrics(spec: ModelSpec, design: Design, thetas) -> np.ndarray:
    """:func:`fisher_metric` at several points, shape ``(len(thetas), nu, nu)``."""
    if tuple(design.species) != tuple(spec.species):
        raise ValueError(f"design species {design.species} do not match {spec.species}")
    thetas = list(thetas)
    J = model_jacobians(spec, thetas, design.times)
    out = np.empty((len(thetas), spec.nu, spec.nu))
    for b, theta in enumerate(thetas):
        w = np.diag(
            observation_fim(spec.sigma(theta), design.counts, len(spec.species), spec.sigma_inferred)
        )
        G = J[b].T @ (w[:, None] * J[b])
        out[b] = 0.5 * (G + G.T)
    return out


def _check_metric(G):
    if not np.all(np.isfinite(G)):
        raise SingularMetricError("metric has non-finite entries")
    eig = np.linalg.eigvalsh(G)
    if not eig[0] > 0:
        raise SingularMetricError(f"metric is not positive definite (eigenvalues {eig})")
    cond = eig[-1] / eig[0]
    if cond > COND_LIMIT:
        raise SingularMetricError(f"metric is singular (condition number {cond:.3g})")


class MetricField:
    """A Riemannian metric ``theta -> G(theta)`` with a differentiation policy.

    Parameters
    ----------
    evaluate : callable
        Maps a coordinate vector to a symmetric ``(nu, nu)`` matrix.
    nu : int
        Dimension.
    fd_step : float
        Relative central-difference step for metric derivatives.
    fd_floor : float
        Absolute lower bound on the step.
    bounds : array_like, shape (nu, 2), optional
        Coordinate domain; points outside raise :class:`DomainError`.
    names : tuple of str, optional
        Coordinate names.
    evaluate_many : callable, optional
        Vectorised form of ``evaluate`` taking an ``(n, nu)`` array. Used
        for finite-difference stencils when given.

    Every evaluation is checked: a non-finite, indefinite or ill-conditioned
    (``cond > 1e12``) metric raises :class:`SingularMetricError`.
    """

    def __init__(self, evaluate, nu, fd_step=1e-4, fd_floor=1e-7, bounds=None, names=None,
                 evaluate_many=None):
        self._evaluate = evaluate
        self._evaluate_many = evaluate_many
        self.nu = int(nu)
        self.fd_step = float(fd_step)
        self.fd_floor = float(fd_floor)
        self.bounds = None if bounds is None else np.asarray(bounds, dtype=float)
        self.names = tuple(names) if names is not None else tuple(f"theta{i + 1}" for i in range(self.nu))

    @classmethod
    def from_model(cls, spec: ModelSpec, design: Design, **kwargs):
        def evaluate(theta):
            return fisher_metrics(spec, design, [theta])[0]

        def evaluate_many(thetas):
            return fisher_metrics(spec, design, thetas)

        kwargs.setdefault("bounds", spec.bounds())
        kwargs.setdefault("names", spec.inferred)
        return cls(evaluate, spec.nu, evaluate_many=evaluate_many, **kwargs)

    @classmethod
    def constant(cls, matrix, **kwargs):
        matrix = np.array(matrix, dtype=float)
        return cls(lambda theta: matrix, matrix.shape[0], **kwargs)

    def scaled(self, c):
        """The metric ``c * G`` (``c > 0``) with the same step policy."""
        c = float(c)
        if not c > 0:
            raise ValueError("scale must be positive")
        many = None
        if self._evaluate_many is not None:
            def many(thetas):
                return c * self._evaluate_many(thetas)
        return MetricField(
            lambda theta: c * self._evaluate(theta), self.nu, self.fd_step, self.fd_floor,
            self.bounds, self.names, many,
        )

    def _coords(self, theta):
        values = getattr(theta, "values", theta)
        x = np.array(values, dtype=float).reshape(-1)
        if x.size != self.nu:
            raise ValueError(f"expected {self.nu} coordinates, got {x.size}")
        return x

    def _check_inside(self, x):
        if self.bounds is not None and not np.all(
            (x >= self.bounds[:, 0]) & (x <= self.bounds[:, 1])
        ):
            raise DomainError(f"point {x.tolist()} is outside the parameter bounds")

    def __call__(self, theta) -> np.ndarray:
        x = self._coords(theta)
        self._check_inside(x)
        G = np.asarray(self._evaluate(x), dtype=float)
        _check_metric(G)
        return G

    def many(self, points) -> np.ndarray:
        """Checked metrics at each row of ``points``, shape ``(n, nu, nu)``."""
        points = np.asarray(points, dtype=float).reshape(-1, self.nu)
        for x in points:
            self._check_inside(x)
        if self._evaluate_many is not None:
            Gs = np.asarray(self._evaluate_many(points), dtype=float)
        else:
            Gs = np.array([self._evaluate(x) for x in points], dtype=float)
        for G in Gs:
            _check_metric(G)
        return Gs

    def steps(self, theta):
        x = self._coords(theta)
        return np.maximum(self.fd_step * np.abs(x), self.fd_floor)

    def stencil(self, theta):
        """Central-difference probe points ``x +- h_l e_l`` (rows ``2l``, ``2l+1``) and steps."""
        x = self._coords(theta)
        h = self.steps(x)
        pts = np.repeat(x[None, :], 2 * self.nu, axis=0)
        for l in range(self.nu):
            pts[2 * l, l] += h[l]
            pts[2 * l + 1, l] -= h[l]
        return pts, h

    def derivatives(self, theta) -> np.ndarray:
        """``dG[l, i, j] = d g_ij / d theta_l`` by central differences."""
        pts, h = self.stencil(theta)
        return _dG_from(self.many(pts), h)


def _dG_from(Gs, h):
    return (Gs[0::2] - Gs[1::2]) / (2 * h)[:, None, None]


def _first_kind_from(dG):
    # F[k, i, j] = (d_i g_kj + d_j g_ki - d_k g_ij) / 2
    return 0.5 * (dG.transpose(1, 0, 2) + dG.transpose(1, 2, 0) - dG)


def _first_kind(metric, x):
    return _first_kind_from(metric.derivatives(x))


def _metric_and_first_kind(metric, x):
    """``G(x)`` and the first-kind symbols from one batched stencil evaluation."""
    pts, h = metric.stencil(x)
    Gs = metric.many(np.vstack([x[None, :], pts]))
    return Gs[0], _first_kind_from(_dG_from(Gs[1:], h))


def christoffel_first_kind(metric: MetricField, theta) -> np.ndarray:
    """Christoffel symbols of the first kind ``F[k, i, j] = Gamma_kij``."""
    return _first_kind(metric, metric._coords(theta))


def _second_kind(G, F):
    nu = G.shape[0]
    return np.linalg.solve(G, F.reshape(nu, -1)).reshape(F.shape)


def christoffel(metric: MetricField, theta) -> np.ndarray:
    """Christoffel symbols of the second kind ``Gam[m, i, j] = Gamma^m_ij``."""
    G, F = _metric_and_first_kind(metric, metric._coords(theta))
    return _second_kind(G, F)


@dataclass(frozen=True, eq=False)
class TensorAtPoint:
    """Connection and curvature at one point."""

    theta: np.ndarray
    metric: np.ndarray
    christoffel1: np.ndarray
    christoffel2: np.ndarray
    riemann1: np.ndarray
    ricci: np.ndarray
    scalar: float


def tensors_at(metric: MetricField, theta) -> TensorAtPoint:
    """Christoffel symbols, Riemann and Ricci tensors and scalar curvature."""
    x = metric._coords(theta)
    nu = metric.nu
    # One batch: x, its stencil, and the stencil of every stencil point.
    pts, h = metric.stencil(x)
    outer = [metric.stencil(p) for p in pts]
    Gs = metric.many(np.vstack([x[None, :], pts] + [o[0] for o in outer]))
    G = Gs[0]
    F = _first_kind_from(_dG_from(Gs[1 : 1 + 2 * nu], h))
    Gam = _second_kind(G, F)
    n = 2 * nu
    F_probe = [
        _first_kind_from(_dG_from(Gs[1 + n + k * n : 1 + n + (k + 1) * n], outer[k][1]))
        for k in range(n)
    ]
    dF = np.array([(F_probe[2 * a] - F_probe[2 * a + 1]) / (2 * h[a]) for a in range(nu)])
    # R_ijkl = d_k F_ijl - d_l F_ijk + F_ril Gam^r_jk - F_rik Gam^r_jl
    R = (
        dF.transpose(1, 2, 0, 3)
        - dF.transpose(1, 2, 3, 0)
        + np.einsum("ril,rjk->ijkl", F, Gam)
        - np.einsum("rik,rjl->ijkl", F, Gam)
    )
    Ginv = np.linalg.inv(G)
    Ric = np.einsum("ik,ijkl->jl", Ginv, R)
    Ric = 0.5 * (Ric + Ric.T)
    Sc = float(np.einsum("jl,jl->", Ginv, Ric))
    return TensorAtPoint(x, G, F, Gam, R, Ric, Sc)


def riemann_tensor(metric: MetricField, theta) -> np.ndarray:
    """Riemann tensor of the first kind ``R[i, j, k, l] = R_ijkl``."""
    return tensors_at(metric, theta).riemann1


def ricci_tensor(metric: MetricField, theta) -> np.ndarray:
    """Ricci tensor ``Ric_jl = g^ik R_ijkl`` (symmetrised)."""
    return tensors_at(metric, theta).ricci


def scalar_curvature(metric: MetricField, theta) -> float:
    """Scalar curvature ``Sc = g^jl Ric_jl``."""
    return tensors_at(metric, theta).scalar


# --------------------------------------------------------------------------
# geodesics


@dataclass(frozen=True, eq=False)
class GeodesicCurve:
    """A unit-speed geodesic sampled at the integrator's accepted steps.

    Attributes
    ----------
    params : ndarray, shape (n, nu)
        Points ``theta(t)``.
    velocities : ndarray, shape (n, nu)
        ``d theta / dt``.
    ts : ndarray, shape (n,)
        Curve parameter, equal to arc length.
    lengths : ndarray, shape (n,)
        Arc length accumulated by the integrator.
    target_length : float
    angle : float
        Euclidean direction of the initial velocity.
    truncated : bool
        Integration stopped before ``target_length``.
    reason : str or None
        Why the curve was truncated.
    """

    params: np.ndarray
    velocities: np.ndarray
    ts: np.ndarray
    lengths: np.ndarray
    target_length: float
    angle: float
    truncated: bool = False
    reason: Optional[str] = None

    @property
    def endpoint(self):
        return self.params[-1]


def _metric_and_first_kind_4(metric, x):
    """As :func:`_metric_and_first_kind` with fourth-order central differences.

    Same step ``h``; probes at ``+-h`` and ``+-2h``. The geodesic flow only
    conserves ``v' G v`` as well as its connection is accurate, and the
    second-order truncation error is visible on strongly anisotropic metrics.
    """
    pts, h = metric.stencil(x)
    wide = 2.0 * pts - x[None, :]
    Gs = metric.many(np.vstack([x[None, :], pts, wide]))
    n = 2 * metric.nu
    near, far = _dG_from(Gs[1 : 1 + n], h), _dG_from(Gs[1 + n :], 2 * h)
    return Gs[0], _first_kind_from((4.0 * near - far) / 3.0)


def _geodesic_rhs(metric, nu):
    def rhs(t, y):
        x, v = y[:nu], y[nu : 2 * nu]
        G, F = _metric_and_first_kind_4(metric, x)
        Gam = _second_kind(G, F)
        acc = -np.einsum("mij,i,j->m", Gam, v, v)
        speed = math.sqrt(max(float(v @ G @ v), 0.0))
        return np.concatenate([v, acc, [speed]])

    return rhs


def geodesic_shoot(
    metric: MetricField,
    origin,
    direction: float,
    target_length: float,
    *,
    rtol=1e-8,
    atol=1e-10,
    max_step=None,
) -> GeodesicCurve:
    """Integrate a unit-speed geodesic from ``origin`` to arc length ``target_length``.

    The initial velocity points along the Euclidean angle ``direction`` and
    is scaled to unit metric speed. The state is augmented with the arc
    length ``s``, and an event at ``s = target_length`` ends the curve.

    A metric failure or bound exit along the way truncates the curve at
    the last accepted step and sets ``truncated``.
    """
    if not target_length >= 0:
        raise ValueError(f"target_length must be non-negative, got {target_length}")
    x0 = metric._coords(origin)
    nu = metric.nu
    G0 = metric(x0)
    if nu != 2:
        raise ValueError("directions are angles, so the metric must be two-dimensional")
    v0 = np.array([math.cos(direction), math.sin(direction)])
    v0 = v0 / math.sqrt(float(v0 @ G0 @ v0))
    if target_length == 0:
        zero = np.zeros(1)
        return GeodesicCurve(
            x0[None, :], v0[None, :], zero, zero, 0.0, float(direction)
        )
    L = float(target_length)
    y0 = np.concatenate([x0, v0, [0.0]])
    problem = IvpProblem(
        _geodesic_rhs(metric, nu), y0, (0.0, 2.0 * L + 1.0), event=lambda t, y: y[-1] - L
    )
    traj = integrate_rk54(
        problem, rtol=rtol, atol=atol, max_step=max_step or L / 40, stop_on_error=True
    )
    truncated = not traj.terminated_by_event
    reason = None
    if truncated:
        reason = traj.failure or "arc length not reached within the integration span"
    ys = traj.ys
    return GeodesicCurve(
        ys[:, :nu].copy(), ys[:, nu : 2 * nu].copy(), traj.ts.copy(), ys[:, -1].copy(),
        L, float(direction), truncated, reason,
    )


def geodesic_fan(metric, origin, target_length, n=20, **kwargs):
    """Geodesics in ``n`` equally spaced Euclidean directions from ``origin``."""
    angles = 2 * np.pi * np.arange(n) / n
    return [geodesic_shoot(metric, origin, a, target_length, **kwargs) for a in angles]


def curve_length(metric: MetricField, curve, ts=None) -> float:
    """Length of a sampled curve under ``metric`` by composite Simpson.

    ``curve`` is a :class:`GeodesicCurve` (its stored velocities are used) or
    an array of points of shape ``(n, nu)``; velocities of a point array are
    second-order finite differences in ``ts`` (default: sample index).
    """
    if isinstance(curve, GeodesicCurve):
        points, vel, ts = curve.params, curve.velocities, curve.ts
    else:
        points = np.asarray(curve, dtype=float)
        if points.ndim != 2 or points.shape[0] < 2:
            raise ValueError("a curve needs at least two samples")
        ts = np.arange(points.shape[0], dtype=float) if ts is None else np.asarray(ts, dtype=float)
        edge = 2 if points.shape[0] > 2 else 1
        vel = np.gradient(points, ts, axis=0, edge_order=edge)
    if points.shape[0] < 2:
        return 0.0
    speed = np.empty(points.shape[0])
    for k, (x, v) in enumerate(zip(points, vel)):
        q = float(v @ metric(x) @ v)
        if q < 0:
            raise SingularMetricError(f"negative squared speed at sample {k}")
        speed[k] = math.sqrt(q)
    return abs(float(simpson(speed, x=ts)))
