"""Likelihood, maximum-likelihood fitting and likelihood-based confidence regions.

Observations are independent normals about the model mean with a common
standard deviation, so for a dataset with ``N_j`` replicates of ``M``
species at each time ``t_j``

    l(theta) = sum_j sum_i sum_m log phi(x_ijm; mu_m(theta, t_j), sigma)

The asymptotic ``alpha`` confidence region is the super-level set
``l(theta) - l(theta_hat) >= -Delta / 2`` with ``Delta`` the ``alpha``
quantile of chi-squared on ``nu`` degrees of freedom.
"""

from __future__ import annotations

import csv
import io
import math
import os
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq, minimize
from scipy.special import gammainc
from scipy.stats import qmc

from ._validation import check_alpha, check_box, check_times
from .exceptions import DomainError, IntegrationError, OptimizationError
from .models import ModelSpec, ParameterPoint, solve_forward
from .odeint import heun_step

__all__ = [
    "Dataset",
    "MleResult",
    "ContourPolyline",
    "log_likelihood",
    "normalized_log_likelihood",
    "mle",
    "chi2_quantile",
    "confidence_threshold",
    "trace_confidence_contour",
    "default_box",
    "kl_divergence_normal",
    "kl_divergence_normal_mc",
]

_LOG_2PI = math.log(2 * math.pi)
CSV_HEADER = ("time", "species", "replicate", "value")


# --------------------------------------------------------------------------
# data


@dataclass(frozen=True, eq=False)
class Dataset:
    """Replicated observations at a set of time points.

    Parameters
    ----------
    times : array_like, shape (L,)
        Strictly increasing observation times.
    observations : sequence of array_like
        ``observations[j]`` has shape ``(N_j, M)``; column ``m`` holds the
        replicates of ``species[m]`` at ``times[j]``. A 1-D entry is read as
        ``N_j`` replicates of a single species.
    species : sequence of str
        Names of the ``M`` observed outputs.
    """

    times: np.ndarray
    observations: tuple
    species: tuple

    def __post_init__(self):
        times = check_times(self.times)
        species = tuple(self.species)
        if not species or len(set(species)) != len(species):
            raise ValueError(f"species must be a non-empty unique list, got {species}")
        obs = []
        for j, block in enumerate(self.observations):
            block = np.array(block, dtype=float)
            if block.ndim == 1 and len(species) == 1:
                block = block[:, None]
            if block.ndim != 2 or block.shape[1] != len(species) or block.shape[0] < 1:
                raise ValueError(
                    f"observations[{j}] must have shape (N_j >= 1, {len(species)}), "
                    f"got {block.shape}"
                )
            if not np.all(np.isfinite(block)):
                raise ValueError(f"observations[{j}] contains non-finite values")
            block.setflags(write=False)
            obs.append(block)
        if len(obs) != times.size:
            raise ValueError(f"{times.size} times but {len(obs)} observation blocks")
        times.setflags(write=False)
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "observations", tuple(obs))
        object.__setattr__(self, "species", species)

    @classmethod
    def from_array(cls, times, values, species):
        """Build from a dense ``(L, N, M)`` array (equal counts per time)."""
        values = np.asarray(values, dtype=float)
        if values.ndim == 2:
            values = values[:, :, None]
        return cls(times, tuple(values), species)

    @property
    def counts(self):
        return np.array([b.shape[0] for b in self.observations])

    @property
    def n_species(self):
        return len(self.species)

    @property
    def n_observations(self):
        """Total number of scalar observations ``sum_j N_j * M``."""
        return int(sum(b.size for b in self.observations))

    def __eq__(self, other):
        if not isinstance(other, Dataset):
            return NotImplemented
        return (
            self.species == other.species
            and np.array_equal(self.times, other.times)
            and len(self.observations) == len(other.observations)
            and all(np.array_equal(a, b) for a, b in zip(self.observations, other.observations))
        )

    __hash__ = None

    def concat(self, other: "Dataset") -> "Dataset":
        """Union of two datasets over the same species."""
        if other.species != self.species:
            raise ValueError("datasets observe different species")
        blocks = {}
        for data in (self, other):
            for t, b in zip(data.times, data.observations):
                blocks.setdefault(float(t), []).append(b)
        times = sorted(blocks)
        return Dataset(times, tuple(np.vstack(blocks[t]) for t in times), self.species)

    def permuted(self, random_state=None) -> "Dataset":
        """Copy with the replicate order shuffled within each time point."""
        rng = np.random.default_rng(random_state)
        return Dataset(
            self.times,
            tuple(b[rng.permutation(b.shape[0])] for b in self.observations),
            self.species,
        )

    def to_csv(self, path=None):
        """Write ``time,species,replicate,value`` rows, time-major.

        Returns the CSV text when ``path`` is None. Floats use the shortest
        repr that round-trips exactly.
        """
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(CSV_HEADER)
        for t, block in zip(self.times, self.observations):
            for m, name in enumerate(self.species):
                for i, value in enumerate(block[:, m]):
                    writer.writerow((repr(float(t)), name, i, repr(float(value))))
        text = buf.getvalue()
        if path is None:
            return text
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        return None

    @classmethod
    def from_csv(cls, source, species=None):
        """Read a dataset written by :meth:`to_csv`.

        ``source`` is a path or an open text stream. ``species`` fixes the
        column order; by default species appear in first-seen order.
        """
        if isinstance(source, (str, os.PathLike)):
            with open(source, encoding="utf-8", newline="") as fh:
                return cls.from_csv(fh, species)
        reader = csv.DictReader(source)
        if tuple(reader.fieldnames or ()) != CSV_HEADER:
            raise ValueError(f"expected header {','.join(CSV_HEADER)}, got {reader.fieldnames}")
        cells, seen = {}, []
        for lineno, row in enumerate(reader, start=2):
            try:
                key = (float(row["time"]), row["species"], int(row["replicate"]))
                value = float(row["value"])
            except (TypeError, ValueError) as exc:
                raise ValueError(f"line {lineno}: {exc}") from None
            if key in cells:
                raise ValueError(f"line {lineno}: duplicate entry {key}")
            cells[key] = value
            if key[1] not in seen:
                seen.append(key[1])
        if not cells:
            raise ValueError("dataset has no rows")
        species = tuple(seen) if species is None else tuple(species)
        if set(species) != set(seen):
            raise ValueError(f"dataset species {seen} do not match {list(species)}")
        times = sorted({k[0] for k in cells})
        blocks = []
        for t in times:
            reps = sorted({k[2] for k in cells if k[0] == t})
            try:
                blocks.append([[cells[(t, s, i)] for s in species] for i in reps])
            except KeyError as exc:
                raise ValueError(f"incomplete replicate at time {t}: missing {exc}") from None
        return cls(times, tuple(blocks), species)


@dataclass(frozen=True, eq=False)
class MleResult:
    """Outcome of :func:`mle`.

    Attributes
    ----------
    theta_hat : ParameterPoint
        Best point found.
    loglik_at_mle : float
        Log-likelihood at ``theta_hat``.
    iterations : int
        Optimizer iterations over all runs.
    converged : bool
        Whether the final local search met its tolerance.
    n_evaluations : int
        Log-likelihood evaluations over all runs.
    loglik_at_start : float
        Log-likelihood at the (first) start point.
    warnings : tuple of str
        Diagnostics, e.g. ``sigma`` clamped to its lower bound.
    """

    theta_hat: ParameterPoint
    loglik_at_mle: float
    iterations: int
    converged: bool
    n_evaluations: int = 0
    loglik_at_start: float = -math.inf
    warnings: tuple = field(default=())

    def to_dict(self):
        return {
            "theta_hat": self.theta_hat.as_dict(),
            "loglik": self.loglik_at_mle,
            "converged": bool(self.converged),
            "iterations": int(self.iterations),
            "n_evaluations": int(self.n_evaluations),
            "warnings": list(self.warnings),
        }


# --------------------------------------------------------------------------
# likelihood


def _check_species(spec, data):
    if tuple(data.species) != tuple(spec.species):
        raise ValueError(f"data species {data.species} do not match model species {spec.species}")


def log_likelihood(spec: ModelSpec, theta, data: Dataset) -> float:
    """Gaussian log-likelihood of ``data`` at ``theta``.

    ``sigma`` comes from ``theta`` when inferred, else from ``spec.fixed``.
    """
    _check_species(spec, data)
    out = solve_forward(spec, theta, data.times)
    sigma = out.sigma
    if not sigma > 0:
        raise DomainError(f"sigma must be positive, got {sigma}")
    ss = 0.0
    for j, block in enumerate(data.observations):
        r = block - out.means[j]
        ss += float(np.sum(r * r))
    n = data.n_observations
    return -0.5 * n * (_LOG_2PI + 2 * math.log(sigma)) - ss / (2 * sigma * sigma)


def normalized_log_likelihood(spec, theta, data, mle_result: MleResult) -> float:
    """``l(theta) - l(theta_hat)``; zero at the MLE and non-positive elsewhere."""
    return log_likelihood(spec, theta, data) - mle_result.loglik_at_mle


def _safe_loglik(spec, data, values):
    try:
        value = log_likelihood(spec, values, data)
    except (DomainError, IntegrationError, FloatingPointError, OverflowError):
        return -math.inf
    return value if math.isfinite(value) else -math.inf


def default_start(spec, bounds):
    """Box centre, with infinite sides replaced by a unit offset from a finite one."""
    lo, hi = bounds[:, 0], bounds[:, 1]
    start = np.zeros(lo.size)
    for i, (a, b) in enumerate(zip(lo, hi)):
        if math.isfinite(a) and math.isfinite(b):
            start[i] = 0.5 * (a + b)
        elif math.isfinite(a):
            start[i] = a + 1.0
        elif math.isfinite(b):
            start[i] = b - 1.0
    return start


def mle(
    spec: ModelSpec,
    data: Dataset,
    start=None,
    bounds=None,
    *,
    multistart=False,
    n_starts=5,
    random_state=0,
    xtol=1e-8,
    max_evaluations=10_000,
    max_restarts=2,
) -> MleResult:
    """Maximum-likelihood estimate by bound-constrained Nelder-Mead.

    The search runs in coordinates scaled by the start point so that the
    relative step tolerance ``xtol`` is meaningful for every parameter. A
    converged run is restarted from its own optimum with a fresh simplex
    until the best value stops improving (at most ``max_restarts`` times).

    Parameters
    ----------
    spec : ModelSpec
    data : Dataset
    start : ParameterPoint, mapping or array_like, optional
        Initial point, strictly inside ``bounds``. Defaults to the box centre.
    bounds : mapping or array_like, optional
        Search box ``(nu, 2)``; defaults to the family bounds.
    multistart : bool
        Also start from ``n_starts`` Latin-hypercube points in the box and
        keep the best optimum. Requires a finite box.
    random_state : int
        Seed of the Latin-hypercube design.

    Returns
    -------
    MleResult
    """
    _check_species(spec, data)
    if bounds is None:
        lo, hi = spec.bounds()[:, 0], spec.bounds()[:, 1]
    else:
        lo, hi = check_box(bounds, spec.inferred)
    fam = spec.bounds()
    lo, hi = np.maximum(lo, fam[:, 0]), np.minimum(hi, fam[:, 1])
    if start is None:
        x0 = default_start(spec, np.column_stack([lo, hi]))
    else:
        x0 = spec.coerce(start).values.astype(float)
    if not np.all((x0 > lo) & (x0 < hi)):
        raise DomainError(f"start {x0.tolist()} is not strictly inside the box {np.column_stack([lo, hi]).tolist()}")

    starts = [x0]
    if multistart:
        if not np.all(np.isfinite(lo) & np.isfinite(hi)):
            raise ValueError("multistart needs a finite box")
        sampler = qmc.LatinHypercube(d=spec.nu, seed=random_state)
        starts += list(qmc.scale(sampler.random(n_starts), lo, hi))

    counter = {"n": 0}

    def objective(z, scale):
        counter["n"] += 1
        return -_safe_loglik(spec, data, z * scale)

    best = None
    n_iter = 0
    ll_start = _safe_loglik(spec, data, x0)
    for s in starts:
        x, f, nit, converged = _nelder_mead(objective, s, lo, hi, xtol, max_evaluations, max_restarts)
        n_iter += nit
        if best is None or f < best[1]:
            best = (x, f, converged)
    x, f, converged = best
    if not math.isfinite(f):
        raise OptimizationError("log-likelihood is non-finite at every evaluated point")

    warnings = []
    if spec.sigma_inferred:
        i = spec.inferred.index("sigma")
        if x[i] <= lo[i] * (1 + 1e-3):
            warnings.append(
                f"sigma clamped to its lower bound {lo[i]:g}; the data are degenerate "
                "and the likelihood increases without limit as sigma -> 0"
            )
    return MleResult(
        spec.point(x), -f, n_iter, converged, counter["n"], ll_start, tuple(warnings)
    )


def _nelder_mead(objective, x0, lo, hi, xtol, max_evaluations, max_restarts):
    scale = np.where(np.abs(x0) > 0, np.abs(x0), 1.0)
    bounds = list(zip(lo / scale, hi / scale))
    z = x0 / scale
    f = objective(z, scale)
    nit = 0
    converged = False
    evals_left = max_evaluations
    for run in range(max_restarts + 1):
        res = minimize(
            objective,
            z,
            args=(scale,),
            method="Nelder-Mead",
            bounds=bounds,
            options={
                "xatol": xtol,
                "fatol": 1e-12 * max(1.0, abs(f)) if math.isfinite(f) else 1e-12,
                "maxfev": evals_left,
                "initial_simplex": _simplex(z, bounds, 0.05 if run == 0 else 0.01),
            },
        )
        nit += res.nit
        evals_left -= res.nfev
        improved = math.isfinite(res.fun) and (not math.isfinite(f) or res.fun < f)
        gain = f - res.fun if math.isfinite(f) and math.isfinite(res.fun) else math.inf
        if improved:
            z, f = res.x, res.fun
        converged = bool(res.success)
        if not converged or evals_left <= 0 or gain <= 1e-12 * max(1.0, abs(f)):
            break
    return z * scale, f, nit, converged


def _simplex(z, bounds, rel):
    """Right-angled simplex at ``z``, stepping inward from any near bound."""
    pts = [np.array(z, dtype=float)]
    for i, (lo, hi) in enumerate(bounds):
        p = pts[0].copy()
        step = rel * max(abs(z[i]), 1e-3)
        p[i] = z[i] + step if z[i] + step <= hi else z[i] - step
        p[i] = min(max(p[i], lo), hi)
        pts.append(p)
    return np.array(pts)


# --------------------------------------------------------------------------
# thresholds


def chi2_quantile(nu, alpha) -> float:
    """``alpha`` quantile of chi-squared with ``nu`` degrees of freedom.

    Inverts the regularised lower incomplete gamma function
    ``P(nu/2, x/2) = alpha`` with a bracketed root finder.
    """
    if not nu >= 1:
        raise ValueError(f"nu must be at least 1, got {nu}")
    alpha = check_alpha(alpha)
    a = 0.5 * nu

    def g(x):
        return gammainc(a, 0.5 * x) - alpha

    hi = max(1.0, float(nu))
    while g(hi) < 0:
        hi *= 2
    return brentq(g, 0.0, hi, xtol=1e-14, rtol=4 * np.finfo(float).eps, maxiter=500)


def confidence_threshold(nu, alpha) -> float:
    """Wilks threshold ``-Delta/2`` on the normalised log-likelihood."""
    return -0.5 * chi2_quantile(nu, alpha)


# --------------------------------------------------------------------------
# contour tracing


@dataclass(frozen=True, eq=False)
class ContourPolyline:
    """A traced level curve of the normalised log-likelihood.

    Attributes
    ----------
    names : tuple of str
        Parameter names of the two coordinates.
    points : ndarray, shape (n, 2)
        Curve samples. A closed curve does not repeat its first point.
    closed : bool
        The trace returned to its seed.
    open_region : bool
        The region is not closed inside the box: either the trace left the
        box or no crossing of the level was found along ``+theta_1``.
    level : float
        Traced level ``-Delta/2`` of the normalised log-likelihood.
    alpha : float
    residuals : ndarray, shape (n,)
        ``l_hat(theta) + Delta/2`` at each point.
    reason : str
        ``closed``, ``left-box``, ``no-crossing``, ``max-steps``,
        ``stationary`` or ``projection-failed``.
    box : ndarray, shape (2, 2)
    """

    names: tuple
    points: np.ndarray
    closed: bool
    open_region: bool
    level: float
    alpha: float
    residuals: np.ndarray
    reason: str
    box: np.ndarray

    def to_csv(self, path=None):
        buf = io.StringIO()
        buf.write("point,theta1,theta2\n")
        for k, (a, b) in enumerate(self.points):
            buf.write(f"{k},{float(a)!r},{float(b)!r}\n")
        text = buf.getvalue()
        if path is None:
            return text
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        return None


def default_box(spec, data, mle_result, alpha=0.95, width=4.0):
    """Box of ``width`` Wald half-widths about the MLE, clipped to the family bounds.

    Falls back to +-50% of each coordinate when the Fisher metric at the
    MLE is singular.
    """
    from .geometry import Design, fisher_metric

    theta_hat = mle_result.theta_hat.values
    delta = chi2_quantile(spec.nu, alpha)
    try:
        G = fisher_metric(spec, Design.from_dataset(data), theta_hat)
        cov = np.linalg.inv(G)
        half = width * np.sqrt(delta * np.diag(cov))
        if not np.all(np.isfinite(half) & (half > 0)):
            raise np.linalg.LinAlgError
    except (np.linalg.LinAlgError, ArithmeticError):
        half = 0.5 * np.maximum(np.abs(theta_hat), 1e-3)
    fam = spec.bounds()
    lo = np.maximum(theta_hat - half, fam[:, 0])
    hi = np.minimum(theta_hat + half, fam[:, 1])
    return np.column_stack([lo, hi])


def _fd_gradient(f, x, rel=1e-6, floor=1e-10):
    """Central differences, one-sided where a probe falls outside the domain (NaN)."""
    g = np.empty(x.size)
    f0 = None
    for i in range(x.size):
        h = max(rel * abs(x[i]), floor)
        up, dn = x.copy(), x.copy()
        up[i] += h
        dn[i] -= h
        fu, fd = f(up), f(dn)
        if math.isfinite(fu) and math.isfinite(fd):
            g[i] = (fu - fd) / (2 * h)
            continue
        if f0 is None:
            f0 = f(x)
        g[i] = (fu - f0) / h if math.isfinite(fu) else (f0 - fd) / h
    return g


def trace_confidence_contour(
    spec: ModelSpec,
    data: Dataset,
    mle_result: MleResult,
    alpha=0.95,
    box=None,
    *,
    steps_per_diagonal=400,
    max_steps=50_000,
    tol=1e-8,
) -> ContourPolyline:
    """Trace the ``alpha`` likelihood confidence contour.

    The seed is the first crossing of the level ``-Delta/2`` on the ray
    from the MLE in the ``+theta_1`` direction, refined to ``tol``. The
    curve is then followed with Heun steps along the unit tangent
    ``rot90(grad l_hat)`` in box-normalised coordinates, each step of
    length ``sqrt(2) / steps_per_diagonal`` (a fixed fraction of the box
    diagonal), followed by a Newton projection back onto the level set.
    Gradients are central differences with relative step ``1e-6``.

    Tracing stops when the curve returns within one step of the seed
    (closed) or leaves the box; in the latter case the other branch is
    traced from the seed too and the region is flagged open.
    """
    alpha = check_alpha(alpha)
    _check_species(spec, data)
    if spec.nu != 2:
        raise ValueError("contour tracing needs exactly two inferred parameters")
    if box is None:
        box = default_box(spec, data, mle_result, alpha)
    lo, hi = check_box(box, spec.inferred)
    width = hi - lo
    level = confidence_threshold(spec.nu, alpha)
    ll_hat = mle_result.loglik_at_mle
    theta_hat = mle_result.theta_hat.values.astype(float)
    if not np.all((theta_hat >= lo) & (theta_hat <= hi)):
        raise ValueError("the MLE lies outside the contour box")

    def resid_theta(theta):
        try:
            value = log_likelihood(spec, theta, data) - ll_hat - level
        except (DomainError, IntegrationError, FloatingPointError, OverflowError):
            return math.nan
        return value

    def resid(u):
        return resid_theta(lo + u * width)

    def grad_u(u):
        theta = lo + u * width
        return _fd_gradient(resid_theta, theta) * width

    def result(points, closed, open_region, reason):
        points = np.asarray(points, dtype=float).reshape(-1, 2)
        thetas = lo + points * width
        res = np.array([resid_theta(t) for t in thetas])
        return ContourPolyline(
            tuple(spec.inferred), thetas, closed, open_region, level, alpha, res,
            reason, np.column_stack([lo, hi]),
        )

    # Seed on the +theta_1 ray.
    u_hat = (theta_hat - lo) / width
    u_edge = u_hat.copy()
    u_edge[0] = 1.0
    r_edge = resid(u_edge)
    if not (r_edge < 0):
        return result(np.empty((0, 2)), False, True, "no-crossing")

    def on_ray(s):
        return resid(u_hat + s * (u_edge - u_hat))

    s_star = brentq(on_ray, 0.0, 1.0, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=500)
    seed = _project(resid, grad_u, u_hat + s_star * (u_edge - u_hat), tol)
    if seed is None:
        return result(np.empty((0, 2)), False, True, "projection-failed")

    h = math.sqrt(2.0) / steps_per_diagonal
    branch, reason = _trace_branch(resid, grad_u, seed, h, +1.0, tol, max_steps)
    if reason == "closed":
        return result(branch, True, False, "closed")
    if reason != "left-box":
        return result(branch, False, True, reason)
    other, reason2 = _trace_branch(resid, grad_u, seed, h, -1.0, tol, max_steps)
    points = np.vstack([other[::-1], branch[1:]])
    return result(points, False, True, "left-box" if reason2 == "left-box" else reason2)


def _project(resid, grad_u, u, tol, max_iter=30):
    """Newton correction along the gradient onto the zero level."""
    for _ in range(max_iter):
        r = resid(u)
        if not math.isfinite(r):
            return None
        if abs(r) <= tol:
            return u
        g = grad_u(u)
        gg = float(g @ g)
        if not gg > 0 or not math.isfinite(gg):
            return None
        u = u - r * g / gg
    return u if abs(resid(u)) <= tol else None


def _inside(u):
    return bool(np.all((u >= 0.0) & (u <= 1.0)))


def _trace_branch(resid, grad_u, seed, h, orientation, tol, max_steps):
    def tangent(t, u):
        g = grad_u(u)
        norm = math.hypot(g[0], g[1])
        if not norm > 0 or not math.isfinite(norm):
            raise ZeroDivisionError
        return orientation * np.array([-g[1], g[0]]) / norm

    points = [seed]
    u = seed
    travelled = 0.0
    for _ in range(max_steps):
        try:
            u_new = heun_step(tangent, 0.0, u, h)
        except ZeroDivisionError:
            return np.array(points), "stationary"
        except (IntegrationError, ValueError):
            return np.array(points), "left-box"
        if not np.all(np.isfinite(u_new)) or not _inside(u_new):
            return np.array(points), "left-box"
        u_proj = _project(resid, grad_u, u_new, tol)
        if u_proj is None:
            if not _inside(u_new) or not math.isfinite(resid(u_new)):
                return np.array(points), "left-box"
            return np.array(points), "projection-failed"
        if not _inside(u_proj):
            return np.array(points), "left-box"
        travelled += float(np.linalg.norm(u_proj - u))
        u = u_proj
        if travelled >= 10 * h and np.linalg.norm(u - seed) <= h:
            return np.array(points), "closed"
        points.append(u)
    return np.array(points), "max-steps"


# --------------------------------------------------------------------------
# KL divergence


def _check_normal(p, name):
    mu, sigma = (float(v) for v in p)
    if not sigma > 0:
        raise DomainError(f"{name}: sigma must be positive, got {sigma}")
    return mu, sigma


def kl_divergence_normal(p, q) -> float:
    """KL divergence ``D(P || Q)`` between normals ``p = (mu_p, sigma_p)`` and ``q``."""
    mp, sp = _check_normal(p, "p")
    mq, sq = _check_normal(q, "q")
    return math.log(sq / sp) + (sp * sp + (mp - mq) ** 2) / (2 * sq * sq) - 0.5


def kl_divergence_normal_mc(p, q, n_draws=1_000_000, random_state=None):
    """Monte-Carlo estimate of ``D(P || Q)`` and its standard error.

    Averages ``log p(x) - log q(x)`` over ``n_draws`` draws from ``P``.
    """
    mp, sp = _check_normal(p, "p")
    mq, sq = _check_normal(q, "q")
    x = np.random.default_rng(random_state).normal(mp, sp, size=int(n_draws))
    zp = (x - mp) / sp
    zq = (x - mq) / sq
    terms = math.log(sq / sp) + 0.5 * (zq * zq - zp * zp)
    return float(terms.mean()), float(terms.std(ddof=1) / math.sqrt(terms.size))
