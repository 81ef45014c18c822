"""Process models: mean behaviour, forward solves and model Jacobians.

Families and their full parameter sets:

=========================  =======================  ==============
family                     parameters               outputs
=========================  =======================  ==============
univariate-normal          mu, sigma                x
multivariate-normal-2d     mu1, mu2, sigma          x, y
linear                     a, C0, sigma             C
exponential                a, C0, sigma             C
logistic                   r, C0, K, sigma          C
sir                        beta, gamma, sigma       S, I, R
=========================  =======================  ==============

Observations are normal about the model mean with a constant standard
deviation ``sigma``. Time is in years for the growth models and days for
``sir``; units are metadata only.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numba
import numpy as np

from .exceptions import DomainError
from .odeint import IvpProblem, integrate_fixed_dp5, integrate_rk54

__all__ = [
    "FAMILIES",
    "ParameterPoint",
    "ModelSpec",
    "ModelOutput",
    "mean",
    "solve_forward",
    "means_from_full",
    "model_jacobian",
    "model_jacobians",
    "sir_rhs",
    "family_rhs",
]

_LOCATION = (-math.inf, math.inf)
_SIGMA = (1e-6, math.inf)
_RATE = (1e-6, 1e3)
_DENSITY = (1e-6, 1e4)


@dataclass(frozen=True)
class _Family:
    parameters: tuple
    outputs: tuple
    default_species: tuple
    bounds: dict
    time_unit: str = ""
    initial_conditions: dict = field(default_factory=dict)


FAMILIES = {
    "univariate-normal": _Family(
        ("mu", "sigma"), ("x",), ("x",), {"mu": _LOCATION, "sigma": _SIGMA}
    ),
    "multivariate-normal-2d": _Family(
        ("mu1", "mu2", "sigma"),
        ("x", "y"),
        ("x", "y"),
        {"mu1": _LOCATION, "mu2": _LOCATION, "sigma": _SIGMA},
    ),
    "linear": _Family(
        ("a", "C0", "sigma"), ("C",), ("C",),
        {"a": _RATE, "C0": _DENSITY, "sigma": _SIGMA}, "year",
    ),
    "exponential": _Family(
        ("a", "C0", "sigma"), ("C",), ("C",),
        {"a": _RATE, "C0": _DENSITY, "sigma": _SIGMA}, "year",
    ),
    "logistic": _Family(
        ("r", "C0", "K", "sigma"), ("C",), ("C",),
        {"r": _RATE, "C0": _DENSITY, "K": _DENSITY, "sigma": _SIGMA}, "year",
    ),
    "sir": _Family(
        ("beta", "gamma", "sigma"), ("S", "I", "R"), ("I",),
        {"beta": _RATE, "gamma": _RATE, "sigma": _SIGMA}, "day",
        {"S0": 762 / 763, "I0": 1 / 763, "R0": 0.0},
    ),
}

# Fixed step (days) of the SIR forward solve.
SIR_STEP = 0.025
# Relative / absolute central-difference steps for the SIR Jacobian.
SIR_FD_REL = 1e-5
SIR_FD_ABS = 1e-8


class FrozenDict(dict):
    """A read-only dict that still pickles."""

    def _readonly(self, *args, **kwargs):
        raise TypeError("FrozenDict is immutable")

    __setitem__ = __delitem__ = clear = pop = popitem = setdefault = update = _readonly

    def __reduce__(self):
        return (FrozenDict, (dict(self),))

    def __hash__(self):
        return hash(tuple(sorted(self.items())))


@dataclass(frozen=True, eq=False)
class ParameterPoint:
    """Named parameter vector; ``values[i]`` belongs to ``names[i]``."""

    names: tuple
    values: np.ndarray

    def __post_init__(self):
        names = tuple(self.names)
        values = np.array(self.values, dtype=float).reshape(-1)
        if len(names) != values.size:
            raise ValueError(f"{len(names)} names but {values.size} values")
        if len(set(names)) != len(names):
            raise ValueError(f"parameter names must be unique, got {names}")
        values.setflags(write=False)
        object.__setattr__(self, "names", names)
        object.__setattr__(self, "values", values)

    @classmethod
    def from_mapping(cls, mapping: Mapping[str, float], names: Sequence[str] = None):
        names = tuple(mapping) if names is None else tuple(names)
        return cls(names, [mapping[n] for n in names])

    def __len__(self):
        return len(self.names)

    def __getitem__(self, name):
        try:
            return float(self.values[self.names.index(name)])
        except ValueError:
            raise KeyError(name) from None

    def as_dict(self):
        return {n: float(v) for n, v in zip(self.names, self.values)}

    def with_values(self, values):
        return ParameterPoint(self.names, values)

    def __repr__(self):
        inner = ", ".join(f"{n}={v:.6g}" for n, v in zip(self.names, self.values))
        return f"ParameterPoint({inner})"


@dataclass(frozen=True)
class ModelSpec:
    """A model family plus the split of its parameters into fixed and inferred.

    Parameters
    ----------
    family : str
        One of :data:`FAMILIES`.
    fixed : mapping
        Known parameter values.
    inferred : sequence of str
        Names of the parameters to estimate, in coordinate order.
    species : sequence of str, optional
        Observed outputs; defaults to the family default (``I`` for sir).
    initial_conditions : mapping, optional
        ODE initial state (sir: ``S0``, ``I0``, ``R0``).
    """

    family: str
    fixed: Mapping[str, float]
    inferred: tuple
    species: tuple = None
    initial_conditions: Mapping[str, float] = None

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise DomainError(
                f"unknown family {self.family!r}; expected one of {sorted(FAMILIES)}"
            )
        fam = FAMILIES[self.family]
        inferred = tuple(self.inferred)
        fixed = FrozenDict({k: float(v) for k, v in dict(self.fixed).items()})
        species = fam.default_species if self.species is None else tuple(self.species)
        ics = dict(fam.initial_conditions)
        if self.initial_conditions:
            unknown = set(self.initial_conditions) - set(fam.initial_conditions)
            if unknown:
                raise DomainError(f"unknown initial conditions {sorted(unknown)}")
            ics.update({k: float(v) for k, v in self.initial_conditions.items()})

        if len(inferred) != 2:
            raise DomainError(f"exactly two inferred parameters are supported, got {inferred}")
        if len(set(inferred)) != len(inferred):
            raise DomainError(f"inferred parameters must be unique, got {inferred}")
        overlap = set(inferred) & set(fixed)
        if overlap:
            raise DomainError(f"parameters both fixed and inferred: {sorted(overlap)}")
        unknown = (set(inferred) | set(fixed)) - set(fam.parameters)
        if unknown:
            raise DomainError(f"unknown parameters for {self.family}: {sorted(unknown)}")
        missing = set(fam.parameters) - set(inferred) - set(fixed)
        if missing:
            raise DomainError(f"parameters neither fixed nor inferred: {sorted(missing)}")
        if not species or len(set(species)) != len(species):
            raise DomainError(f"species must be a non-empty unique list, got {species}")
        bad = set(species) - set(fam.outputs)
        if bad:
            raise DomainError(f"{self.family} has no outputs {sorted(bad)}")
        for name, value in fixed.items():
            _check_bound(self.family, name, value)

        object.__setattr__(self, "inferred", inferred)
        object.__setattr__(self, "fixed", fixed)
        object.__setattr__(self, "species", species)
        object.__setattr__(self, "initial_conditions", FrozenDict(ics))

    @property
    def parameters(self):
        return FAMILIES[self.family].parameters

    @property
    def nu(self):
        return len(self.inferred)

    @property
    def sigma_inferred(self):
        return "sigma" in self.inferred

    @property
    def time_unit(self):
        return FAMILIES[self.family].time_unit

    def bounds(self, names=None):
        """``(len(names), 2)`` array of family bounds (default: inferred)."""
        names = self.inferred if names is None else names
        return np.array([FAMILIES[self.family].bounds[n] for n in names], dtype=float)

    def point(self, values) -> ParameterPoint:
        """Wrap a raw vector of inferred-parameter values."""
        return ParameterPoint(self.inferred, values)

    def full(self, theta) -> dict:
        """All family parameters, inferred values taken from ``theta``."""
        theta = self.coerce(theta)
        values = dict(self.fixed)
        values.update(theta.as_dict())
        for name, value in theta.as_dict().items():
            _check_bound(self.family, name, value)
        return {n: values[n] for n in self.parameters}

    def coerce(self, theta) -> ParameterPoint:
        """Accept a ParameterPoint, a mapping or a plain vector."""
        if isinstance(theta, ParameterPoint):
            if theta.names != self.inferred:
                if set(theta.names) != set(self.inferred):
                    raise DomainError(
                        f"expected parameters {self.inferred}, got {theta.names}"
                    )
                return ParameterPoint.from_mapping(theta.as_dict(), self.inferred)
            return theta
        if isinstance(theta, Mapping):
            return ParameterPoint.from_mapping(theta, self.inferred)
        return self.point(theta)

    def sigma(self, theta) -> float:
        return self.full(theta)["sigma"]


def _check_bound(family, name, value):
    lo, hi = FAMILIES[family].bounds[name]
    if not np.isfinite(value) or not (lo <= value <= hi):
        raise DomainError(f"{name}={value!r} violates bound [{lo:g}, {hi:g}]")


@dataclass(frozen=True, eq=False)
class ModelOutput:
    """Model means at the requested times.

    ``means[j, m]`` is the expected value of species ``m`` at ``times[j]``.
    """

    times: np.ndarray
    means: np.ndarray
    sigma: float
    species: tuple


def sir_rhs(state, beta, gamma):
    """Right-hand side of the SIR equations for proportions ``(S, I, R)``."""
    S, I, R = state
    infection = beta * S * I
    recovery = gamma * I
    return (-infection, infection - recovery, recovery)


@numba.njit(cache=True)
def _sir_rhs_jit(t, y, p, out):
    infection = p[0] * y[0] * y[1]
    recovery = p[1] * y[1]
    out[0] = -infection
    out[1] = infection - recovery
    out[2] = recovery


@numba.njit(cache=True)
def _sir_kernel(y0, params, times, h_max, a, c, b):
    n_batch = params.shape[0]
    n_out = times.shape[0]
    out = np.empty((n_batch, n_out, 3))
    k = np.empty((7, 3))
    y = np.empty(3)
    yi = np.empty(3)
    for batch in range(n_batch):
        p = params[batch]
        y[:] = y0
        t = 0.0
        for idx in range(n_out):
            span = times[idx] - t
            if span > 0.0:
                n = int(np.ceil(span / h_max - 1e-9))
                h = span / n
                for step in range(n):
                    ts = t + step * h
                    for s in range(7):
                        for q in range(3):
                            acc = y[q]
                            for j in range(s):
                                acc += h * a[s, j] * k[j, q]
                            yi[q] = acc
                        _sir_rhs_jit(ts + c[s] * h, yi, p, k[s])
                    for q in range(3):
                        acc = y[q]
                        for j in range(6):
                            acc += h * b[j] * k[j, q]
                        y[q] = acc
                t = times[idx]
            out[batch, idx, :] = y
    return out


def _sir_states(spec, params, times):
    """SIR states ``(B, L, 3)`` for a ``(B, 2)`` array of ``(beta, gamma)`` rows."""
    ic = spec.initial_conditions
    y0 = np.array([ic["S0"], ic["I0"], ic["R0"]])
    return integrate_fixed_dp5(_sir_kernel, y0, params, times, SIR_STEP)


def family_rhs(spec: ModelSpec, theta):
    """ODE right-hand side ``f(t, y)`` of the family's state equation.

    Returns ``(rhs, y0, outputs)`` where ``outputs`` names the state
    components. Normal families have no ODE and raise ``DomainError``.
    """
    p = spec.full(theta)
    fam = spec.family
    if fam == "linear":
        return (lambda t, y: np.array([p["a"]])), np.array([p["C0"]]), ("C",)
    if fam == "exponential":
        return (lambda t, y: p["a"] * y), np.array([p["C0"]]), ("C",)
    if fam == "logistic":
        r, K = p["r"], p["K"]
        return (lambda t, y: r * y * (1 - y / K)), np.array([p["C0"]]), ("C",)
    if fam == "sir":
        beta, gamma = p["beta"], p["gamma"]
        ic = spec.initial_conditions
        y0 = np.array([ic["S0"], ic["I0"], ic["R0"]])
        return (lambda t, y: np.array(sir_rhs(y, beta, gamma))), y0, ("S", "I", "R")
    raise DomainError(f"{fam} has no ODE form")


def _closed_form(spec, p, times):
    """All family outputs at ``times`` for closed-form families, shape (L, n_out)."""
    t = np.asarray(times, dtype=float)
    fam = spec.family
    if fam == "univariate-normal":
        return np.full((t.size, 1), p["mu"])
    if fam == "multivariate-normal-2d":
        return np.tile([p["mu1"], p["mu2"]], (t.size, 1))
    if fam == "linear":
        return (p["a"] * t + p["C0"])[:, None]
    if fam == "exponential":
        return (p["C0"] * np.exp(p["a"] * t))[:, None]
    if fam == "logistic":
        r, c0, K = p["r"], p["C0"], p["K"]
        return (c0 * K / (c0 + (K - c0) * np.exp(-r * t)))[:, None]
    raise AssertionError(fam)


def _check_times(times):
    times = np.atleast_1d(np.asarray(times, dtype=float))
    if times.ndim != 1 or times.size == 0:
        raise ValueError("times must be a non-empty vector")
    if times[0] < 0:
        raise ValueError(f"times must be non-negative, got {times[0]}")
    if np.any(np.diff(times) <= 0):
        raise ValueError("times must be strictly increasing")
    return times


def _numerical_states(spec, theta, times, rtol=1e-11, atol=1e-13):
    rhs, y0, _ = family_rhs(spec, theta)
    out = np.empty((times.size, y0.size))
    t_prev, y = 0.0, y0
    for j, t in enumerate(times):
        if t > t_prev:
            traj = integrate_rk54(IvpProblem(rhs, y, (t_prev, t)), rtol=rtol, atol=atol)
            y = traj.y_final
            t_prev = t
        out[j] = y
    return out


def solve_forward(spec: ModelSpec, theta, times, *, numerical=False) -> ModelOutput:
    """Evaluate the model means at exactly the requested times.

    Closed-form families are evaluated analytically. ``sir`` is propagated
    from ``t = 0`` with fixed 5th-order Dormand-Prince steps (at most
    ``SIR_STEP`` days), hitting every requested time.

    With ``numerical=True`` the family ODE is instead integrated with the
    adaptive 5(4) pair, restarting at each requested time.
    """
    times = _check_times(times)
    p = spec.full(theta)
    if numerical:
        fam = FAMILIES[spec.family]
        states = _numerical_states(spec, theta, times)
        means = states[:, [fam.outputs.index(s) for s in spec.species]]
    else:
        means = means_from_full(spec, p, times)
    return ModelOutput(times, means, p["sigma"], spec.species)


def means_from_full(spec: ModelSpec, params: Mapping[str, float], times) -> np.ndarray:
    """Observed-species means ``(L, M)`` from a full parameter mapping.

    ``sigma`` is not consulted, so it may be absent or zero; every other
    family parameter must be present and in bounds.
    """
    times = _check_times(times)
    fam = FAMILIES[spec.family]
    p = {}
    for name in fam.parameters:
        if name == "sigma":
            continue
        if name not in params:
            raise DomainError(f"missing parameter {name!r}")
        _check_bound(spec.family, name, float(params[name]))
        p[name] = float(params[name])
    if spec.family == "sir":
        states = _sir_states(spec, np.array([[p["beta"], p["gamma"]]]), times)[0]
    else:
        states = _closed_form(spec, p, times)
    return states[:, [fam.outputs.index(s) for s in spec.species]]


def mean(spec: ModelSpec, theta, t: float) -> np.ndarray:
    """Expected value of each observed species at time ``t``."""
    if t < 0:
        raise ValueError(f"t must be non-negative, got {t}")
    return solve_forward(spec, theta, [t]).means[0]


def _mean_partials(spec, p, name, times):
    """Analytic d(mean)/d(name) for every family output, shape (L, n_out)."""
    t = np.asarray(times, dtype=float)
    fam = spec.family
    n_out = len(FAMILIES[fam].outputs)
    if name == "sigma":
        return np.zeros((t.size, n_out))
    if fam == "univariate-normal":
        return np.ones((t.size, 1))
    if fam == "multivariate-normal-2d":
        col = np.zeros((t.size, 2))
        col[:, 0 if name == "mu1" else 1] = 1.0
        return col
    if fam == "linear":
        return (t if name == "a" else np.ones_like(t))[:, None]
    if fam == "exponential":
        e = np.exp(p["a"] * t)
        return (t * p["C0"] * e if name == "a" else e)[:, None]
    if fam == "logistic":
        r, c0, K = p["r"], p["C0"], p["K"]
        em = np.exp(-r * t)
        denom = c0 * (1 - em) + K * em
        if name == "r":
            d = c0 * K * t * (K - c0) * em / ((K - c0) * em + c0) ** 2
        elif name == "C0":
            d = K**2 * em / denom**2
        else:
            d = c0**2 * (1 - em) / denom**2
        return d[:, None]
    raise AssertionError(fam)


def _sir_partials(spec, points, names, times):
    """Central-difference d(states)/d(name), shape (len(points), len(names), L, 3).

    ``points`` are full parameter mappings; every perturbed solve of every
    point goes through a single kernel call.
    """
    rows, steps = [], []
    for p in points:
        base = np.array([p["beta"], p["gamma"]])
        for name in names:
            i = ("beta", "gamma").index(name)
            h = max(SIR_FD_REL * abs(base[i]), SIR_FD_ABS)
            up, down = base.copy(), base.copy()
            up[i] += h
            down[i] -= h
            rows += [up, down]
            steps.append(h)
    states = _sir_states(spec, np.array(rows), times)
    d = (states[0::2] - states[1::2]) / (2 * np.array(steps))[:, None, None]
    return d.reshape(len(points), len(names), times.size, 3)


def model_jacobian(spec: ModelSpec, theta, times) -> np.ndarray:
    """Derivatives of the stacked model outputs with respect to ``theta``.

    Rows are the observed means ordered time-major then species-minor
    (``L * M`` rows). When ``sigma`` is inferred a single final row holds
    ``d(sigma)/d(theta_i)``: one in the ``sigma`` column, zero elsewhere.

    Analytic derivatives are used for every closed-form family; ``sir``
    uses central differences of the forward solve (relative step ``1e-5``,
    absolute floor ``1e-8``).
    """
    return model_jacobians(spec, [theta], times)[0]


def model_jacobians(spec: ModelSpec, thetas, times) -> np.ndarray:
    """:func:`model_jacobian` at several points, shape ``(len(thetas), rows, nu)``."""
    times = _check_times(times)
    points = [spec.full(theta) for theta in thetas]
    fam = FAMILIES[spec.family]
    cols = [fam.outputs.index(s) for s in spec.species]
    L, M = times.size, len(cols)
    J = np.zeros((len(points), L * M + (1 if spec.sigma_inferred else 0), spec.nu))
    names = [n for n in spec.inferred if n != "sigma"]
    if spec.family == "sir" and names and points:
        sir_d = _sir_partials(spec, points, names, times)
    for b, p in enumerate(points):
        for i, name in enumerate(spec.inferred):
            if name == "sigma":
                J[b, -1, i] = 1.0
                continue
            if spec.family == "sir":
                d = sir_d[b, names.index(name)]
            else:
                d = _mean_partials(spec, p, name, times)
            J[b, : L * M, i] = d[:, cols].reshape(-1)
    return J
