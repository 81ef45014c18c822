"""Initial-value ODE integration.

Two integrators are provided:

* :func:`integrate_heun`, the fixed-step two-stage Heun method, used for
  tracing likelihood contours;
* :func:`integrate_rk54`, an adaptive Dormand-Prince 5(4) pair with PI step
  control and event location, used for geodesics.

Both return a :class:`Trajectory`, which also serves as a cubic Hermite dense
output over its accepted steps.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .exceptions import IntegrationError

__all__ = [
    "IvpProblem",
    "Trajectory",
    "heun_step",
    "integrate_heun",
    "integrate_rk54",
    "integrate_fixed_dp5",
    "DP_C",
    "DP_A",
    "DP_B5",
    "DP_E",
]

# Dormand-Prince tableau.
DP_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
DP_A = (
    (),
    (1 / 5,),
    (3 / 40, 9 / 40),
    (44 / 45, -56 / 15, 32 / 9),
    (19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729),
    (9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656),
    (35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84),
)
DP_B5 = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
# difference between the 5th and embedded 4th order weights
DP_E = np.array(
    [71 / 57600, 0.0, -71 / 16695, 71 / 1920, -17253 / 339200, 22 / 525, -1 / 40]
)

EVENT_TOL = 1e-10


@dataclass(frozen=True)
class IvpProblem:
    """An initial-value problem ``y' = rhs(t, y)``, ``y(t_start) = y0``.

    ``event`` is an optional scalar function ``(t, y) -> float``; integration
    stops where it changes sign.
    """

    rhs: Callable[[float, np.ndarray], np.ndarray]
    y0: np.ndarray
    tspan: tuple
    event: Optional[Callable[[float, np.ndarray], float]] = None

    def __post_init__(self):
        y0 = np.atleast_1d(np.asarray(self.y0, dtype=float)).copy()
        object.__setattr__(self, "y0", y0)
        t0, t1 = float(self.tspan[0]), float(self.tspan[1])
        if not t1 > t0:
            raise ValueError(f"tspan must be increasing, got ({t0}, {t1})")
        object.__setattr__(self, "tspan", (t0, t1))

    def f(self, t, y):
        dy = np.asarray(self.rhs(t, y), dtype=float)
        if dy.shape != self.y0.shape:
            raise ValueError(
                f"rhs returned shape {dy.shape}, expected {self.y0.shape}"
            )
        return dy


@dataclass
class Trajectory:
    """Accepted integration nodes.

    Attributes
    ----------
    ts : ndarray, shape (n,)
        Strictly increasing node times, ``ts[0] == t_start``.
    ys : ndarray, shape (n, d)
        States at the nodes.
    fs : ndarray, shape (n, d)
        Right-hand side at the nodes (used for Hermite dense output).
    terminated_by_event : bool
    event_time : float or None
    failure : str or None
        Set when integration was cut short by a right-hand-side failure and
        ``stop_on_error`` was requested.
    errors : ndarray
        Scaled local error estimate of every accepted step (rk54 only).
    """

    ts: np.ndarray
    ys: np.ndarray
    fs: np.ndarray
    terminated_by_event: bool = False
    event_time: Optional[float] = None
    failure: Optional[str] = None
    errors: np.ndarray = field(default_factory=lambda: np.zeros(0))
    n_rejected: int = 0

    @property
    def t_final(self):
        return float(self.ts[-1])

    @property
    def y_final(self):
        return self.ys[-1]

    def __call__(self, t):
        """Cubic Hermite interpolation of the state at time(s) ``t``."""
        t = np.asarray(t, dtype=float)
        scalar = t.ndim == 0
        t = np.atleast_1d(t)
        if np.any(t < self.ts[0] - 1e-12) or np.any(t > self.ts[-1] + 1e-12):
            raise ValueError("dense output requested outside the integrated span")
        idx = np.clip(np.searchsorted(self.ts, t, side="right") - 1, 0, len(self.ts) - 2)
        t0, t1 = self.ts[idx], self.ts[idx + 1]
        h = (t1 - t0)[:, None]
        s = ((t - t0) / (t1 - t0))[:, None]
        y0, y1 = self.ys[idx], self.ys[idx + 1]
        f0, f1 = self.fs[idx], self.fs[idx + 1]
        h00 = 2 * s**3 - 3 * s**2 + 1
        h10 = s**3 - 2 * s**2 + s
        h01 = -2 * s**3 + 3 * s**2
        h11 = s**3 - s**2
        out = h00 * y0 + h10 * h * f0 + h01 * y1 + h11 * h * f1
        return out[0] if scalar else out


def heun_step(rhs, t, y, h):
    """One Heun (explicit trapezoidal) step of size ``h``."""
    k1 = np.asarray(rhs(t, y), dtype=float)
    k2 = np.asarray(rhs(t + h, y + h * k1), dtype=float)
    return y + 0.5 * h * (k1 + k2)


def integrate_heun(problem: IvpProblem, h: float) -> Trajectory:
    """Integrate with the fixed-step second-order Heun method.

    The last step is shortened so the trajectory ends exactly at ``t_end``.
    """
    if not h > 0:
        raise ValueError(f"step size must be positive, got {h}")
    t0, t1 = problem.tspan
    span = t1 - t0
    # node times t0 + k*h, the last one snapped to t1
    nodes = t0 + h * np.arange(1, int(np.floor(span / h)) + 1)
    nodes = nodes[nodes < t1 - 1e-12 * span]
    nodes = np.append(nodes, t1)
    t = t0
    y = problem.y0.copy()
    ts, ys, fs = [t], [y], [problem.f(t, y)]
    step = 0
    for t_next in nodes:
        hk = t_next - t
        k1 = fs[-1]
        k2 = problem.f(t + hk, y + hk * k1)
        y = y + 0.5 * hk * (k1 + k2)
        step += 1
        if not np.all(np.isfinite(y)):
            raise IntegrationError(f"non-finite state at Heun step {step} (t={t_next})")
        t = t_next
        ts.append(t)
        ys.append(y)
        fs.append(problem.f(t, y))
    return Trajectory(np.array(ts), np.array(ys), np.array(fs))


def _dp_step(f, t, y, h, k1):
    """One Dormand-Prince step; returns (y5, error vector, k7 = f(t+h, y5))."""
    ks = [k1]
    for i in range(1, 7):
        a = DP_A[i]
        yi = y.copy()
        for j, aij in enumerate(a):
            if aij != 0.0:
                yi += h * aij * ks[j]
        ks.append(f(t + DP_C[i] * h, yi))
    y5 = y.copy()
    for j in range(6):
        if DP_B5[j] != 0.0:
            y5 += h * DP_B5[j] * ks[j]
    err = h * sum(DP_E[j] * ks[j] for j in range(7) if DP_E[j] != 0.0)
    return y5, err, ks[6]


def _initial_step(f, t0, y0, f0, rtol, atol, span):
    scale = atol + rtol * np.abs(y0)
    d0 = np.max(np.abs(y0) / scale)
    d1 = np.max(np.abs(f0) / scale)
    h0 = 1e-6 if (d0 < 1e-5 or d1 < 1e-5) else 0.01 * d0 / d1
    h0 = min(h0, span)
    y1 = y0 + h0 * f0
    f1 = f(t0 + h0, y1)
    d2 = np.max(np.abs(f1 - f0) / scale) / h0
    if max(d1, d2) <= 1e-15:
        h1 = max(1e-6, h0 * 1e-3)
    else:
        h1 = (0.01 / max(d1, d2)) ** (1 / 5)
    return min(100 * h0, h1, span)


def integrate_rk54(
    problem: IvpProblem,
    rtol: float = 1e-8,
    atol: float = 1e-10,
    *,
    h0: Optional[float] = None,
    max_step: Optional[float] = None,
    max_steps: int = 100_000,
    stop_on_error: bool = False,
) -> Trajectory:
    """Adaptive Dormand-Prince 5(4) integration with PI step control.

    A step is accepted when every component satisfies
    ``|err_i| <= atol + rtol * max(|y_i|, |y_new_i|)``. When ``problem.event``
    is set, a sign change across an accepted step is located by bracketed
    root finding on genuine RK steps (not the interpolant) until
    ``|event| <= 1e-10``, and integration stops there.

    Parameters
    ----------
    stop_on_error : bool
        If true, an exception raised by the right-hand side ends the
        integration at the last accepted node and is recorded in
        ``Trajectory.failure`` instead of propagating.
    """
    if not (rtol > 0 and atol > 0):
        raise ValueError("rtol and atol must be positive")
    t0, t_end = problem.tspan
    span = t_end - t0
    h_min = 1e-14 * span
    h_max = span if max_step is None else min(max_step, span)
    f = problem.f
    event = problem.event

    t = t0
    y = problem.y0.copy()
    try:
        k1 = f(t, y)
    except Exception as exc:  # noqa: BLE001
        if stop_on_error:
            return Trajectory(np.array([t]), y[None, :], np.full((1, y.size), np.nan),
                              failure=f"{type(exc).__name__}: {exc}")
        raise
    ts, ys, fs, errs = [t], [y], [k1], []
    e_prev = event(t, y) if event is not None else None

    h = h0 if h0 is not None else _initial_step(f, t, y, k1, rtol, atol, span)
    h = min(h, h_max)
    err_prev = 1.0
    n_rejected = 0
    failure = None
    hit_event = False
    event_time = None
    safety, alpha, beta = 0.9, 0.7 / 5, 0.4 / 5

    for _ in range(max_steps):
        if t >= t_end:
            break
        last = False
        if t + h >= t_end:
            h = t_end - t
            last = True
        try:
            y_new, err, k7 = _dp_step(f, t, y, h, k1)
        except Exception as exc:  # noqa: BLE001
            if stop_on_error:
                failure = f"{type(exc).__name__} at t={t:.6g}: {exc}"
                break
            raise
        scale = atol + rtol * np.maximum(np.abs(y), np.abs(y_new))
        err_norm = float(np.max(np.abs(err) / scale)) if err.size else 0.0
        if not np.isfinite(err_norm):
            err_norm = np.inf

        if err_norm <= 1.0:
            t_new = t_end if last else t + h
            if event is not None:
                e_new = event(t_new, y_new)
                if e_new == 0.0 or np.sign(e_new) != np.sign(e_prev):
                    tau, y_ev, k_ev = _locate_event(f, event, t, y, k1, h, e_prev, e_new, y_new, k7)
                    ts.append(t + tau)
                    ys.append(y_ev)
                    fs.append(k_ev)
                    errs.append(err_norm)
                    hit_event = True
                    event_time = t + tau
                    break
                e_prev = e_new
            t, y, k1 = t_new, y_new, k7
            ts.append(t)
            ys.append(y)
            fs.append(k1)
            errs.append(err_norm)
            if not np.all(np.isfinite(y)):
                raise IntegrationError(f"non-finite state at t={t}")
            fac = safety * max(err_norm, 1e-10) ** (-alpha) * err_prev**beta
            fac = min(5.0, max(0.2, fac))
            err_prev = max(err_norm, 1e-4)
            h = min(h * fac, h_max)
        else:
            n_rejected += 1
            fac = max(0.2, safety * err_norm ** (-1 / 5)) if np.isfinite(err_norm) else 0.2
            h = h * fac
            if h < h_min:
                raise IntegrationError(f"step size underflow at t={t:.17g} (h={h:.3g})")
    else:
        raise IntegrationError(f"maximum number of steps ({max_steps}) exceeded at t={t}")

    return Trajectory(
        ts=np.array(ts),
        ys=np.array(ys),
        fs=np.array(fs),
        terminated_by_event=hit_event,
        event_time=event_time,
        failure=failure,
        errors=np.array(errs),
        n_rejected=n_rejected,
    )


def _locate_event(f, event, t, y, k1, h, e_lo, e_hi, y_hi, k_hi, max_iter=200):
    """Find tau in (0, h] with |event(t + tau, step(tau))| <= EVENT_TOL.

    Illinois-modified regula falsi on a bracket that is always kept, so the
    iteration degrades to bisection rather than leaving the bracket.
    """
    lo, hi = 0.0, h
    f_lo, f_hi = e_lo, e_hi
    best = (h, y_hi, k_hi, e_hi)
    side = 0
    for _ in range(max_iter):
        if abs(best[3]) <= EVENT_TOL:
            break
        if f_hi != f_lo:
            tau = hi - f_hi * (hi - lo) / (f_hi - f_lo)
        else:
            tau = 0.5 * (lo + hi)
        if not (lo < tau < hi):
            tau = 0.5 * (lo + hi)
        y_tau, _, k_tau = _dp_step(f, t, y, tau, k1)
        e_tau = event(t + tau, y_tau)
        if abs(e_tau) < abs(best[3]) or abs(e_tau) <= EVENT_TOL:
            best = (tau, y_tau, k_tau, e_tau)
        if e_tau == 0.0:
            break
        if np.sign(e_tau) == np.sign(f_hi):
            hi, f_hi = tau, e_tau
            if side == -1:
                f_lo *= 0.5
            side = -1
        else:
            lo, f_lo = tau, e_tau
            if side == 1:
                f_hi *= 0.5
            side = 1
        if hi - lo <= 1e-15 * max(1.0, abs(t)):
            break
    tau, y_tau, k_tau, _ = best
    return tau, y_tau, k_tau


_A_DENSE = np.zeros((7, 7))
for _i, _row in enumerate(DP_A):
    _A_DENSE[_i, : len(_row)] = _row


def integrate_fixed_dp5(kernel, y0, params, times, h_max):
    """Propagate with fixed-size 5th-order Dormand-Prince steps from t=0.

    Every interval between consecutive output times is split into equal
    steps no longer than ``h_max``. The step sequence depends only on
    ``times``, so the result is a smooth function of ``params``; finite
    differences with respect to parameters stay well behaved.

    ``kernel`` is a compiled stepping loop
    ``(y0, params, times, h_max, a, c, b) -> states`` for one right-hand
    side, taking the dense tableau ``a``, nodes ``c`` and weights ``b``. The
    right-hand side is bound inside the kernel rather than passed in, which
    keeps numba's on-disk cache usable.

    ``params`` has shape ``(B, P)``: one parameter row per solve. Returns an
    array of shape ``(B, len(times), len(y0))``.
    """
    times = np.ascontiguousarray(times, dtype=float)
    if times.size and (times[0] < 0 or np.any(times[1:] <= times[:-1])):
        raise ValueError("times must be non-negative and strictly increasing")
    params = np.ascontiguousarray(np.atleast_2d(params), dtype=float)
    out = kernel(
        np.ascontiguousarray(y0, dtype=float), params, times, float(h_max), _A_DENSE, DP_C, DP_B5
    )
    finite = np.isfinite(out)
    if not finite.all():
        b, j = np.argwhere(~finite)[0][:2]
        raise IntegrationError(f"non-finite state at t={times[j]} (parameters {params[b].tolist()})")
    return out
