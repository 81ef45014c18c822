"""Scalar fields over rectangular two-parameter grids.

Grid coordinates are ``lo + (hi - lo) * (i / (n - 1))``. Because ``i / (n - 1)``
is a correctly rounded quotient, two grids on the same box share a node
bitwise whenever the exact ratios agree; e.g. every node of a 25-point axis
reappears on a 97-point axis. Each cell is a pure function of its
coordinates, so values do not depend on evaluation order or on ``n_jobs``.
"""

from __future__ import annotations

import io
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from ._validation import check_box, check_resolution
from .exceptions import InfogeoError
from .geometry import Design, MetricField, tensors_at
from .likelihood import Dataset, MleResult, log_likelihood
from .models import ModelSpec

__all__ = [
    "Axis",
    "ScalarGrid",
    "evaluate_grid",
    "loglik_grid",
    "curvature_grid",
    "colocated_indices",
]

CSV_HEADER = "theta1,theta2,value"
_CELL_ERRORS = (InfogeoError, ArithmeticError, ValueError, np.linalg.LinAlgError)


@dataclass(frozen=True)
class Axis:
    """A uniformly spaced axis including both endpoints."""

    name: str
    lo: float
    hi: float
    n: int

    def __post_init__(self):
        if not (math.isfinite(self.lo) and math.isfinite(self.hi) and self.hi > self.lo):
            raise ValueError(f"axis {self.name}: need finite lo < hi, got ({self.lo}, {self.hi})")
        if int(self.n) < 2:
            raise ValueError(f"axis {self.name}: need at least 2 points")
        object.__setattr__(self, "lo", float(self.lo))
        object.__setattr__(self, "hi", float(self.hi))
        object.__setattr__(self, "n", int(self.n))

    @property
    def values(self):
        return self.lo + (self.hi - self.lo) * (np.arange(self.n) / (self.n - 1))

    def to_dict(self):
        return {"name": self.name, "lo": self.lo, "hi": self.hi, "resolution": self.n}


@dataclass(frozen=True, eq=False)
class ScalarGrid:
    """Values of a scalar field on ``axis1 x axis2``.

    ``values[i2, i1]`` is the field at ``(axis1.values[i1], axis2.values[i2])``.
    Failed cells hold NaN and are listed in ``failures``.
    """

    axis1: Axis
    axis2: Axis
    values: np.ndarray
    failures: tuple = field(default=())
    quantity: str = ""

    def to_csv(self, path=None):
        """``theta1,theta2,value`` rows, ``theta1`` varying fastest."""
        buf = io.StringIO()
        buf.write(CSV_HEADER + "\n")
        x1, x2 = self.axis1.values, self.axis2.values
        for i2 in range(self.axis2.n):
            for i1 in range(self.axis1.n):
                v = self.values[i2, i1]
                text = "NaN" if math.isnan(v) else repr(float(v))
                buf.write(f"{float(x1[i1])!r},{float(x2[i2])!r},{text}\n")
        return _emit(buf.getvalue(), path)

    def failures_json(self, path=None):
        doc = {
            "quantity": self.quantity,
            "axis1": self.axis1.to_dict(),
            "axis2": self.axis2.to_dict(),
            "failures": list(self.failures),
        }
        return _emit(json.dumps(doc, indent=2, sort_keys=True) + "\n", path)

    @classmethod
    def from_csv(cls, source, names=("theta1", "theta2"), quantity=""):
        """Rebuild a grid from :meth:`to_csv` output (a path or text)."""
        if isinstance(source, str) and "\n" in source:
            text = source
        else:
            with open(source, encoding="utf-8") as fh:
                text = fh.read()
        lines = text.strip("\n").split("\n")
        if lines[0] != CSV_HEADER:
            raise ValueError(f"expected header {CSV_HEADER!r}")
        data = np.array([[float(x) for x in ln.split(",")] for ln in lines[1:]])
        x1 = np.unique(data[:, 0])
        x2 = np.unique(data[:, 1])
        if data.shape[0] != x1.size * x2.size:
            raise ValueError("grid CSV is not a complete rectangular grid")
        values = data[:, 2].reshape(x2.size, x1.size)
        failures = tuple(
            {"i1": int(i1), "i2": int(i2), "reason": "NaN in input"}
            for i2, i1 in zip(*np.nonzero(np.isnan(values)))
        )
        return cls(
            Axis(names[0], x1[0], x1[-1], x1.size),
            Axis(names[1], x2[0], x2[-1], x2.size),
            values,
            failures,
            quantity,
        )


def _emit(text, path):
    if path is None:
        return text
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)
    return None


def _evaluate_cells(func, points):
    out = []
    for x in points:
        try:
            value = float(func(x))
            reason = None if math.isfinite(value) else "non-finite value"
        except _CELL_ERRORS as exc:
            value, reason = math.nan, f"{type(exc).__name__}: {exc}"
        out.append((value if reason is None else math.nan, reason))
    return out


def evaluate_grid(func, axis1: Axis, axis2: Axis, *, n_jobs=1, quantity="") -> ScalarGrid:
    """Evaluate ``func(theta)`` at every grid node.

    Cell errors (singular metric, solver failure, domain errors) are caught
    and recorded; the scan always completes. With ``n_jobs > 1`` rows are
    farmed out to worker processes, which requires a picklable ``func``.
    """
    x1, x2 = axis1.values, axis2.values
    rows = [[np.array([a, b]) for a in x1] for b in x2]
    if n_jobs is not None and int(n_jobs) > 1:
        with ProcessPoolExecutor(max_workers=int(n_jobs)) as pool:
            results = list(pool.map(_evaluate_cells, [func] * len(rows), rows))
    else:
        results = [_evaluate_cells(func, r) for r in rows]
    values = np.empty((axis2.n, axis1.n))
    failures = []
    for i2, row in enumerate(results):
        for i1, (value, reason) in enumerate(row):
            values[i2, i1] = value
            if reason is not None:
                failures.append(
                    {"i1": i1, "i2": i2, "theta1": float(x1[i1]), "theta2": float(x2[i2]),
                     "reason": reason}
                )
    return ScalarGrid(axis1, axis2, values, tuple(failures), quantity)


def _axes(spec, box, resolution):
    lo, hi = check_box(box, spec.inferred)
    bounds = spec.bounds()
    if np.any(lo < bounds[:, 0]) or np.any(hi > bounds[:, 1]):
        raise ValueError(f"grid box {np.column_stack([lo, hi]).tolist()} exceeds the parameter bounds")
    n1, n2 = check_resolution(resolution)
    return Axis(spec.inferred[0], lo[0], hi[0], n1), Axis(spec.inferred[1], lo[1], hi[1], n2)


@dataclass(frozen=True)
class _LoglikCell:
    spec: ModelSpec
    data: Dataset
    ll_hat: float

    def __call__(self, theta):
        return log_likelihood(self.spec, theta, self.data) - self.ll_hat


@dataclass(frozen=True)
class _CurvatureCell:
    spec: ModelSpec
    design: Design
    fd_step: float
    fd_floor: float

    def __call__(self, theta):
        metric = MetricField.from_model(self.spec, self.design, fd_step=self.fd_step, fd_floor=self.fd_floor)
        return tensors_at(metric, theta).scalar


@dataclass(frozen=True)
class _MetricCurvatureCell:
    metric: MetricField

    def __call__(self, theta):
        return tensors_at(self.metric, theta).scalar


def loglik_grid(spec, data, mle_result: MleResult, box, resolution=100, *, n_jobs=1) -> ScalarGrid:
    """Normalised log-likelihood ``l(theta) - l(theta_hat)`` on a grid over ``box``."""
    a1, a2 = _axes(spec, box, resolution)
    cell = _LoglikCell(spec, data, float(mle_result.loglik_at_mle))
    return evaluate_grid(cell, a1, a2, n_jobs=n_jobs, quantity="normalized_loglik")


def curvature_grid(source, box, resolution=100, *, n_jobs=1, fd_step=1e-4, fd_floor=1e-7) -> ScalarGrid:
    """Scalar curvature on a grid over ``box``.

    ``source`` is a ``(spec, design)`` pair or a :class:`MetricField`. Only
    the pair form can run in worker processes.
    """
    if isinstance(source, MetricField):
        n1, n2 = check_resolution(resolution)
        lo, hi = check_box(box, source.names)
        a1 = Axis(source.names[0], lo[0], hi[0], n1)
        a2 = Axis(source.names[1], lo[1], hi[1], n2)
        cell = _MetricCurvatureCell(source)
        n_jobs = 1
    else:
        spec, design = source
        a1, a2 = _axes(spec, box, resolution)
        cell = _CurvatureCell(spec, design, fd_step, fd_floor)
    return evaluate_grid(cell, a1, a2, n_jobs=n_jobs, quantity="scalar_curvature")


def colocated_indices(coarse: Axis, fine: Axis):
    """Index pairs ``(i_coarse, i_fine)`` of nodes with bitwise-equal coordinates."""
    fine_index = {float(v): k for k, v in enumerate(fine.values)}
    return [(i, fine_index[float(v)]) for i, v in enumerate(coarse.values) if float(v) in fine_index]
