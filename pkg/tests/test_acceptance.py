"""Acceptance criteria, one test each, at their stated tolerances.

Run ``pytest tests/test_acceptance.py`` to get one PASS/FAIL line per
criterion in the terminal summary.
"""

import json
import math
import time

import mpmath
import numpy as np
import pytest
from scipy.optimize import brentq
from scipy.stats import chi2

from infogeo.cli import main
from infogeo.config import bundled_configs, load_config
from infogeo.geometry import (
    Design,
    MetricField,
    curve_length,
    fisher_metric,
    geodesic_fan,
    scalar_curvature,
    tensors_at,
)
from infogeo.gridscan import Axis, curvature_grid
from infogeo.likelihood import log_likelihood, mle, trace_confidence_contour
from infogeo.models import ModelSpec, model_jacobian, solve_forward
from infogeo.synth import SynthConfig, generate

CONFIGS = bundled_configs()
DELTA = chi2.ppf(0.95, 2)  # independent oracle for the chi-squared quantile
UNI = ModelSpec("univariate-normal", {}, ("mu", "sigma"))
MVN = ModelSpec("multivariate-normal-2d", {"sigma": 0.3}, ("mu1", "mu2"))


class Timer:
    def __enter__(self):
        self.t0 = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.elapsed = time.perf_counter() - self.t0


def fitted(name, seed=None):
    cfg = load_config(CONFIGS[name])
    data = generate(cfg.synth(seed))
    res = mle(cfg.spec, data, start=cfg.start_point(), bounds=cfg.box_array(), multistart=cfg.multistart)
    return cfg, data, res


@pytest.mark.criterion(1, "univariate-normal curvature is -1/N on a 20x20 grid")
def test_univariate_curvature_constant():
    with Timer() as t:
        grid = curvature_grid((UNI, Design([0.0], 10, ("x",))), {"mu": [0.2, 1.2], "sigma": [0.2, 1.2]}, 20)
    assert grid.values.shape == (20, 20)
    assert np.max(np.abs(grid.values - (-0.1))) <= 1e-3
    assert t.elapsed < 10


@pytest.mark.criterion(2, "mvn-means manifold is flat on a 20x20 grid")
def test_mvn_flat():
    metric = MetricField.from_model(MVN, Design([0.0], 10, ("x", "y")))
    with Timer() as t:
        worst_sc = worst_riemann = 0.0
        for mu2 in Axis("mu2", 0.8, 1.6, 20).values:
            for mu1 in Axis("mu1", 0.4, 1.2, 20).values:
                tens = tensors_at(metric, [mu1, mu2])
                worst_sc = max(worst_sc, abs(tens.scalar))
                worst_riemann = max(worst_riemann, float(np.max(np.abs(tens.riemann1))))
    assert worst_sc <= 1e-6
    assert worst_riemann <= 1e-8
    assert t.elapsed < 10


@pytest.mark.criterion(3, "mvn-means contour and geodesic endpoints lie on the oracle circle")
def test_mvn_contour_and_geodesics():
    cfg, data, res = fitted("mvn-means")
    radius = 0.3 * math.sqrt(DELTA / 10)
    center = res.theta_hat.values
    contour = trace_confidence_contour(cfg.spec, data, res, 0.95, cfg.box_array())
    assert contour.closed
    dev = np.abs(np.linalg.norm(contour.points - center, axis=1) - radius)
    assert np.max(dev) <= 1e-3 * radius
    metric = MetricField.from_model(cfg.spec, Design.from_dataset(data))
    curves = geodesic_fan(metric, center, math.sqrt(DELTA), n=20)
    assert len(curves) == 20
    for c in curves:
        assert not c.truncated
        assert abs(np.linalg.norm(c.endpoint - center) - radius) <= 1e-3 * radius


GEODESIC_CONFIGS = sorted(n for n in CONFIGS if n.startswith(("logistic", "linear", "exponential", "sir")))


@pytest.mark.criterion(4, "geodesics are unit speed with length sqrt(Delta)")
def test_geodesic_invariants():
    target = math.sqrt(DELTA)
    checked = 0
    for name in GEODESIC_CONFIGS:
        cfg, data, res = fitted(name)
        metric = MetricField.from_model(cfg.spec, Design.from_dataset(data))
        for c in geodesic_fan(metric, res.theta_hat, target, n=cfg.geodesics):
            speed = np.array([v @ metric(x) @ v for x, v in zip(c.params, c.velocities)])
            assert np.max(np.abs(speed - 1)) <= 1e-6, (name, c.angle)
            assert abs(curve_length(metric, c) - target) <= 1e-5, (name, c.angle)
            checked += 1
    assert checked == 20 * len(GEODESIC_CONFIGS)


@pytest.mark.criterion(5, "curvature scales as 1/N on the logistic high-curvature grid")
def test_curvature_scaling_law():
    cfg = load_config(CONFIGS["logistic-high-curvature"])
    box = cfg.box_array()
    assert np.array_equal(cfg.design.counts, [10, 10, 10])
    m10 = MetricField.from_model(cfg.spec, cfg.design)
    m50 = MetricField.from_model(cfg.spec, cfg.design.scaled(5))
    # Ten nodes of the configured grid next to the truth node.
    r_axis = Axis("r", *box[0], cfg.resolution).values
    c_axis = Axis("C0", *box[1], cfg.resolution).values
    i0 = int(np.argmin(np.abs(r_axis - cfg.truth["r"])))
    j0 = int(np.argmin(np.abs(c_axis - cfg.truth["C0"])))
    nodes = [(r_axis[i], c_axis[j]) for i in range(i0 - 2, i0 + 3) for j in (j0, j0 + 1)]
    assert len(nodes) == 10
    for node in nodes:
        sc10 = scalar_curvature(m10, node)
        assert scalar_curvature(m50, node) == pytest.approx(10 / 50 * sc10, rel=1e-4)
    assert scalar_curvature(m10, cfg.truth_point) < 0


# Closed-form means in 40-digit arithmetic, so the finite-difference oracle
# carries no float64 roundoff into small Jacobian entries.
MP_MEANS = {
    "linear": lambda p, t: [p["a"] * t + p["C0"]],
    "exponential": lambda p, t: [p["C0"] * mpmath.exp(p["a"] * t)],
    "logistic": lambda p, t: [p["C0"] * p["K"] / (p["C0"] + (p["K"] - p["C0"]) * mpmath.exp(-p["r"] * t))],
    "univariate-normal": lambda p, t: [p["mu"]],
    "multivariate-normal-2d": lambda p, t: [p["mu1"], p["mu2"]],
}


def _jacobian_fd(spec, theta, times, rel=1e-6):
    mean = MP_MEANS[spec.family]

    def outputs(x):
        p = {k: mpmath.mpf(v) for k, v in spec.fixed.items()}
        p.update({k: v for k, v in zip(spec.inferred, x)})
        out = [m for t in times for m in mean(p, mpmath.mpf(t))]
        if "sigma" in spec.inferred:
            out.append(p["sigma"])
        return out

    with mpmath.workdps(40):
        x = [mpmath.mpf(float(v)) for v in theta]
        cols = []
        for i in range(2):
            h = rel * abs(x[i])
            up, dn = list(x), list(x)
            up[i] += h
            dn[i] -= h
            cols.append([float((a - b) / (2 * h)) for a, b in zip(outputs(up), outputs(dn))])
    return np.array(cols).T


JACOBIAN_CASES = {
    "linear": (ModelSpec("linear", {"sigma": 0.2301}, ("a", "C0")), [0.1, 0.25, 0.5], [[0.2, 2.0], [0.4, 1.2]]),
    "exponential": (ModelSpec("exponential", {"sigma": 0.2301}, ("a", "C0")), [0.1, 0.25, 0.5], [[0.2, 2.0], [0.4, 1.2]]),
    "logistic": (
        ModelSpec("logistic", {"K": 79.74, "sigma": 2.301}, ("r", "C0")), [2.74, 6.84, 10.95], [[0.3, 2.0], [0.01, 3.0]]
    ),
    "logistic (r, K)": (
        ModelSpec("logistic", {"C0": 0.7237, "sigma": 2.301}, ("r", "K")), [2.74, 6.84, 10.95], [[0.3, 2.0], [40.0, 120.0]]
    ),
    "univariate-normal": (UNI, [0.0], [[-1.0, 2.0], [0.2, 1.2]]),
    "multivariate-normal-2d": (MVN, [0.0], [[-1.0, 2.0], [-1.0, 2.0]]),
}


@pytest.mark.criterion(6, "analytic Jacobians match central differences")
def test_jacobians():
    rng = np.random.default_rng(6)
    with Timer() as t:
        for name, (spec, times, box) in JACOBIAN_CASES.items():
            box = np.asarray(box)
            for theta in rng.uniform(box[:, 0], box[:, 1], size=(20, 2)):
                J = model_jacobian(spec, theta, times)
                fd = _jacobian_fd(spec, theta, times)
                # Elementwise relative error; structural zeros must be exact.
                assert np.all(np.abs(J - fd) <= 1e-5 * np.abs(J)), (name, theta)
    assert t.elapsed < 5


@pytest.mark.criterion(7, "Monte Carlo score variance matches the Fisher metric")
def test_fisher_definition():
    mu, sigma, N = 0.7, 0.5, 10
    with Timer() as t:
        data = generate(SynthConfig(UNI, {"mu": mu, "sigma": sigma}, [0.0], 100_000, 7))
        x = data.observations[0][:, 0]
        score = np.column_stack([(x - mu) / sigma**2, -1 / sigma + (x - mu) ** 2 / sigma**3])
        mc = N * np.cov(score, rowvar=False)
        G = fisher_metric(UNI, Design([0.0], N, ("x",)), [mu, sigma])
    for i in range(2):
        for j in range(2):
            # Off-diagonal entries vanish; measure them on the diagonal scale.
            scale = G[i, j] if i == j else math.sqrt(G[i, i] * G[j, j])
            assert abs(mc[i, j] - G[i, j]) <= 0.05 * scale
    assert t.elapsed < 10


@pytest.mark.criterion(8, "Wilks coverage of the 95% region for mvn-means")
def test_wilks_coverage():
    cfg = load_config(CONFIGS["mvn-means"])
    truth = cfg.truth_point.values
    with Timer() as t:
        covered = 0
        for seed in range(500):
            data = generate(cfg.synth(seed))
            res = mle(cfg.spec, data, start=truth)
            covered += log_likelihood(cfg.spec, truth, data) - res.loglik_at_mle >= -DELTA / 2
    assert 0.93 <= covered / 500 <= 0.97
    assert t.elapsed < 60


@pytest.mark.criterion(9, "open region for mid-late logistic, closed for early-mid-late")
def test_identifiability(tmp_path):
    flags = {}
    for name in ("logistic-mid-late", "logistic-early-mid-late"):
        out = tmp_path / name
        for cmd in ("simulate", "fit", "region"):
            assert main([cmd, "--config", str(CONFIGS[name]), "--out", str(out)]) == 0
        flags[name] = json.loads((out / "summary.json").read_text())
    assert flags["logistic-mid-late"]["open_region"] is True
    assert flags["logistic-early-mid-late"]["closed"] is True
    assert flags["logistic-early-mid-late"]["open_region"] is False


@pytest.mark.criterion(10, "SIR conserves population and meets the final-size relation")
def test_sir_conservation():
    beta, gamma = 1.6633, 0.44036
    spec = ModelSpec("sir", {"sigma": 0.05}, ("beta", "gamma"), ("S", "I", "R"))
    with Timer() as t:
        times = np.linspace(0.5, 50.0, 100)
        means = solve_forward(spec, [beta, gamma], times).means
        s0 = spec.initial_conditions["S0"]
        R0 = beta / gamma
        s_inf = brentq(lambda s: math.log(s / s0) - R0 * (s - 1.0), 1e-12, 1 / R0)
    assert np.max(np.abs(means.sum(axis=1) - 1)) <= 1e-9
    assert abs(means[-1, 0] - s_inf) <= 1e-3
    assert t.elapsed < 5


@pytest.mark.criterion(11, "SIR infected-only curvature is positive at the truth")
def test_sir_curvature_sign():
    cfg = load_config(CONFIGS["sir-infected-only"])
    assert list(cfg.times) == [4, 7, 10] and cfg.spec.fixed["sigma"] == 0.05
    metric = MetricField.from_model(cfg.spec, cfg.design)
    assert scalar_curvature(metric, [1.6633, 0.44036]) > 0


def _pipeline(config, out):
    for cmd in ("simulate", "fit", "region", "geodesics", "curvature", "loglik", "render"):
        assert main([cmd, "--config", str(config), "--out", str(out), "--resolution", "10"]) == 0
    return {p.name: p.read_bytes() for p in sorted(out.iterdir()) if p.suffix in (".csv", ".json", ".svg")}


@pytest.mark.criterion(12, "bundled pipelines are byte-for-byte reproducible")
def test_determinism(tmp_path):
    for name in sorted(CONFIGS):
        first = _pipeline(CONFIGS[name], tmp_path / name / "a")
        second = _pipeline(CONFIGS[name], tmp_path / name / "b")
        assert set(first) >= {"data.csv", "mle.json", "region.csv", "summary.json", "geodesics.csv",
                              "curvature.csv", "loglik.csv"}
        assert first == second, name
