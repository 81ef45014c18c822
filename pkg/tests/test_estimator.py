import math

import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from infogeo import InformationGeometryEstimator
from infogeo.likelihood import Dataset


@pytest.fixture(scope="module")
def normal_sample():
    return np.random.default_rng(11).normal(0.7, 0.5, size=40)


def long_format(x):
    return np.column_stack([np.zeros_like(x), x])


def test_params_round_trip():
    est = InformationGeometryEstimator(family="linear", inferred=("a", "C0"), fixed={"sigma": 0.2})
    params = est.get_params()
    assert params["family"] == "linear" and params["fixed"] == {"sigma": 0.2}
    twin = clone(est)
    assert twin.get_params() == params
    est.set_params(alpha=0.9)
    assert est.alpha == 0.9


def test_unfitted_raises():
    with pytest.raises(NotFittedError):
        InformationGeometryEstimator().predict([0.0])


def test_normal_fit_closed_form(normal_sample):
    est = InformationGeometryEstimator(bounds={"mu": (-2, 2), "sigma": (0.05, 3)}).fit(long_format(normal_sample))
    np.testing.assert_allclose(est.theta_, [normal_sample.mean(), normal_sample.std()], rtol=1e-6)
    assert est.predict([0.0, 0.0]) == pytest.approx([est.theta_[0]] * 2)


def test_input_forms_agree(normal_sample):
    a = InformationGeometryEstimator().fit(long_format(normal_sample))
    b = InformationGeometryEstimator().fit(np.zeros_like(normal_sample), normal_sample)
    c = InformationGeometryEstimator().fit(Dataset([0.0], [normal_sample], ("x",)))
    assert a.theta_.tobytes() == b.theta_.tobytes() == c.theta_.tobytes()


def test_score_is_mean_loglik(normal_sample):
    est = InformationGeometryEstimator().fit(long_format(normal_sample))
    mu, s = est.theta_
    expected = np.mean(-0.5 * math.log(2 * math.pi * s * s) - (normal_sample - mu) ** 2 / (2 * s * s))
    assert est.score(long_format(normal_sample)) == pytest.approx(expected, rel=1e-12)


def test_linear_predict_shape():
    t = np.repeat([0.1, 0.25, 0.5], 5)
    y = 0.9 * t + 0.7 + np.random.default_rng(0).normal(0, 0.01, t.size)
    est = InformationGeometryEstimator(
        family="linear", inferred=("a", "C0"), fixed={"sigma": 0.01},
        start={"a": 1.0, "C0": 1.0},
    ).fit(t, y)
    pred = est.predict(t)
    assert pred.shape == t.shape
    assert np.max(np.abs(pred - y)) < 0.05


def test_geometry_accessors(normal_sample):
    est = InformationGeometryEstimator().fit(long_format(normal_sample))
    s = est.theta_[1]
    np.testing.assert_allclose(est.fisher_information(), np.diag([40 / s**2, 80 / s**2]), rtol=1e-12)
    assert est.scalar_curvature() == pytest.approx(-1 / 40, abs=1e-4)
    region = est.confidence_region(box=[[0.2, 1.2], [0.2, 1.2]])
    assert region.closed
    curves = est.geodesics(n=4)
    assert len(curves) == 4
    assert all(c.lengths[-1] == pytest.approx(math.sqrt(5.991464547), abs=1e-6) for c in curves)


def test_wrong_column_count():
    est = InformationGeometryEstimator(
        family="sir", inferred=("beta", "gamma"), fixed={"sigma": 0.05}, species=("S", "I"),
    )
    with pytest.raises(ValueError, match="value columns"):
        est.fit(np.ones((4, 2)))


def test_dataset_with_y_rejected(normal_sample):
    with pytest.raises(ValueError):
        InformationGeometryEstimator().fit(Dataset([0.0], [normal_sample], ("x",)), normal_sample)
