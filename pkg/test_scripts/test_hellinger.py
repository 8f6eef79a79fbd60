import math

import numpy as np
import pytest

from ICPydags.hellinger import hellinger


def test_identical_samples():
    x = np.random.default_rng(0).normal(size=(500, 2))
    assert hellinger(x, x).value == 0.0


def test_disjoint_supports():
    rng = np.random.default_rng(1)
    estimate = hellinger(rng.uniform(0, 1, 300), rng.uniform(10, 11, 300))
    assert estimate.value == pytest.approx(1.0, abs=1e-12)
    assert estimate.estimator == "histogram"


def test_shifted_gaussians():
    rng = np.random.default_rng(2)
    p, q = rng.normal(0, 1, 20_000), rng.normal(1, 1, 20_000)
    expected = math.sqrt(1 - math.exp(-1 / 8))
    assert abs(hellinger(p, q, bins=30).value - expected) < 0.05


def test_symmetry():
    rng = np.random.default_rng(3)
    p, q = rng.normal(0, 1, (400, 2)), rng.normal(0.5, 1, (400, 2))
    assert hellinger(p, q).value == pytest.approx(hellinger(q, p).value, abs=1e-12)
    assert hellinger(p, q, estimator="knn").value == pytest.approx(hellinger(q, p, estimator="knn").value, abs=1e-12)


def test_knn_separates_shifted_samples():
    rng = np.random.default_rng(4)
    p = rng.normal(0, 1, (2000, 4))
    same = hellinger(p, rng.normal(0, 1, (2000, 4)))
    shifted = hellinger(p, rng.normal(2, 1, (2000, 4)))
    assert same.estimator == "knn" and same.settings == {"k": 5}
    assert 0.0 <= same.value < shifted.value <= 1.0


def test_invalid_inputs():
    x = np.zeros((10, 2))
    with pytest.raises(ValueError, match="different dimensions"):
        hellinger(x, np.zeros((10, 3)))
    with pytest.raises(ValueError):
        hellinger(x, x, estimator="kde")
    with pytest.raises(ValueError):
        hellinger(x, x, bins=0)
    with pytest.raises(ValueError):
        hellinger(x, x, estimator="knn", k=10)
    with pytest.raises(ValueError):
        hellinger(np.empty((0, 2)), x)
