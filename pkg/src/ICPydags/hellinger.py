import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree
from scipy.special import gammaln

from ICPydags.utils import check_matrix

logger = logging.getLogger(__name__)

ESTIMATORS = ("auto", "histogram", "knn")


@dataclass(frozen=True)
class HellingerEstimate:
    """A Hellinger distance in [0, 1] with the estimator and settings that produced it."""

    value: float
    estimator: str
    settings: dict = field(default_factory=dict)


def hellinger(sample_p, sample_q, estimator: str = "auto", bins: int = 30, k: int = 5) -> HellingerEstimate:
    """
    Estimate the Hellinger distance between the densities behind two sample sets.

    The histogram estimator counts both samples on a shared lattice of `bins` cells per dimension over
    their joint bounding box and returns sqrt(sum_b (sqrt(p_b) - sqrt(q_b))^2 / 2). The k-nearest
    neighbour estimator estimates the Bhattacharyya coefficient from k-th neighbour distance ratios
    with its small-sample bias correction, averaged over both directions. "auto" uses the histogram
    for up to three dimensions and k-NN above.

    Parameters
    ----------
    sample_p, sample_q : array-like or pl.DataFrame
        Samples, one row per point; one-dimensional input is a single column.
    estimator : str, optional
        "auto", "histogram" or "knn". Default is "auto".
    bins : int, optional
        Histogram cells per dimension. Default is 30.
    k : int, optional
        Neighbour rank of the k-NN estimator. Default is 5.

    Returns
    -------
    HellingerEstimate
        The estimate, clipped to [0, 1].

    Raises
    ------
    ValueError
        If the samples differ in dimension, are empty, or the settings are invalid.

    Examples
    --------
    >>> x = np.arange(10.0)
    >>> hellinger(x, x).value
    0.0
    """
    # Validate both samples and the estimator settings
    p = check_matrix(sample_p, "sample_p")
    q = check_matrix(sample_q, "sample_q")
    if p.shape[1] != q.shape[1]:
        raise ValueError(f"Samples have different dimensions: {p.shape[1]} and {q.shape[1]}.")
    if estimator not in ESTIMATORS:
        raise ValueError(f"Unknown estimator '{estimator}'. Supported estimators are {ESTIMATORS}.")
    # Histogram up to three dimensions, k-NN above
    if estimator == "auto":
        estimator = "histogram" if p.shape[1] <= 3 else "knn"

    if estimator == "histogram":
        if bins < 1:
            raise ValueError(f"'bins' must be at least 1, got {bins}.")
        value = _histogram_hellinger(p, q, bins)
        settings = {"bins": int(bins)}
    else:
        if k < 1 or k >= min(len(p), len(q)):
            raise ValueError(f"'k' must lie in [1, min sample size), got {k}.")
        value = _knn_hellinger(p, q, k)
        settings = {"k": int(k)}

    logger.debug("Hellinger distance %.6f (%s, %s)", value, estimator, settings)
    return HellingerEstimate(value=value, estimator=estimator, settings=settings)


def _histogram_hellinger(p: np.ndarray, q: np.ndarray, bins: int) -> float:
    # Shared lattice over the union bounding box
    lower = np.minimum(p.min(axis=0), q.min(axis=0))
    upper = np.maximum(p.max(axis=0), q.max(axis=0))
    flat = upper == lower
    lower, upper = np.where(flat, lower - 0.5, lower), np.where(flat, upper + 0.5, upper)
    edges = [np.linspace(lo, hi, bins + 1) for lo, hi in zip(lower, upper)]

    # Cell frequencies of both samples
    p_hist = np.histogramdd(p, bins=edges)[0] / len(p)
    q_hist = np.histogramdd(q, bins=edges)[0] / len(q)
    squared = 0.5 * np.sum((np.sqrt(p_hist) - np.sqrt(q_hist)) ** 2)
    return math.sqrt(min(1.0, max(0.0, float(squared))))


def _knn_coefficient(x: np.ndarray, y: np.ndarray, k: int) -> float:
    # Bhattacharyya coefficient estimated at the points of x
    n, m, d = len(x), len(y), x.shape[1]
    rho = cKDTree(x).query(x, k=k + 1)[0][:, k]
    nu = cKDTree(y).query(x, k=k)[0]
    nu = nu[:, k - 1] if nu.ndim == 2 else nu
    # Distance ratios with the small-sample bias correction
    tiny = np.finfo(float).tiny
    ratio = np.maximum(rho, tiny) / np.maximum(nu, tiny)
    log_correction = 2 * gammaln(k) - gammaln(k - 0.5) - gammaln(k + 0.5)
    terms = math.sqrt((n - 1) / m) * ratio ** (d / 2)
    return float(np.exp(log_correction) * np.mean(terms))


def _knn_hellinger(p: np.ndarray, q: np.ndarray, k: int) -> float:
    coefficient = 0.5 * (_knn_coefficient(p, q, k) + _knn_coefficient(q, p, k))
    return math.sqrt(1.0 - min(1.0, max(0.0, coefficient)))
