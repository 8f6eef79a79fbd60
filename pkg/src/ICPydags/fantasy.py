import logging
import math
from typing import Sequence

import numpy as np
from scipy.special import expit

from ICPydags.dataset import Dataset
from ICPydags.ordered_dag import OrderedDag
from ICPydags.run_chain import ChainSample

logger = logging.getLogger(__name__)


def _ancestral_sample(sample: ChainSample, n: int, rng: np.random.Generator) -> np.ndarray:
    # Draws n points from one posterior network, returned in raw data units
    params = sample.params
    if not params or "rescale" not in params:
        raise ValueError(f"Sample at iteration {sample.iter} carries no network parameters.")
    dag = OrderedDag.from_record(sample.graph)
    weights = {(k, i): w for k, i, w in params["weights"]}
    biases = {i: b for i, b in params["biases"]}
    precisions = {i: r for i, r in params["precisions"]}

    outputs = {}
    for i in sorted(dag.node_ids(), key=lambda k: (-dag.theta(k), k)):
        mean = np.full(n, biases[i])
        for k in sorted(dag.parents(i)):
            mean = mean + weights[(k, i)] * outputs[k]
        outputs[i] = expit(rng.normal(mean, 1.0 / math.sqrt(precisions[i])))

    rescale = Dataset.from_rescale_record(params["rescale"])
    unit = np.column_stack([outputs[k] for k in sorted(dag.observed)])
    return rescale.inverse(unit)


def fantasy(samples: Sequence[ChainSample], n_points: int, rng: np.random.Generator) -> Dataset:
    """
    Generate data from the posterior predictive of a fitted sigmoid network.

    For every point a posterior sample is picked uniformly, then the unit outputs are drawn top-down in
    descending order value and the observed outputs are mapped back to data units.

    Parameters
    ----------
    samples : Sequence[ChainSample]
        Posterior samples carrying network parameters (as written by `fit_nlgbn`).
    n_points : int
        Number of points to generate.
    rng : np.random.Generator
        Random stream.

    Returns
    -------
    Dataset
        The generated points; `.raw` holds them in data units.

    Raises
    ------
    ValueError
        If `samples` is empty, a sample has no network parameters, or `n_points` < 1.
    """
    samples = list(samples)
    if not samples:
        raise ValueError("At least one posterior sample is required.")
    if n_points < 1:
        raise ValueError(f"'n_points' must be at least 1, got {n_points}.")

    choice = rng.integers(len(samples), size=n_points)
    points = None
    for j in np.unique(choice):
        rows = np.flatnonzero(choice == j)
        drawn = _ancestral_sample(samples[j], len(rows), rng)
        if points is None:
            points = np.empty((n_points, drawn.shape[1]))
        elif drawn.shape[1] != points.shape[1]:
            raise ValueError("Posterior samples disagree on the number of observed variables.")
        points[rows] = drawn

    logger.info("Generated %d fantasy points from %d posterior samples", n_points, len(samples))
    # Keep the fitted data map so .raw returns the generated points unchanged
    generated = Dataset.from_rescale_record(samples[0].params["rescale"])
    generated.rows = generated.rescale(points)
    return generated
