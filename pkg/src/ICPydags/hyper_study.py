import logging
import math
from concurrent.futures import ThreadPoolExecutor
from typing import Dict, Optional, Sequence, Tuple

import numpy as np
import polars as pl

from ICPydags.ordered_dag import Hyperparams, count_stats
from ICPydags.prior_sampler import sample_prior

logger = logging.getLogger(__name__)

STUDY_COLUMNS = ["alpha", "gamma", "k_plus_mean", "k_plus_se", "e_plus_mean", "e_plus_se"]


def _moments(values: np.ndarray) -> Tuple[float, float]:
    mean = float(np.mean(values))
    se = float(np.std(values, ddof=1) / math.sqrt(len(values))) if len(values) > 1 else math.nan
    return mean, se


def prior_summary(hp: Hyperparams, n_obs: int, draws: int, seed_seq: np.random.SeedSequence) -> Dict[str, float]:
    """
    Monte Carlo mean and standard error of K+ and E+ over `draws` prior graphs with `n_obs` observed
    nodes at order value 0.
    """
    if draws < 1:
        raise ValueError(f"'draws' must be at least 1, got {draws}.")

    # Draw every graph from one stream and keep its active counts
    k_plus = np.empty(draws)
    e_plus = np.empty(draws)
    rng = np.random.default_rng(seed_seq)
    for t in range(draws):
        stats = count_stats(sample_prior(hp, [0.0] * n_obs, rng))
        k_plus[t], e_plus[t] = stats.k_plus, stats.e_plus
    k_mean, k_se = _moments(k_plus)
    e_mean, e_se = _moments(e_plus)
    return {"k_plus_mean": k_mean, "k_plus_se": k_se, "e_plus_mean": e_mean, "e_plus_se": e_se}


def hyper_study(
    alphas: Sequence[float],
    gammas: Sequence[float],
    n_obs: int,
    draws: int,
    seed: int,
    phi: float = 1.0,
    max_workers: Optional[int] = None,
) -> pl.DataFrame:
    """
    Expected number of active nodes and edges of the prior over an (alpha, gamma) grid.

    Every grid point draws `draws` graphs with `n_obs` observed nodes at order value 0 from its own
    random stream spawned from `seed`, so the table does not depend on `max_workers`.

    Parameters
    ----------
    alphas, gammas : Sequence[float]
        Grid values; every combination is evaluated.
    n_obs : int
        Number of observed nodes.
    draws : int
        Monte Carlo draws per grid point.
    seed : int
        Base seed.
    phi : float, optional
        Observed-node popularity boost. Default is 1.0.
    max_workers : int, optional
        Threads used across grid points. Default is 1.

    Returns
    -------
    pl.DataFrame
        Columns alpha, gamma, k_plus_mean, k_plus_se, e_plus_mean, e_plus_se, one row per grid point
        in (alpha, gamma) order.
    """
    if n_obs < 1:
        raise ValueError(f"'n_obs' must be at least 1, got {n_obs}.")
    # One independent stream per grid point, in grid order
    grid = [(float(a), float(g)) for a in alphas for g in gammas]
    streams = np.random.SeedSequence(seed).spawn(len(grid))

    def one(job):
        (alpha, gamma), stream = job
        row = {"alpha": alpha, "gamma": gamma}
        row.update(prior_summary(Hyperparams(alpha, gamma, phi), n_obs, draws, stream))
        logger.info("alpha=%g gamma=%g: E[K+]=%.3f E[E+]=%.3f", alpha, gamma, row["k_plus_mean"], row["e_plus_mean"])
        return row

    # pool.map keeps the grid order whatever the number of workers
    with ThreadPoolExecutor(max_workers=max_workers or 1) as pool:
        rows = list(pool.map(one, zip(grid, streams)))
    return pl.DataFrame(rows, schema={c: pl.Float64 for c in STUDY_COLUMNS})


def complexity_study(
    alphas: Sequence[float],
    n_obs_values: Sequence[int],
    draws: int,
    seed: int,
    gamma: float = 1.0,
    phi: float = 1.0,
) -> pl.DataFrame:
    """
    Prior complexity as a function of the number of observed nodes at fixed gamma.

    Returns
    -------
    pl.DataFrame
        Columns alpha, n_obs, hidden_mean, hidden_se, e_plus_mean, e_plus_se.
    """
    # Grid over alpha and the number of observed nodes, one stream per point
    grid = [(float(a), int(n)) for a in alphas for n in n_obs_values]
    streams = np.random.SeedSequence(seed).spawn(len(grid))
    rows = []
    for (alpha, n_obs), stream in zip(grid, streams):
        summary = prior_summary(Hyperparams(alpha, gamma, phi), n_obs, draws, stream)
        rows.append({
            "alpha": alpha,
            "n_obs": n_obs,
            # Observed nodes are always active
            "hidden_mean": summary["k_plus_mean"] - n_obs,
            "hidden_se": summary["k_plus_se"],
            "e_plus_mean": summary["e_plus_mean"],
            "e_plus_se": summary["e_plus_se"],
        })
    return pl.DataFrame(rows)


def density_study(
    alphas: Sequence[float],
    target_k_plus: float,
    n_obs: int,
    draws: int,
    seed: int,
    phi: float = 1.0,
    gamma_bounds: Tuple[float, float] = (1e-3, 100.0),
    max_iter: int = 30,
    tol: float = 0.01,
) -> pl.DataFrame:
    """
    Expected edge count as a function of alpha at a fixed expected number of active nodes.

    For each alpha, gamma is found by bisection on log gamma so that the Monte Carlo E[K+] hits
    `target_k_plus`; every evaluation reuses the same random stream so E[K+] is a deterministic
    function of gamma.

    Returns
    -------
    pl.DataFrame
        Columns alpha, gamma, k_plus_mean, k_plus_se, e_plus_mean, e_plus_se.
    """
    if not target_k_plus > n_obs:
        raise ValueError(f"'target_k_plus' must exceed the number of observed nodes {n_obs}.")
    streams = np.random.SeedSequence(seed).spawn(len(alphas))
    rows = []
    for alpha, stream in zip(alphas, streams):
        # Bisection bracket on log gamma
        lo, hi = math.log(gamma_bounds[0]), math.log(gamma_bounds[1])
        summary, gamma = None, None
        for _ in range(max_iter):
            gamma = math.exp(0.5 * (lo + hi))
            summary = prior_summary(Hyperparams(float(alpha), gamma, phi), n_obs, draws, stream)
            # Stop once E[K+] is within the relative tolerance
            if abs(summary["k_plus_mean"] - target_k_plus) <= tol * target_k_plus:
                break
            if summary["k_plus_mean"] < target_k_plus:
                lo = math.log(gamma)
            else:
                hi = math.log(gamma)
        row = {"alpha": float(alpha), "gamma": gamma}
        row.update(summary)
        rows.append(row)
        logger.info("alpha=%g: gamma=%.4f gives E[K+]=%.3f, E[E+]=%.3f", alpha, gamma, row["k_plus_mean"], row["e_plus_mean"])
    return pl.DataFrame(rows, schema={c: pl.Float64 for c in STUDY_COLUMNS})
