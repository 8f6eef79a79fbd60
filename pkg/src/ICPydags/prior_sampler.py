import bisect
import logging
from collections import deque
from typing import Iterable, List, Optional, Sequence, Set, Tuple, Union

import numpy as np

from ICPydags.ordered_dag import Hyperparams, NodeKind, OrderedDag, count_stats
from ICPydags.utils import DegenerateOrderError, GraphError

logger = logging.getLogger(__name__)

# Placement marker for a star chef whose order value is drawn from U(0, 1)
RANDOM = "random"

StarTheta = Union[float, str, None]


def _processed_thetas(dag: OrderedDag, chef_id: int, processed: Optional[Iterable[int]]) -> List[float]:
    # By default every introduced chef other than the current one has finished its selections
    if processed is None:
        processed = (k for k in dag.node_ids() if k != chef_id)
    return sorted(dag.theta(k) for k in processed if k != chef_id)


def backward_proposal(
    dag: OrderedDag,
    star_id: int,
    hp: Hyperparams,
    rng: np.random.Generator,
    exact_backward: bool = False,
) -> List[Tuple[int, int]]:
    """
    Connect a newly placed star chef to a random subset of the chefs below it.

    The number of connections q is drawn from Binomial(down, phi / (alpha + phi)) where `down` counts
    the introduced chefs with a strictly lower order value, then a uniformly random q-subset of those
    chefs becomes children of the star.

    Parameters
    ----------
    dag : OrderedDag
        Graph under construction; modified in place.
    star_id : int
        Id of the observed node just placed.
    hp : Hyperparams
        The (alpha, gamma, phi) hyperparameters.
    rng : np.random.Generator
        Random stream of the draw.
    exact_backward : bool, optional
        Draw q from BetaBinomial(down, phi, alpha) instead, the count law of the observed-node factor
        of the density. Default is False.

    Returns
    -------
    List[Tuple[int, int]]
        The added (parent, child) edges.
    """
    if dag.kind(star_id) is not NodeKind.OBSERVED:
        raise GraphError(f"Node {star_id} is not an observed node.")
    theta_i = dag.theta(star_id)
    lower = sorted((k for k in dag.node_ids() if dag.theta(k) < theta_i), key=lambda k: (dag.theta(k), k))
    if not lower or hp.phi == 0:
        return []

    # Number of inspiration connections, then which ones
    if exact_backward:
        q = int(rng.binomial(len(lower), rng.beta(hp.phi, hp.alpha)))
    else:
        q = int(rng.binomial(len(lower), hp.phi / (hp.alpha + hp.phi)))
    chosen = rng.choice(len(lower), size=q, replace=False) if q else []
    edges = [(star_id, lower[j]) for j in sorted(chosen)]
    for parent, child in edges:
        dag.add_edge(parent, child)
    return edges


def select_existing(
    dag: OrderedDag,
    chef_id: int,
    hp: Hyperparams,
    rng: np.random.Generator,
    processed: Optional[Set[int]] = None,
) -> List[Tuple[int, int]]:
    """
    Let a chef pick inspirations among the already introduced chefs above it.

    Candidate k becomes a parent of the chef with probability
    (m_k + phi [k observed]) / (alpha + down_k - 1 + phi [k observed]), where down_k counts the
    processed chefs strictly below k plus the current chef.

    Parameters
    ----------
    processed : Set[int], optional
        Ids of chefs whose own selections are complete. Default treats every node except `chef_id`
        as processed.

    Raises
    ------
    RuntimeError
        If a Bernoulli parameter falls outside [0, 1], which means the counts are corrupted.
    """
    theta_i = dag.theta(chef_id)
    below = _processed_thetas(dag, chef_id, processed)
    candidates = sorted((k for k in dag.node_ids() if dag.theta(k) > theta_i), key=lambda k: (-dag.theta(k), k))
    if not candidates:
        return []

    probs = np.empty(len(candidates))
    for j, k in enumerate(candidates):
        boost = hp.phi if dag.kind(k) is NodeKind.OBSERVED else 0.0
        down_k = bisect.bisect_left(below, dag.theta(k)) + 1
        probs[j] = (len(dag.children(k)) + boost) / (hp.alpha + down_k - 1 + boost)
    if np.any(probs < 0) or np.any(probs > 1):
        raise RuntimeError(f"Inspiration probabilities {probs} outside [0, 1]; chef counts are corrupted.")

    draws = rng.random(len(candidates))
    edges = [(k, chef_id) for k, u, p in zip(candidates, draws, probs) if u < p]
    for parent, child in edges:
        dag.add_edge(parent, child)
    return edges


def select_new(
    dag: OrderedDag,
    chef_id: int,
    hp: Hyperparams,
    rng: np.random.Generator,
    processed: Optional[Set[int]] = None,
    ibp_restricted: bool = False,
) -> List[int]:
    """
    Create new hidden chefs inspiring the current chef, interval by interval above it.

    The intervals are delimited by the chef's own order value, the order values of every introduced
    chef above it and 1. Interval (lo, hi) receives Poisson((hi - lo) alpha gamma / (alpha + n_lo)) new
    chefs, with n_lo the number of processed chefs at or below lo. Each new chef is placed uniformly
    inside its interval and connected to the current chef.

    With `ibp_restricted` every new chef is placed at order value 1 and a single Poisson draw of rate
    alpha gamma / (alpha + n) is made, n being the number of processed chefs.

    Returns
    -------
    List[int]
        Ids of the created hidden chefs, in creation order.
    """
    theta_i = dag.theta(chef_id)
    below = _processed_thetas(dag, chef_id, processed)
    rate_scale = hp.alpha * hp.gamma
    created = []

    if ibp_restricted:
        n_new = int(rng.poisson(rate_scale / (hp.alpha + bisect.bisect_right(below, theta_i))))
        for _ in range(n_new):
            k = dag.add_node(1.0, NodeKind.HIDDEN)
            dag.add_edge(k, chef_id)
            created.append(k)
        return created

    # Intervals are fixed before any new chef is placed
    above = sorted(dag.theta(k) for k in dag.node_ids() if dag.theta(k) > theta_i)
    bounds = [theta_i] + above + [1.0]
    for lo, hi in zip(bounds[:-1], bounds[1:]):
        if hi <= lo:
            continue
        rate = (hi - lo) * rate_scale / (hp.alpha + bisect.bisect_right(below, lo))
        for _ in range(int(rng.poisson(rate))):
            k = _add_hidden_in(dag, lo, hi, rng)
            dag.add_edge(k, chef_id)
            created.append(k)
    return created


def _add_hidden_in(dag: OrderedDag, lo: float, hi: float, rng: np.random.Generator) -> int:
    # Redraw on the probability-zero events of hitting the open interval's boundary or a taken value
    while True:
        theta = rng.uniform(lo, hi)
        if not lo < theta < hi:
            continue
        try:
            return dag.add_node(theta, NodeKind.HIDDEN)
        except DegenerateOrderError:
            continue


def sample_prior(
    hp: Hyperparams,
    star_thetas: Sequence[StarTheta],
    rng: np.random.Generator,
    ibp_restricted: bool = False,
    exact_backward: bool = False,
    max_nodes: Optional[int] = None,
) -> OrderedDag:
    """
    Draw one graph from the prior by running the sequential chef process.

    Star chefs (observed nodes) enter one at a time. Each star first connects to chefs below it
    (backward proposal), then picks existing inspirations above it and creates new hidden chefs in the
    intervals above it. New hidden chefs are queued and processed the same way (without the backward
    step), first in first out, each batch in descending order value.

    Parameters
    ----------
    hp : Hyperparams
        The (alpha, gamma, phi) hyperparameters.
    star_thetas : Sequence[float | "random"]
        Order value of every star chef, in introduction order. Entries equal to "random" (or None)
        are drawn from U(0, 1).
    rng : np.random.Generator
        Random stream of the draw.
    ibp_restricted : bool, optional
        Place every star at order value 0 and every hidden chef at 1, which reduces the process to a
        two-parameter Indian Buffet Process. Default is False.
    exact_backward : bool, optional
        See `backward_proposal`. Default is False.
    max_nodes : int, optional
        Abort with a RuntimeError once the graph grows beyond this many nodes. Default is None (no limit).

    Returns
    -------
    OrderedDag
        The sampled graph; every hidden node has at least one child.

    Raises
    ------
    GraphError
        If `star_thetas` is empty.
    ValueError
        If a fixed order value lies outside [0, 1].

    Examples
    --------
    >>> rng = np.random.default_rng(0)
    >>> dag = sample_prior(Hyperparams(1.0, 1.0, 1.0), [0.0], rng)
    >>> sorted(dag.observed)
    [0]
    """
    star_thetas = list(star_thetas)
    if not star_thetas:
        raise GraphError("At least one star chef is required; the process is conditioned on observed nodes.")
    for theta in star_thetas:
        if theta is None or theta == RANDOM:
            continue
        if isinstance(theta, str) or not 0.0 <= float(theta) <= 1.0:
            raise ValueError(f"Star order values must lie in [0, 1] or be '{RANDOM}', got {theta!r}.")

    dag = OrderedDag()
    processed: Set[int] = set()

    for theta in star_thetas:
        if ibp_restricted:
            theta = 0.0
        elif theta is None or theta == RANDOM:
            theta = rng.uniform(0.0, 1.0)
        try:
            star = dag.add_node(float(theta), NodeKind.OBSERVED)
        except DegenerateOrderError as e:
            raise DegenerateOrderError(f"Star order value {theta!r} collides with an existing chef.") from e

        # Step one, stars only
        backward_proposal(dag, star, hp, rng, exact_backward=exact_backward)

        # Steps two and three for the star, then for every queued hidden chef
        queue = deque([[star]])
        while queue:
            batch = sorted(queue.popleft(), key=lambda k: (-dag.theta(k), k))
            new_batch = []
            for chef in batch:
                select_existing(dag, chef, hp, rng, processed=processed)
                created = select_new(dag, chef, hp, rng, processed=processed, ibp_restricted=ibp_restricted)
                processed.add(chef)
                # Hidden chefs at order value 1 have nothing left to select in the restricted mode
                if not ibp_restricted:
                    new_batch.extend(created)
                if max_nodes is not None and len(dag) > max_nodes:
                    raise RuntimeError(f"The sampled graph exceeded {max_nodes} nodes.")
            if new_batch:
                queue.append(new_batch)

    logger.debug("Sampled graph with %d nodes and %d edges", len(dag), dag.n_edges)
    return dag


def sample_prior_many(
    hp: Hyperparams,
    star_thetas: Sequence[StarTheta],
    draws: int,
    seed: int,
    **kwargs,
) -> List[OrderedDag]:
    """
    Draw `draws` independent graphs, one random stream per draw spawned from `seed`.

    Extra keyword arguments are passed to `sample_prior`.
    """
    if isinstance(draws, bool) or not isinstance(draws, (int, np.integer)) or draws < 0:
        raise ValueError(f"'draws' must be a nonnegative integer, got {draws!r}.")
    streams = np.random.SeedSequence(seed).spawn(int(draws))
    graphs = [sample_prior(hp, star_thetas, np.random.default_rng(s), **kwargs) for s in streams]
    if graphs:
        sizes = [count_stats(g).k_plus for g in graphs]
        logger.info("Drew %d prior graphs, mean active nodes %.3f", len(graphs), float(np.mean(sizes)))
    return graphs
