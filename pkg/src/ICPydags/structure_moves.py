import bisect
import logging
import math
from typing import List, Optional, Set, Tuple, Union

import numpy as np

from ICPydags.chain_state import ChainState, MoveStats, TargetSpec
from ICPydags.distribution import log_prob_infinite, log_prob_ratio
from ICPydags.ordered_dag import (
    Hyperparams,
    NodeKind,
    OrderedDag,
    active_set,
    check_dag,
    count_stats,
    singleton_orphan_parents,
)
from ICPydags.utils import DegenerateOrderError

logger = logging.getLogger(__name__)

StateLike = Union[OrderedDag, ChainState]


def _as_state(state: StateLike, target: TargetSpec) -> Tuple[ChainState, bool]:
    # Plain graphs are wrapped for prior-only use and unwrapped again on return
    if isinstance(state, ChainState):
        return state, False
    if target.likelihood is not None:
        raise TypeError("A ChainState carrying the likelihood state is required when a likelihood hook is set.")
    return ChainState(dag=state, hp=target.hp, log_prior=log_prob_infinite(state, target.hp)), True


def _pick_active(dag: OrderedDag, rng: np.random.Generator, active: Optional[Set[int]] = None) -> int:
    ids = sorted(active if active is not None else active_set(dag))
    return ids[int(rng.integers(len(ids)))]


def _metropolis(
    state: ChainState,
    dag_new: OrderedDag,
    target: TargetSpec,
    rng: np.random.Generator,
    log_factor: float = 0.0,
    log_prior_diff: Optional[float] = None,
) -> Tuple[ChainState, bool, float]:
    """Accept or reject `dag_new` against `state`; returns the resulting state, the decision and log ratio."""
    if log_prior_diff is None:
        log_prior_diff = log_prob_ratio(dag_new, state.dag, state.hp)

    hook = target.likelihood
    aux_new, log_lik_new, log_q_fwd, log_q_rev = state.aux, 0.0, 0.0, 0.0
    if hook is not None and log_prior_diff > -math.inf and log_factor > -math.inf:
        aux_new, log_q_fwd, log_q_rev = hook.adapt(state.dag, dag_new, state.aux, rng)
        log_lik_new = hook.log_likelihood(dag_new, aux_new)

    if log_prior_diff == -math.inf or log_factor == -math.inf:
        log_ratio = -math.inf
    else:
        log_ratio = math.fsum([log_prior_diff, log_lik_new - state.log_lik, -log_q_fwd, log_q_rev, log_factor])

    # One uniform per proposal keeps the random stream aligned across runs
    u = rng.random()
    accepted = log_ratio >= 0 or (log_ratio > -math.inf and u < math.exp(log_ratio))
    if not accepted:
        return state, False, log_ratio
    if target.debug:
        check_dag(dag_new, require_active=True)
    new_state = ChainState(
        dag=dag_new,
        hp=state.hp,
        aux=aux_new,
        log_prior=log_prob_infinite(dag_new, state.hp),
        log_lik=log_lik_new if hook is not None else 0.0,
    )
    return new_state, True, log_ratio


def _m_excluding(dag: OrderedDag, k: int, i: int, active: Set[int]) -> int:
    return sum(1 for c in dag.children(k) if c in active and c != i)


def gibbs_candidates(dag: OrderedDag, i: int, active: Optional[Set[int]] = None) -> List[int]:
    """
    Parents considered when resampling the incoming edges of `i`.

    These are the active nodes above `i` that are observed or keep another active child besides `i`,
    ordered by descending order value.
    """
    if active is None:
        active = active_set(dag)
    theta_i = dag.theta(i)
    candidates = [
        k for k in active
        if dag.theta(k) > theta_i and (dag.kind(k) is NodeKind.OBSERVED or _m_excluding(dag, k, i, active) >= 1)
    ]
    return sorted(candidates, key=lambda k: (-dag.theta(k), k))


def gibbs_edge_probability(dag: OrderedDag, k: int, i: int, hp: Hyperparams, active: Optional[Set[int]] = None) -> float:
    """
    Prior conditional probability of the edge k -> i given the rest of the active graph.

    Equals (m_k + phi [k observed]) / (alpha + down_k - 1 + phi [k observed]) with m_k counted
    without the edge to `i`. Order-violating edges have probability 0.

    Examples
    --------
    >>> dag = OrderedDag.from_parts([(0, 0.0, "obs"), (1, 0.2, "obs"), (2, 0.5, "hid")], [(2, 0)])
    >>> gibbs_edge_probability(dag, 2, 1, Hyperparams(1.0, 1.0, 1.0))
    0.5
    """
    if active is None:
        active = active_set(dag)
    if not dag.theta(k) > dag.theta(i):
        return 0.0
    down_k = bisect.bisect_left(sorted(dag.theta(j) for j in active), dag.theta(k))
    boost = hp.phi if dag.kind(k) is NodeKind.OBSERVED else 0.0
    return (_m_excluding(dag, k, i, active) + boost) / (hp.alpha + down_k - 1 + boost)


def gibbs_edges(
    state: StateLike,
    target: TargetSpec,
    rng: np.random.Generator,
    i: Optional[int] = None,
    stats: Optional[MoveStats] = None,
) -> StateLike:
    """
    Resample every candidate incoming edge of one uniformly chosen active node.

    Without a likelihood each edge is drawn from its prior conditional. With a likelihood hook each
    edge is flipped with a Metropolis step whose prior part is the conditional odds.

    Parameters
    ----------
    state : OrderedDag or ChainState
        Current state; a plain graph is only accepted for prior-only targets.
    target : TargetSpec
        Target of the chain.
    rng : np.random.Generator
        Random stream of the chain.
    i : int, optional
        Node whose parents are resampled. Default draws it uniformly among active nodes.
    stats : MoveStats, optional
        Counter receiving one "gibbs" record per candidate edge.

    Returns
    -------
    OrderedDag or ChainState
        The updated state, of the same type as `state`.
    """
    state, unwrap = _as_state(state, target)
    dag = state.dag
    active = active_set(dag)
    if i is None:
        i = _pick_active(dag, rng, active)

    candidates = gibbs_candidates(dag, i, active)
    if target.likelihood is None:
        # Exact draws from the prior conditional of each edge
        new_dag = dag.copy()
        changed = False
        for k in candidates:
            p = gibbs_edge_probability(new_dag, k, i, state.hp, active)
            has_edge = new_dag.has_edge(k, i)
            want_edge = bool(rng.random() < p)
            if want_edge != has_edge:
                (new_dag.add_edge if want_edge else new_dag.remove_edge)(k, i)
                changed = True
            if stats is not None:
                stats.record("gibbs", want_edge != has_edge)
        if changed:
            if target.debug:
                check_dag(new_dag, require_active=True)
            state = ChainState(new_dag, state.hp, state.aux, log_prob_infinite(new_dag, state.hp), state.log_lik)
    else:
        # Flip proposals with the conditional odds as the prior part of the ratio
        for k in candidates:
            p = gibbs_edge_probability(state.dag, k, i, state.hp, active)
            proposal = state.dag.copy()
            if proposal.has_edge(k, i):
                proposal.remove_edge(k, i)
                log_odds = math.log1p(-p) - math.log(p) if p > 0 else math.inf
            else:
                proposal.add_edge(k, i)
                log_odds = math.log(p) - math.log1p(-p) if p > 0 else -math.inf
            state, accepted, _ = _metropolis(state, proposal, target, rng, log_prior_diff=log_odds)
            if stats is not None:
                stats.record("gibbs", accepted)

    logger.debug("Gibbs update of node %d over %d candidate parents", i, len(candidates))
    return state.dag if unwrap else state


def log_birth_ratio(dag: OrderedDag, i: int, theta_new: float, hp: Hyperparams) -> Tuple[OrderedDag, float]:
    """
    Graph after adding a new hidden parent of `i` at `theta_new`, and the unminimised log acceptance
    ratio of that birth for the prior.

    The ratio is the log density ratio plus log(len (up_i + 1) K+ / (K*_i + 1)), where len is the
    length of the insertion interval containing `theta_new`.
    """
    active = active_set(dag)
    stats = count_stats(dag, active)
    length = _insertion_interval_length(dag, i, theta_new, active)
    n_orphans = len(singleton_orphan_parents(dag, i, active))

    new_dag = dag.copy()
    k = new_dag.add_node(theta_new, NodeKind.HIDDEN)
    new_dag.add_edge(k, i)
    log_factor = math.log(length * (stats.up[i] + 1) * stats.k_plus / (n_orphans + 1)) if length > 0 else -math.inf
    return new_dag, log_prob_ratio(new_dag, dag, hp) + log_factor


def log_death_ratio(dag: OrderedDag, i: int, k: int, hp: Hyperparams) -> Tuple[OrderedDag, float]:
    """
    Graph after removing the singleton-orphan parent `k` of `i`, and the unminimised log acceptance
    ratio of that death for the prior.

    The ratio is the log density ratio plus log(K*_i / (len (K+ - 1) up_i)), all counts taken in the
    current graph and len the length of the interval `k` occupies once removed.
    """
    active = active_set(dag)
    orphans = singleton_orphan_parents(dag, i, active)
    if k not in orphans:
        raise ValueError(f"Node {k} is not a singleton-orphan parent of node {i}.")
    stats = count_stats(dag, active)

    new_dag = dag.copy()
    new_dag.remove_node(k)
    length = _insertion_interval_length(new_dag, i, dag.theta(k), active - {k})
    log_factor = math.log(len(orphans) / (length * (stats.k_plus - 1) * stats.up[i]))
    return new_dag, log_prob_ratio(new_dag, dag, hp) + log_factor


def _insertion_intervals(dag: OrderedDag, i: int, active: Set[int]) -> List[Tuple[float, float]]:
    # Between theta_i, every active order strictly above it, and 1
    theta_i = dag.theta(i)
    bounds = [theta_i] + sorted(dag.theta(k) for k in active if dag.theta(k) > theta_i) + [1.0]
    return list(zip(bounds[:-1], bounds[1:]))


def _insertion_interval_length(dag: OrderedDag, i: int, theta: float, active: Set[int]) -> float:
    for lo, hi in _insertion_intervals(dag, i, active):
        if lo < theta < hi:
            return hi - lo
    return 0.0


def birth_move(
    state: StateLike,
    target: TargetSpec,
    rng: np.random.Generator,
    i: Optional[int] = None,
    stats: Optional[MoveStats] = None,
) -> Tuple[StateLike, bool]:
    """
    Propose a new hidden singleton-orphan parent for one uniformly chosen active node.

    One of the up_i + 1 intervals above the node is picked uniformly and the new order value is drawn
    uniformly inside it; zero-length intervals are always rejected.

    Returns
    -------
    Tuple[OrderedDag or ChainState, bool]
        The resulting state and whether the birth was accepted.
    """
    state, unwrap = _as_state(state, target)
    dag = state.dag
    active = active_set(dag)
    if i is None:
        i = _pick_active(dag, rng, active)
    counts = count_stats(dag, active)

    # Pick an interval above i, then a uniform order value inside it
    intervals = _insertion_intervals(dag, i, active)
    lo, hi = intervals[int(rng.integers(len(intervals)))]
    theta_new = rng.uniform(lo, hi)

    accepted = False
    if hi > lo and lo < theta_new < hi:
        new_dag = dag.copy()
        try:
            k = new_dag.add_node(theta_new, NodeKind.HIDDEN)
        except DegenerateOrderError:
            k = None
        if k is not None:
            new_dag.add_edge(k, i)
            # Proposal ratio against the matching death
            n_orphans = len(singleton_orphan_parents(dag, i, active))
            log_factor = math.log((hi - lo) * (counts.up[i] + 1) * counts.k_plus / (n_orphans + 1))
            state, accepted, log_ratio = _metropolis(state, new_dag, target, rng, log_factor=log_factor)
            logger.debug("Birth above node %d at %.6f: log ratio %.4f, accepted=%s", i, theta_new, log_ratio, accepted)

    if stats is not None:
        stats.record("birth", accepted)
    return (state.dag if unwrap else state), accepted


def death_move(
    state: StateLike,
    target: TargetSpec,
    rng: np.random.Generator,
    i: Optional[int] = None,
    stats: Optional[MoveStats] = None,
) -> Tuple[StateLike, bool]:
    """
    Propose removing one singleton-orphan parent of a uniformly chosen active node.

    When the node has no singleton-orphan parent the state is kept and the proposal counts as rejected.
    """
    state, unwrap = _as_state(state, target)
    dag = state.dag
    active = active_set(dag)
    if i is None:
        i = _pick_active(dag, rng, active)

    # Only parents with no other child and no parent of their own can die
    orphans = singleton_orphan_parents(dag, i, active)
    accepted = False
    if orphans:
        k = orphans[int(rng.integers(len(orphans)))]
        counts = count_stats(dag, active)
        new_dag = dag.copy()
        new_dag.remove_node(k)
        length = _insertion_interval_length(new_dag, i, dag.theta(k), active - {k})
        log_factor = math.log(len(orphans) / (length * (counts.k_plus - 1) * counts.up[i]))
        state, accepted, log_ratio = _metropolis(state, new_dag, target, rng, log_factor=log_factor)
        logger.debug("Death of node %d above node %d: log ratio %.4f, accepted=%s", k, i, log_ratio, accepted)

    if stats is not None:
        stats.record("death", accepted)
    return (state.dag if unwrap else state), accepted


def birth_death_move(
    state: StateLike,
    target: TargetSpec,
    rng: np.random.Generator,
    stats: Optional[MoveStats] = None,
) -> Tuple[StateLike, bool]:
    """Fair coin between `birth_move` and `death_move`."""
    if rng.random() < 0.5:
        return birth_move(state, target, rng, stats=stats)
    return death_move(state, target, rng, stats=stats)


def order_move(
    state: StateLike,
    target: TargetSpec,
    rng: np.random.Generator,
    i: Optional[int] = None,
    stats: Optional[MoveStats] = None,
) -> Tuple[StateLike, bool]:
    """
    Resample the order value of one uniformly chosen active node between its neighbours.

    The proposal is uniform on (theta_h, theta_l), h being the highest child (0 without children) and
    l the lowest parent (1 without parents), so every edge stays valid. Observed nodes are skipped
    when the target pins them; skipped nodes are not counted as proposals.
    """
    state, unwrap = _as_state(state, target)
    dag = state.dag
    if i is None:
        i = _pick_active(dag, rng)
    if target.pin_observed and dag.kind(i) is NodeKind.OBSERVED:
        return (state.dag if unwrap else state), False

    # Uniform between the highest child and the lowest parent
    upper = min((dag.theta(p) for p in dag.parents(i)), default=1.0)
    lower = max((dag.theta(c) for c in dag.children(i)), default=0.0)
    theta_new = rng.uniform(lower, upper)

    accepted = False
    if lower < theta_new < upper:
        new_dag = dag.copy()
        try:
            new_dag.set_theta(i, theta_new)
        except DegenerateOrderError:
            new_dag = None
        if new_dag is not None:
            state, accepted, log_ratio = _metropolis(state, new_dag, target, rng)
            logger.debug("Order move of node %d to %.6f: log ratio %.4f, accepted=%s", i, theta_new, log_ratio, accepted)

    if stats is not None:
        stats.record("order", accepted)
    return (state.dag if unwrap else state), accepted
