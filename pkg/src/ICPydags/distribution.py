import math
from typing import Dict, Optional, Set, Tuple

import numpy as np
from scipy.special import gammaln

from ICPydags.ordered_dag import Hyperparams, NodeKind, OrderedDag, active_set, count_stats, sorted_orders
from ICPydags.special_functions import digamma_difference, log_falling_factorial, log_rising_factorial
from ICPydags.utils import DomainError, GraphError, ParameterError


def _log_rising_or_zero(x: float, n: int) -> float:
    # x**(rising n) where x may be 0: the empty product is 1, any other product vanishes
    if n == 0:
        return 0.0
    if x == 0:
        return -math.inf
    return log_rising_factorial(x, n)


def _node_term(kind: NodeKind, m: int, down: int, hp: Hyperparams) -> float:
    """Log factor contributed by one active node to the infinite-limit density."""
    if kind is NodeKind.HIDDEN:
        if m == 0:
            raise GraphError("An active hidden node has no active child; the density has a pole at m = 0.")
        return math.fsum([
            math.log(hp.alpha * hp.gamma),
            float(gammaln(m)),
            -log_rising_factorial(hp.alpha + down - m, m),
        ])
    return math.fsum([
        _log_rising_or_zero(hp.phi, m),
        log_rising_factorial(hp.alpha, down - m) if down > m else 0.0,
        -log_rising_factorial(hp.alpha + hp.phi, down) if down > 0 else 0.0,
    ])


def _interval_term(values, hp: Hyperparams) -> float:
    # Interval j (j >= 1) lies above the j-th lowest active order
    k_plus = len(values) - 2
    terms = [(values[j + 1] - values[j]) * digamma_difference(hp.alpha, j) for j in range(1, k_plus + 1)]
    return -hp.alpha * hp.gamma * math.fsum(terms)


def _log_prob_parts(dag: OrderedDag, hp: Hyperparams, active: Optional[Set[int]] = None):
    if active is None:
        active = active_set(dag)
    stats = count_stats(dag, active)
    orders = sorted_orders(dag, active)
    node_terms: Dict[int, Tuple[tuple, float]] = {}
    for k in active:
        key = (dag.kind(k), stats.m[k], stats.down[k])
        node_terms[k] = (key, _node_term(key[0], key[1], key[2], hp))
    return orders, stats.k_plus, node_terms


def log_prob_infinite(dag: OrderedDag, hp: Hyperparams) -> float:
    """
    Log density of the active structure and active order values in the infinite-node model.

    The density covers the sorted adjacency of the active subgraph, the envelope of missing
    inactive-to-active edges and the active order values. Inactive hidden nodes are ignored.

    Parameters
    ----------
    dag : OrderedDag
        The graph to evaluate; must contain at least one observed node.
    hp : Hyperparams
        The (alpha, gamma, phi) hyperparameters.

    Returns
    -------
    float
        The natural-log density. It is -inf when an observed node has children while phi = 0.

    Raises
    ------
    GraphError
        If the graph has no observed node.
    DegenerateOrderError
        If two active nodes share an interior order value.

    Examples
    --------
    >>> dag = OrderedDag.from_parts([(0, 0.3, "obs")])
    >>> round(log_prob_infinite(dag, Hyperparams(1.0, 2.0, 1.0)), 12)
    -1.4
    """
    if not dag.observed:
        raise GraphError("The density is conditioned on a nonempty observed set.")
    orders, k_plus, node_terms = _log_prob_parts(dag, hp)

    # math.fsum is exactly rounded, so the result does not depend on node labels
    terms = [-float(gammaln(k_plus + 1)), _interval_term(orders.values, hp)]
    terms.extend(term for _, term in node_terms.values())
    if any(t == -math.inf for t in terms):
        return -math.inf
    return math.fsum(terms)


def log_prob_finite(dag: OrderedDag, hp: Hyperparams, k_total: int) -> float:
    """
    Log density of the active structure and active order values for a model with `k_total` nodes.

    Parameters
    ----------
    dag : OrderedDag
        The graph to evaluate.
    hp : Hyperparams
        The (alpha, gamma, phi) hyperparameters.
    k_total : int
        Total number of nodes K of the finite model, active and inactive.

    Returns
    -------
    float
        The natural-log density.

    Raises
    ------
    ParameterError
        If gamma >= k_total or k_total is smaller than the number of active nodes.
    DegenerateOrderError
        If two active nodes share an interior order value.

    Notes
    -----
    The inactive-node factor is the interval sum S = sum_j len_j r_j raised to the number of inactive
    nodes, with r_j the probability that an inactive node placed in interval j sends no edge to the j
    active nodes below it. Since the lengths sum to one, log S is computed as log1p(sum_j len_j (r_j - 1))
    with r_j - 1 from expm1, which keeps precision for very large `k_total`.
    """
    if isinstance(k_total, bool) or not isinstance(k_total, (int, np.integer)):
        raise TypeError(f"Expected an integer k_total, got {type(k_total)}")
    if not dag.observed:
        raise GraphError("The density is conditioned on a nonempty observed set.")
    if not hp.gamma < k_total:
        raise ParameterError(f"The finite model requires gamma < K, got gamma={hp.gamma}, K={k_total}.")

    active = active_set(dag)
    stats = count_stats(dag, active)
    orders = sorted_orders(dag, active)
    k_plus, d = stats.k_plus, stats.d
    if k_total < k_plus:
        raise ParameterError(f"K={k_total} is smaller than the number of active nodes {k_plus}.")

    ag_k = hp.alpha * hp.gamma / k_total
    a_rest = hp.alpha - ag_k

    # Normalisation over the labellings mapping onto the sorted representation
    terms = [log_falling_factorial(k_total - d, k_plus - d), -float(gammaln(k_plus + 1))]

    # Inactive envelope, one factor per inactive node
    k_minus = k_total - k_plus
    if k_minus > 0:
        log_r = np.cumsum(np.log1p(-ag_k / (hp.alpha + np.arange(k_plus, dtype=float))))
        r_minus_one = np.concatenate([[0.0], np.expm1(log_r)])
        lengths = np.diff(orders.values)
        terms.append(k_minus * math.log1p(math.fsum(lengths * r_minus_one)))

    for k in active:
        m, down = stats.m[k], stats.down[k]
        if dag.kind(k) is NodeKind.HIDDEN:
            terms.extend([
                log_rising_factorial(ag_k, m),
                log_rising_factorial(a_rest, down - m),
                -log_rising_factorial(hp.alpha, down),
            ])
        else:
            terms.extend([
                log_rising_factorial(ag_k + hp.phi, m),
                log_rising_factorial(a_rest, down - m),
                -log_rising_factorial(hp.alpha + hp.phi, down),
            ])
    return math.fsum(terms)


def log_prob_ratio(dag_a: OrderedDag, dag_b: OrderedDag, hp: Hyperparams) -> float:
    """
    log_prob_infinite(dag_a) - log_prob_infinite(dag_b), cancelling unchanged node terms.

    Nodes present in both graphs with the same kind, m and down counts contribute nothing; the
    interval term is only recomputed when the sorted active orders differ.

    Raises
    ------
    DomainError
        If `dag_b` has zero probability, so the ratio is undefined.
    """
    if not dag_a.observed or not dag_b.observed:
        raise GraphError("The density is conditioned on a nonempty observed set.")
    orders_a, k_plus_a, terms_a = _log_prob_parts(dag_a, hp)
    orders_b, k_plus_b, terms_b = _log_prob_parts(dag_b, hp)

    if any(t == -math.inf for _, t in terms_b.values()):
        raise DomainError("The reference graph has zero probability; the log ratio is undefined.")
    if any(t == -math.inf for _, t in terms_a.values()):
        return -math.inf

    diff = []
    if k_plus_a != k_plus_b:
        diff.append(float(gammaln(k_plus_b + 1) - gammaln(k_plus_a + 1)))
    if orders_a.values != orders_b.values:
        diff.append(_interval_term(orders_a.values, hp))
        diff.append(-_interval_term(orders_b.values, hp))

    for k, (key, term) in terms_a.items():
        if k in terms_b and terms_b[k][0] == key:
            continue
        diff.append(term)
    for k, (key, term) in terms_b.items():
        if k in terms_a and terms_a[k][0] == key:
            continue
        diff.append(-term)
    return math.fsum(diff)
