import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ICPydags.ordered_dag import (NodeKind, OrderedDag, active_set, check_dag, count_stats, prune_inactive,
                                  singleton_orphan_parents, sorted_orders)
from ICPydags.utils import DegenerateOrderError, GraphError

from conftest import build_random_dag


def test_active_set_observed_only():
    dag = OrderedDag.from_parts([(0, 0.2, "obs"), (1, 0.4, "obs")])
    assert active_set(dag) == {0, 1}


def test_active_set_ancestor_chain():
    dag = OrderedDag.from_parts([(0, 0.1, "obs"), (1, 0.5, "hid"), (2, 0.9, "hid")], [(2, 1), (1, 0)])
    assert active_set(dag) == {0, 1, 2}


def test_active_set_disconnected_hidden_component():
    dag = OrderedDag.from_parts([(0, 0.1, "obs"), (1, 0.5, "hid"), (2, 0.9, "hid")], [(2, 1)])
    assert active_set(dag) == {0}


def test_count_stats_single_observed():
    stats = count_stats(OrderedDag.from_parts([(0, 0.0, "obs")]))
    assert (stats.m[0], stats.down[0], stats.up[0], stats.k_plus, stats.e_plus) == (0, 0, 0, 1, 0)


def test_count_stats_two_nodes():
    dag = OrderedDag.from_parts([(0, 0.2, "obs"), (1, 0.8, "hid")], [(1, 0)])
    stats = count_stats(dag)
    assert stats.m[1] == 1 and stats.down[1] == 1 and stats.up[0] == 1
    assert stats.k_plus == 2 and stats.d == 1 and stats.e_plus == 1


def test_count_stats_ties_at_zero():
    dag = OrderedDag.from_parts([(0, 0.0, "obs"), (1, 0.0, "obs"), (2, 0.5, "hid")], [(2, 0), (2, 1)])
    stats = count_stats(dag)
    # Tied nodes are neither above nor below each other
    assert stats.down[0] == 0 and stats.up[0] == 1
    assert stats.down[2] == 2


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2 ** 32 - 1))
def test_count_stats_matches_recount(seed):
    dag = build_random_dag(np.random.default_rng(seed), n_obs=2, n_hidden=2)
    active = active_set(dag)
    stats = count_stats(dag)
    for k in active:
        assert stats.m[k] == sum(1 for c in dag.children(k) if c in active)
        assert stats.down[k] == sum(1 for j in active if dag.theta(j) < dag.theta(k))
        assert stats.up[k] == sum(1 for j in active if dag.theta(j) > dag.theta(k))
    assert stats.e_plus == sum(stats.m.values())


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2 ** 32 - 1))
def test_descending_order_is_topological(seed):
    dag = build_random_dag(np.random.default_rng(seed), n_obs=3, n_hidden=5)
    position = {k: j for j, k in enumerate(sorted(dag.node_ids(), key=lambda k: -dag.theta(k)))}
    assert all(position[p] < position[c] for p, c in dag.edges)
    check_dag(dag, require_active=True)


def test_edge_must_point_down():
    dag = OrderedDag.from_parts([(0, 0.2, "obs"), (1, 0.8, "hid")])
    with pytest.raises(GraphError):
        dag.add_edge(0, 1)
    with pytest.raises(GraphError):
        dag.add_edge(1, 1)
    dag.add_edge(1, 0)
    with pytest.raises(GraphError):
        dag.add_edge(1, 0)


def test_interior_tie_is_degenerate():
    dag = OrderedDag.from_parts([(0, 0.3, "obs")])
    with pytest.raises(DegenerateOrderError):
        dag.add_node(0.3, NodeKind.HIDDEN)
    dag.add_node(0.0, NodeKind.OBSERVED)
    dag.add_node(0.0, NodeKind.OBSERVED)
    assert len(dag) == 3


def test_set_theta_keeps_edges_valid():
    dag = OrderedDag.from_parts([(0, 0.2, "obs"), (1, 0.8, "hid")], [(1, 0)])
    dag.set_theta(1, 0.5)
    assert dag.theta(1) == 0.5
    with pytest.raises(GraphError):
        dag.set_theta(1, 0.1)


def test_ids_are_never_reused():
    dag = OrderedDag.from_parts([(0, 0.0, "obs"), (1, 0.5, "hid")], [(1, 0)])
    dag.remove_node(1)
    assert dag.add_node(0.6, NodeKind.HIDDEN) == 2


def test_record_round_trip():
    dag = build_random_dag(np.random.default_rng(7), n_obs=2, n_hidden=6)
    assert OrderedDag.from_record(dag.to_record()) == dag


def test_prune_inactive_and_check_dag():
    dag = OrderedDag.from_parts([(0, 0.1, "obs"), (1, 0.5, "hid"), (2, 0.9, "hid")], [(2, 1)])
    with pytest.raises(GraphError):
        check_dag(dag, require_active=True)
    pruned = prune_inactive(dag)
    assert pruned.node_ids() == [0]
    check_dag(pruned, require_active=True)


def test_singleton_orphan_parents():
    dag = OrderedDag.from_parts(
        [(0, 0.0, "obs"), (1, 0.0, "obs"), (2, 0.4, "hid"), (3, 0.6, "hid"), (4, 0.8, "hid")],
        [(2, 0), (3, 0), (3, 1), (4, 2)],
    )
    # 2 has a parent, 3 has two children
    assert singleton_orphan_parents(dag, 0) == []
    assert singleton_orphan_parents(dag, 2) == [4]


def test_sorted_orders_intervals():
    dag = OrderedDag.from_parts([(0, 0.25, "obs"), (1, 0.75, "hid")], [(1, 0)])
    orders = sorted_orders(dag)
    assert orders.values == [0.0, 0.25, 0.75, 1.0]
    assert orders.k_plus == 2
    assert orders.intervals_above(0.25) == [(0.25, 0.75), (0.75, 1.0)]
