import math
from collections import Counter
from itertools import combinations

import numpy as np
import pytest
from numpy.testing import assert_allclose
from scipy import integrate, stats

from ICPydags.distribution import log_prob_infinite
from ICPydags.ordered_dag import Hyperparams, NodeKind, OrderedDag, check_dag, count_stats
from ICPydags.prior_sampler import (RANDOM, backward_proposal, sample_prior, sample_prior_many, select_existing,
                                    select_new)
from ICPydags.utils import GraphError


def _within(empirical, expected, se, n_se=4.0):
    assert abs(empirical - expected) <= n_se * se, f"{empirical} vs {expected} (se {se})"


def test_backward_proposal_without_phi():
    dag = OrderedDag.from_parts([(0, 0.1, "obs"), (1, 0.2, "obs"), (2, 0.9, "obs")])
    rng = np.random.default_rng(0)
    for _ in range(100):
        assert backward_proposal(dag, 2, Hyperparams(1.0, 1.0, 0.0), rng) == []
    assert dag.n_edges == 0


def test_backward_proposal_nothing_below():
    dag = OrderedDag.from_parts([(0, 0.1, "obs")])
    assert backward_proposal(dag, 0, Hyperparams(1.0, 1.0, 1.0), np.random.default_rng(0)) == []


def test_backward_proposal_rejects_hidden_nodes():
    dag = OrderedDag.from_parts([(0, 0.1, "obs"), (1, 0.5, "hid")])
    with pytest.raises(GraphError):
        backward_proposal(dag, 1, Hyperparams(1.0, 1.0, 1.0), np.random.default_rng(0))


def test_backward_proposal_subsets_are_uniform():
    base = OrderedDag.from_parts([(j, 0.1 * (j + 1), "obs") for j in range(5)] + [(5, 0.9, "obs")])
    hp = Hyperparams(1.0, 1.0, 1.0)
    rng = np.random.default_rng(11)
    counts = Counter()
    sizes = []
    for _ in range(20_000):
        edges = backward_proposal(base.copy(), 5, hp, rng)
        sizes.append(len(edges))
        if len(edges) == 2:
            counts[tuple(sorted(child for _, child in edges))] += 1
    # Binomial(5, 1/2) count, uniform subset given the count
    _within(np.mean(sizes), 2.5, np.std(sizes) / math.sqrt(len(sizes)))
    observed = [counts[c] for c in combinations(range(5), 2)]
    assert stats.chisquare(observed).pvalue > 1e-3


def test_select_existing_hidden_candidate():
    # Candidate 2 has one child and down = 2 (its child and the current chef)
    dag = OrderedDag.from_parts([(0, 0.1, "obs"), (1, 0.5, "hid"), (2, 0.9, "hid")], [(2, 0)])
    hp = Hyperparams(1.0, 1.0, 3.0)
    rng = np.random.default_rng(5)
    n = 20_000
    hits = sum(bool(select_existing(dag.copy(), 1, hp, rng, processed={0, 2})) for _ in range(n))
    _within(hits / n, 0.5, math.sqrt(0.25 / n))


def test_select_existing_star_candidate():
    dag = OrderedDag.from_parts([(0, 0.5, "hid"), (1, 0.9, "obs")])
    hp = Hyperparams(1.0, 1.0, 5.0)
    rng = np.random.default_rng(6)
    n = 20_000
    hits = sum(bool(select_existing(dag.copy(), 0, hp, rng, processed={1})) for _ in range(n))
    p = 5 / 6
    _within(hits / n, p, math.sqrt(p * (1 - p) / n))


def test_select_existing_ignores_lower_chefs():
    dag = OrderedDag.from_parts([(0, 0.1, "obs"), (1, 0.5, "hid")])
    rng = np.random.default_rng(0)
    for _ in range(50):
        assert select_existing(dag, 1, Hyperparams(1.0, 1.0, 100.0), rng) == []


def test_select_new_places_chefs_above():
    dag = OrderedDag.from_parts([(0, 0.3, "obs"), (1, 0.6, "obs")])
    rng = np.random.default_rng(9)
    created = select_new(dag, 0, Hyperparams(1.0, 10.0, 1.0), rng, processed=set())
    assert created
    for k in created:
        assert dag.kind(k) is NodeKind.HIDDEN
        assert dag.theta(k) > 0.3 and dag.children(k) == {0}


def test_direct_parents_of_single_star_are_poisson():
    gamma = 1.5
    rng = np.random.default_rng(21)
    n = 20_000
    counts = np.array([len(sample_prior(Hyperparams(1.0, gamma, 1.0), [0.0], rng).parents(0)) for _ in range(n)])
    _within(counts.mean(), gamma, math.sqrt(gamma / n))


def test_vanishing_gamma_gives_empty_graph():
    rng = np.random.default_rng(2)
    graphs = [sample_prior(Hyperparams(1.0, 1e-9, 1.0), [0.0], rng) for _ in range(200)]
    assert all(len(g) == 1 for g in graphs)


def test_draws_satisfy_graph_invariants():
    rng = np.random.default_rng(4)
    for _ in range(300):
        dag = sample_prior(Hyperparams(1.0, 2.0, 1.0), [RANDOM, RANDOM, 0.25], rng)
        check_dag(dag, require_active=True)
        assert len(dag.observed) == 3


def test_sampler_matches_density_on_small_graphs():
    # One star at 0: the graph is empty or has a single hidden parent with probabilities from the density
    hp = Hyperparams(1.0, 1.0, 1.0)

    def two_node_density(t):
        dag = OrderedDag.from_parts([(0, 0.0, "obs"), (1, t, "hid")], [(1, 0)])
        return 2 * math.exp(log_prob_infinite(dag, hp))

    p_empty = math.exp(log_prob_infinite(OrderedDag.from_parts([(0, 0.0, "obs")]), hp))
    p_single, _ = integrate.quad(two_node_density, 0.0, 1.0)

    rng = np.random.default_rng(17)
    n = 20_000
    k_plus = np.array([count_stats(sample_prior(hp, [0.0], rng)).k_plus for _ in range(n)])
    for value, p in ((1, p_empty), (2, p_single)):
        _within(np.mean(k_plus == value), p, math.sqrt(p * (1 - p) / n))


def test_ibp_restricted_placement_and_mean():
    alpha, gamma, n_stars = 1.0, 2.0, 3
    rng = np.random.default_rng(8)
    hidden = []
    for _ in range(5_000):
        dag = sample_prior(Hyperparams(alpha, gamma, 1.0), [RANDOM] * n_stars, rng, ibp_restricted=True)
        assert all(dag.theta(k) == 0.0 for k in dag.observed)
        assert all(dag.theta(k) == 1.0 for k in dag.hidden)
        hidden.append(len(dag.hidden))
    expected = sum(alpha * gamma / (alpha + n) for n in range(n_stars))
    _within(np.mean(hidden), expected, np.std(hidden) / math.sqrt(len(hidden)))


def test_sample_prior_validation():
    with pytest.raises(GraphError):
        sample_prior(Hyperparams(1.0, 1.0, 1.0), [], np.random.default_rng(0))
    with pytest.raises(ValueError):
        sample_prior(Hyperparams(1.0, 1.0, 1.0), [1.5], np.random.default_rng(0))


def test_sample_prior_many_is_deterministic():
    hp = Hyperparams(1.0, 2.0, 1.0)
    first = sample_prior_many(hp, [RANDOM, RANDOM], 20, seed=42)
    second = sample_prior_many(hp, [RANDOM, RANDOM], 20, seed=42)
    assert len(first) == 20
    assert first == second


def test_exact_backward_option_runs():
    rng = np.random.default_rng(3)
    for _ in range(100):
        dag = sample_prior(Hyperparams(1.0, 1.0, 2.0), [0.2, 0.7], rng, exact_backward=True)
        check_dag(dag, require_active=True)


@pytest.mark.slow
def test_recursion_terminates_for_large_gamma():
    rng = np.random.default_rng(12)
    for _ in range(2_000):
        dag = sample_prior(Hyperparams(1.0, 20.0, 1.0), [0.0], rng, max_nodes=100_000)
        check_dag(dag, require_active=True)


@pytest.mark.slow
def test_sampler_matches_density_at_scale():
    hp = Hyperparams(2.0, 1.5, 1.0)
    p_empty = math.exp(-hp.gamma)
    rng = np.random.default_rng(99)
    n = 200_000
    empty = np.array([len(sample_prior(hp, [0.0], rng)) == 1 for _ in range(n)])
    _within(empty.mean(), p_empty, math.sqrt(p_empty * (1 - p_empty) / n))
