import math

import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal
from scipy import integrate, stats
from scipy.special import expit, logit

from ICPydags.chain_state import TargetSpec
from ICPydags.dataset import Dataset
from ICPydags.make_synthetic import make_synthetic
from ICPydags.nlgbn import (NlgbnLikelihood, StepSizes, check_state, export_params, fit_nlgbn, generative_graph,
                            initial_state, log_density_unit, log_joint, log_likelihood, trans_dimensional_params,
                            update_params)
from ICPydags.ordered_dag import Hyperparams, NodeKind, OrderedDag, check_dag
from ICPydags.run_chain import Schedule
from ICPydags.utils import DomainError, GraphError


def _unit_density(mean, precision):
    def density(u):
        u = min(max(u, 1e-300), 1 - 2 ** -53)
        return math.exp(log_density_unit(u, mean, precision))
    return density


def _network(rng, n=25):
    dag = OrderedDag.from_parts(
        [(0, 0.0, "obs"), (1, 0.0, "obs"), (2, 0.4, "hid"), (3, 0.8, "hid")],
        [(2, 0), (2, 1), (3, 2), (3, 0)],
    )
    data = Dataset.from_raw(rng.normal(size=(n, 2)))
    return dag, data, initial_state(dag, data, rng)


@pytest.mark.parametrize("mean, precision", [(0.0, 1.0), (2.0, 0.5), (-1.0, 4.0)])
def test_unit_density_integrates_to_one(mean, precision):
    total, _ = integrate.quad(_unit_density(mean, precision), 0.0, 1.0, epsabs=1e-10, limit=200)
    assert abs(total - 1.0) < 1e-6


def test_unit_density_symmetry():
    u = np.linspace(0.01, 0.99, 99)
    assert_allclose(log_density_unit(u, 0.0, 2.0), log_density_unit(1 - u, 0.0, 2.0), rtol=1e-12)


def test_unit_density_mode_at_high_precision():
    grid = np.linspace(0.001, 0.999, 99_801)
    values = log_density_unit(grid, 0.7, 1e4)
    assert abs(grid[np.argmax(values)] - expit(0.7)) < 1e-3


def test_unit_density_domain():
    with pytest.raises(DomainError):
        log_density_unit(1.0, 0.0, 1.0)
    with pytest.raises(DomainError):
        log_density_unit(0.5, 0.0, 0.0)


def test_log_joint_without_hidden_nodes():
    rng = np.random.default_rng(0)
    dag = generative_graph(1)
    data = Dataset.from_raw(rng.normal(size=(20, 1)))
    state = initial_state(dag, data, rng)
    hp = Hyperparams(1.0, 1.3, 1.0)
    b, rho = state.biases[0], state.precisions[0]
    expected = (-hp.gamma + np.sum(log_density_unit(data.rows[:, 0], b, rho)) + stats.norm.logpdf(b)
                + stats.gamma.logpdf(rho, a=0.5, scale=2.0))
    assert_allclose(log_joint(dag, state, data, hp), expected, rtol=1e-12)


def test_doubling_rows_doubles_the_data_term():
    rng = np.random.default_rng(1)
    dag = generative_graph(1)
    raw = rng.normal(size=(15, 1))
    single, double = Dataset.from_raw(raw), Dataset.from_raw(np.vstack([raw, raw]))
    state = initial_state(dag, single, rng)
    state_double = state.copy()
    state_double.activations = {0: double.rows[:, 0]}
    priors = stats.norm.logpdf(state.biases[0]) + stats.gamma.logpdf(state.precisions[0], a=0.5, scale=2.0)
    data_single = log_likelihood(dag, state, single) - priors
    data_double = log_likelihood(dag, state_double, double) - priors
    assert_allclose(data_double, 2 * data_single, rtol=1e-12)


def test_likelihood_matches_naive_recomputation():
    rng = np.random.default_rng(2)
    dag, data, state = _network(rng)
    for i in dag.node_ids():
        state.precisions[i] = float(rng.gamma(2.0, 1.0))

    total = 0.0
    for i in dag.node_ids():
        mean = state.biases[i] + sum(state.weights[(k, i)] * state.activations[k] for k in dag.parents(i))
        u = state.activations[i]
        total += np.sum(stats.norm.logpdf(logit(u), mean, 1 / math.sqrt(state.precisions[i])) - np.log(u * (1 - u)))
        total += stats.norm.logpdf(state.biases[i]) + stats.gamma.logpdf(state.precisions[i], a=0.5, scale=2.0)
    total += sum(stats.norm.logpdf(w) for w in state.weights.values())
    assert_allclose(log_likelihood(dag, state, data), total, rtol=1e-10)


def test_state_must_match_graph():
    rng = np.random.default_rng(3)
    dag, data, state = _network(rng)
    del state.weights[(3, 0)]
    with pytest.raises(GraphError):
        check_state(dag, state, data)


def test_zero_step_sizes_leave_the_state_unchanged():
    rng = np.random.default_rng(4)
    dag, data, state = _network(rng)
    state.steps = StepSizes(weights=0.0, biases=0.0, precisions=0.0, activations=0.0)
    new = update_params(dag, state, data, rng)
    assert new.weights == state.weights
    assert new.biases == state.biases
    assert new.precisions == state.precisions
    for k in dag.node_ids():
        assert_array_equal(new.activations[k], state.activations[k])
    assert all(rate == 1.0 for rate in new.acceptance.values())


def test_acceptance_rates_and_tuning():
    rng = np.random.default_rng(5)
    dag, data, state = _network(rng)
    for _ in range(20):
        state = update_params(dag, state, data, rng, tune=True)
    assert set(state.acceptance) == {"weights", "biases", "precisions", "activations"}
    assert all(0.0 <= rate <= 1.0 for rate in state.acceptance.values())
    assert state.steps != StepSizes()
    check_state(dag, state, data)


def test_bias_posterior_is_conjugate(chain_se):
    rng = np.random.default_rng(6)
    dag = generative_graph(1)
    data = Dataset.from_raw(rng.normal(size=(20, 1)))
    state = initial_state(dag, data, rng)
    state.precisions[0] = 1.0
    biases = []
    for _ in range(10_000):
        state = update_params(dag, state, data, rng, classes=("biases",))
        biases.append(state.biases[0])

    # Preactivations logit(x) ~ N(b, 1) with b ~ N(0, 1)
    precision = 1.0 + data.n
    expected = np.sum(logit(data.rows[:, 0])) / precision
    burned = biases[500:]
    assert abs(np.mean(burned) - expected) <= 4 * chain_se(burned)


def test_birth_and_death_bookkeeping():
    rng = np.random.default_rng(7)
    dag = generative_graph(2)
    data = Dataset.from_raw(rng.normal(size=(10, 2)))
    state = initial_state(dag, data, rng)

    born = dag.copy()
    k = born.add_node(0.5, NodeKind.HIDDEN)
    born.add_edge(k, 0)
    grown, log_q_fwd, log_q_rev = trans_dimensional_params(dag, born, state, data, rng)
    assert len(grown.weights) == len(state.weights) + 1
    assert len(grown.biases) == len(state.biases) + 1
    assert len(grown.precisions) == len(state.precisions) + 1
    assert log_q_rev == 0.0 and math.isfinite(log_q_fwd)
    check_state(born, grown, data)

    shrunk, log_q_fwd, log_q_rev = trans_dimensional_params(born, dag, grown, data, rng)
    assert shrunk.weights == state.weights
    assert shrunk.biases == state.biases
    assert shrunk.precisions == state.precisions
    assert log_q_fwd == 0.0 and math.isfinite(log_q_rev)


def test_initial_state_validation():
    rng = np.random.default_rng(8)
    data = Dataset.from_raw(rng.normal(size=(5, 2)))
    with pytest.raises(GraphError):
        initial_state(generative_graph(3), data, rng)
    with pytest.raises(ValueError):
        initial_state(generative_graph(2), data, rng, activation_init="zeros")


def test_fit_runs_and_exports_parameters():
    data = make_synthetic("ring", 30, np.random.default_rng(9))
    samples = []
    stats_ = fit_nlgbn(data, 5, np.random.default_rng(10), samples.append, schedule=Schedule(progress_every=0))
    assert [s.iter for s in samples] == [0, 1, 2, 3, 4, 5]
    for sample in samples:
        dag = sample.dag
        check_dag(dag, require_active=True)
        assert sorted(dag.observed) == [0, 1]
        assert {(k, i) for k, i, _ in sample.params["weights"]} == set(dag.edges)
        assert sample.params["rescale"]["lower"] == data.rescale_record()["lower"]
    assert stats_.proposals


def test_fit_is_reproducible():
    data = make_synthetic("two_moons", 20, np.random.default_rng(11))
    runs = []
    for _ in range(2):
        samples = []
        fit_nlgbn(data, 4, np.random.default_rng(12), samples.append, schedule=Schedule(progress_every=0))
        runs.append([s.to_record() for s in samples])
    assert runs[0] == runs[1]


def test_hook_exports_parameters():
    rng = np.random.default_rng(13)
    dag, data, state = _network(rng)
    hook = NlgbnLikelihood(data)
    assert hook.export(state) == export_params(state, data)
    target = TargetSpec(hp=Hyperparams(1.0, 1.0, 1.0), likelihood=hook)
    assert math.isfinite(hook.log_likelihood(dag, state))
    assert target.likelihood is hook
