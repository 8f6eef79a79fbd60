import numpy as np
import pytest
from numpy.testing import assert_allclose

from ICPydags.fantasy import fantasy
from ICPydags.hellinger import hellinger
from ICPydags.make_synthetic import make_synthetic
from ICPydags.nlgbn import fit_nlgbn, generative_graph
from ICPydags.ordered_dag import Hyperparams, NodeKind
from ICPydags.run_chain import ChainSample, Schedule


def _sample(dag, weights=(), biases=None, precisions=None, lower=(0.0,), upper=(10.0,)):
    nodes = dag.node_ids()
    return ChainSample(
        iter=0,
        logp=0.0,
        graph=dag.to_record(),
        hypers=Hyperparams(1.0, 1.0, 1.0).to_record(),
        params={
            "weights": [list(w) for w in weights],
            "biases": [[i, (biases or {}).get(i, 0.0)] for i in nodes],
            "precisions": [[i, (precisions or {}).get(i, 1e8)] for i in nodes],
            "rescale": {"lower": list(lower), "upper": list(upper), "margin": 0.05, "columns": []},
        },
    )


def test_single_unit_centres_on_the_rescaled_midpoint():
    data = fantasy([_sample(generative_graph(1))], 200, np.random.default_rng(0))
    assert data.raw.shape == (200, 1)
    assert_allclose(data.raw, 5.0, atol=1e-2)


def test_hidden_parent_drives_the_output():
    dag = generative_graph(1)
    k = dag.add_node(0.5, NodeKind.HIDDEN)
    dag.add_edge(k, 0)
    # Hidden output near 1, weight large: the observed unit saturates near 1
    sample = _sample(dag, weights=[(k, 0, 20.0)], biases={k: 20.0, 0: 0.0})
    data = fantasy([sample], 50, np.random.default_rng(1))
    upper_limit = 0 + (1 - 0.05) * 10 / 0.9
    assert np.all(data.raw > 10.0)
    assert np.all(data.raw <= upper_limit + 1e-9)


def test_generated_data_keeps_the_fitted_rescaling():
    sample = _sample(generative_graph(2), lower=(-1.0, 2.0), upper=(1.0, 4.0), precisions={0: 1.0, 1: 1.0})
    data = fantasy([sample], 500, np.random.default_rng(5))
    assert_allclose(data.lower, [-1.0, 2.0])
    assert_allclose(data.upper, [1.0, 4.0])
    assert data.margin == 0.05
    # Unit outputs stay strictly inside (0, 1) and map back through the same affine map
    assert np.all((data.rows > 0) & (data.rows < 1))
    assert_allclose(data.rescale(data.raw), data.rows, atol=1e-12)
    assert_allclose(data.raw[:, 0], -1.0 + (data.rows[:, 0] - 0.05) * 2.0 / 0.9, atol=1e-12)
    assert_allclose(data.raw[:, 1], 2.0 + (data.rows[:, 1] - 0.05) * 2.0 / 0.9, atol=1e-12)


def test_points_come_from_every_sample():
    low = _sample(generative_graph(1), biases={0: -20.0})
    high = _sample(generative_graph(1), biases={0: 20.0})
    raw = fantasy([low, high], 400, np.random.default_rng(2)).raw[:, 0]
    assert np.any(raw < 0) and np.any(raw > 10)


def test_fantasy_is_reproducible():
    samples = [_sample(generative_graph(2), lower=(0.0, 0.0), upper=(1.0, 1.0), precisions={0: 1.0, 1: 1.0})]
    a = fantasy(samples, 30, np.random.default_rng(3)).raw
    b = fantasy(samples, 30, np.random.default_rng(3)).raw
    assert np.array_equal(a, b)


def test_fantasy_errors():
    rng = np.random.default_rng(4)
    with pytest.raises(ValueError):
        fantasy([], 10, rng)
    bare = ChainSample(iter=0, logp=0.0, graph=generative_graph(1).to_record(),
                       hypers=Hyperparams(1.0, 1.0, 1.0).to_record())
    with pytest.raises(ValueError, match="no network parameters"):
        fantasy([bare], 10, rng)
    with pytest.raises(ValueError):
        fantasy([_sample(generative_graph(1))], 0, rng)


@pytest.mark.slow
def test_ring_fit_generates_data_close_to_held_out_points():
    rng = np.random.default_rng(2024)
    train = make_synthetic("ring", 2000, rng)
    test = make_synthetic("ring", 2000, rng)
    baseline = hellinger(train.raw, test.raw).value
    assert abs(baseline - 0.0312) <= 0.02

    samples = []
    fit_nlgbn(train, 50_000, rng, samples.append, schedule=Schedule(burnin=10_000, thin=100, progress_every=1000))
    generated = fantasy(samples, 2000, rng)
    distance = hellinger(generated.raw, test.raw).value
    assert baseline - 0.01 <= distance <= 0.0402 + 0.03
