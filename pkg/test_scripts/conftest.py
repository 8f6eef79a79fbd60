import math

import numpy as np
import pytest

from ICPydags.ordered_dag import NodeKind, OrderedDag, prune_inactive


def pytest_addoption(parser):
    parser.addoption("--runslow", action="store_true", default=False, help="run acceptance-scale Monte Carlo tests")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--runslow"):
        return
    skip_slow = pytest.mark.skip(reason="needs --runslow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)


def build_random_dag(rng, n_obs=2, n_hidden=4, p_edge=0.5, observed_parents=True, obs_at_zero=False):
    """Random ordered DAG restricted to its active part; order values are continuous so ties never occur."""
    dag = OrderedDag()
    for _ in range(n_obs):
        dag.add_node(0.0 if obs_at_zero else float(rng.uniform(0.05, 0.6)), NodeKind.OBSERVED)
    for _ in range(n_hidden):
        dag.add_node(float(rng.uniform(0.05, 0.95)), NodeKind.HIDDEN)
    for k in dag.node_ids():
        if not observed_parents and dag.kind(k) is NodeKind.OBSERVED:
            continue
        for i in dag.node_ids():
            if dag.theta(k) > dag.theta(i) and rng.random() < p_edge:
                dag.add_edge(k, i)
    return prune_inactive(dag)


@pytest.fixture(scope="session")
def random_dag():
    return build_random_dag


def batch_means_se(values, n_batches=50):
    """Standard error of a chain average from the spread of batch averages."""
    values = np.asarray(values, dtype=float)
    size = len(values) // n_batches
    means = values[: size * n_batches].reshape(n_batches, size).mean(axis=1)
    return float(means.std(ddof=1) / math.sqrt(n_batches))


@pytest.fixture(scope="session")
def chain_se():
    return batch_means_se
