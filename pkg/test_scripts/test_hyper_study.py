import math

import numpy as np
import polars as pl
import pytest

from ICPydags.hyper_study import STUDY_COLUMNS, complexity_study, density_study, hyper_study, prior_summary
from ICPydags.ordered_dag import Hyperparams


def test_grid_columns_and_order():
    table = hyper_study([0.5, 2.0], [1.0, 3.0], n_obs=2, draws=50, seed=0)
    assert table.columns == STUDY_COLUMNS
    assert table.height == 4
    assert table["alpha"].to_list() == [0.5, 0.5, 2.0, 2.0]
    assert table["gamma"].to_list() == [1.0, 3.0, 1.0, 3.0]
    assert all(k >= 2 for k in table["k_plus_mean"].to_list())


def test_expected_size_grows_with_gamma():
    table = hyper_study([1.0], [0.5, 5.0], n_obs=3, draws=300, seed=1)
    small, large = table["k_plus_mean"].to_list()
    assert small < large
    small_edges, large_edges = table["e_plus_mean"].to_list()
    assert small_edges < large_edges


def test_grid_does_not_depend_on_workers():
    serial = hyper_study([0.5, 1.0, 4.0], [1.0, 2.0], n_obs=2, draws=40, seed=2, max_workers=1)
    threaded = hyper_study([0.5, 1.0, 4.0], [1.0, 2.0], n_obs=2, draws=40, seed=2, max_workers=4)
    assert serial.equals(threaded)


def test_single_observed_node_edges():
    summary = prior_summary(Hyperparams(1.0, 2.0, 1.0), 1, 2000, np.random.SeedSequence(3))
    # Every active hidden node has at least one child
    assert summary["e_plus_mean"] >= summary["k_plus_mean"] - 1.0
    assert summary["k_plus_se"] > 0


def test_prior_summary_requires_draws():
    with pytest.raises(ValueError):
        prior_summary(Hyperparams(1.0, 1.0, 1.0), 1, 0, np.random.SeedSequence(0))
    with pytest.raises(ValueError):
        hyper_study([1.0], [1.0], n_obs=0, draws=10, seed=0)


def test_complexity_study():
    table = complexity_study([1.0, 3.0], [1, 2, 4], draws=60, seed=4, gamma=1.5)
    assert table.columns == ["alpha", "n_obs", "hidden_mean", "hidden_se", "e_plus_mean", "e_plus_se"]
    assert table.height == 6
    assert table["n_obs"].to_list() == [1, 2, 4, 1, 2, 4]
    assert all(h >= 0 for h in table["hidden_mean"].to_list())


def test_density_study_hits_the_target():
    table = density_study([0.5, 2.0], target_k_plus=5.0, n_obs=2, draws=200, seed=5)
    assert table.columns == STUDY_COLUMNS
    for k_plus, gamma in zip(table["k_plus_mean"].to_list(), table["gamma"].to_list()):
        assert abs(k_plus - 5.0) < 0.25
        assert 1e-3 < gamma < 100.0 and math.isfinite(gamma)


def test_density_study_rejects_unreachable_targets():
    with pytest.raises(ValueError):
        density_study([1.0], target_k_plus=2.0, n_obs=2, draws=10, seed=0)


@pytest.mark.slow
def test_edges_fall_with_alpha_at_fixed_expected_size():
    table = density_study([0.25, 1.0, 4.0], target_k_plus=6.0, n_obs=1, draws=4000, seed=11)
    edges, se = table["e_plus_mean"].to_list(), table["e_plus_se"].to_list()
    for j in range(len(edges) - 1):
        assert edges[j] > edges[j + 1]
    assert edges[0] - edges[-1] > 4 * math.hypot(se[0], se[-1])


@pytest.mark.slow
def test_hidden_nodes_grow_with_observed_nodes():
    table = complexity_study([0.5, 2.0], [1, 2, 4, 8], draws=3000, seed=12, gamma=1.0)
    for alpha in (0.5, 2.0):
        rows = table.filter(pl.col("alpha") == alpha).sort("n_obs")
        hidden, se = rows["hidden_mean"].to_list(), rows["hidden_se"].to_list()
        for j in range(len(hidden) - 1):
            assert hidden[j] < hidden[j + 1]
        assert hidden[-1] - hidden[0] > 4 * math.hypot(se[0], se[-1])
