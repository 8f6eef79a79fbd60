# Graph representation and counting statistics
from .ordered_dag import (Hyperparams, NodeKind, OrderedDag, active_set, count_stats, sorted_orders,
                          prune_inactive, check_dag)
from .special_functions import log_rising_factorial, log_falling_factorial, digamma, digamma_difference
# Exact densities of the finite and infinite models
from .distribution import log_prob_finite, log_prob_infinite, log_prob_ratio
# Generative sampler
from .prior_sampler import backward_proposal, select_existing, select_new, sample_prior, sample_prior_many
# Reversible-jump chain
from .chain_state import ChainState, HyperPrior, LikelihoodHook, MoveStats, TargetSpec
from .structure_moves import gibbs_edges, birth_move, death_move, birth_death_move, order_move
from .hyper_moves import resample_hypers
from .run_chain import ChainSample, Schedule, run_chain, run_chains
# Sigmoid belief network likelihood
from .dataset import Dataset
from .read_dataset import read_dataset, read_matrix, write_dataset
from .nlgbn import (NlgbnLikelihood, NlgbnState, fit_nlgbn, initial_state, log_density_unit, log_joint,
                    trans_dimensional_params, update_params)
# Evaluation
from .fantasy import fantasy
from .hellinger import hellinger
from .hyper_study import complexity_study, density_study, hyper_study
from .make_synthetic import make_synthetic
from .convnet_mapping import ArchSpec, arch_statistics, compute_channels, compute_pixels, dag_to_arch
# Persistence and configuration
from .chain_io import ChainWriter, merge_chains, read_chain, write_chain
from .config import RunConfig, parse_config

__all__ = [
    "Hyperparams", "NodeKind", "OrderedDag", "active_set", "count_stats", "sorted_orders", "prune_inactive",
    "check_dag", "log_rising_factorial", "log_falling_factorial", "digamma", "digamma_difference",
    "log_prob_finite", "log_prob_infinite", "log_prob_ratio",
    "backward_proposal", "select_existing", "select_new", "sample_prior", "sample_prior_many",
    "ChainState", "HyperPrior", "LikelihoodHook", "MoveStats", "TargetSpec",
    "gibbs_edges", "birth_move", "death_move", "birth_death_move", "order_move", "resample_hypers",
    "ChainSample", "Schedule", "run_chain", "run_chains",
    "Dataset", "read_dataset", "read_matrix", "write_dataset",
    "NlgbnLikelihood", "NlgbnState", "fit_nlgbn", "initial_state", "log_density_unit", "log_joint",
    "trans_dimensional_params", "update_params",
    "fantasy", "hellinger", "complexity_study", "density_study", "hyper_study", "make_synthetic",
    "ArchSpec", "arch_statistics", "compute_channels", "compute_pixels", "dag_to_arch",
    "ChainWriter", "merge_chains", "read_chain", "write_chain", "RunConfig", "parse_config",
]
