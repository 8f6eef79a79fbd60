import logging
import math
from dataclasses import dataclass, field, replace
from typing import Dict, Iterable, List, Optional, Tuple

import numpy as np
from scipy import stats
from scipy.special import expit, logit

from ICPydags.chain_state import ChainState, LikelihoodHook, MoveStats, TargetSpec
from ICPydags.dataset import Dataset
from ICPydags.distribution import log_prob_infinite
from ICPydags.ordered_dag import Hyperparams, NodeKind, OrderedDag
from ICPydags.run_chain import Schedule, Sink, run_chain
from ICPydags.utils import DomainError, GraphError, ParameterError

logger = logging.getLogger(__name__)

# Sampled unit outputs are kept this far inside (0, 1)
_CLIP = 1e-12
_LOG_2PI = math.log(2 * math.pi)

# Gamma(0.5, 0.5) on the precisions, shape and rate
_PRECISION_SHAPE = 0.5
_PRECISION_RATE = 0.5

PARAMETER_CLASSES = ("weights", "biases", "precisions", "activations")


def log_density_unit(u, mean, precision):
    """
    Log density of a unit output u = sigmoid(a) with a ~ Normal(mean, 1 / precision).

    By change of variables the density is the normal density at logit(u) divided by u (1 - u).

    Parameters
    ----------
    u : float or np.ndarray
        Unit outputs, strictly inside (0, 1).
    mean : float or np.ndarray
        Mean of the preactivation.
    precision : float
        Noise precision, strictly positive.

    Returns
    -------
    float or np.ndarray
        The log density, with the shape of the broadcast inputs.

    Raises
    ------
    DomainError
        If any u lies outside (0, 1) or the precision is not positive.

    Examples
    --------
    >>> round(float(log_density_unit(0.5, 0.0, 1.0)), 6)
    0.467356
    """
    u_arr = np.asarray(u, dtype=float)
    if np.any(~(u_arr > 0)) or np.any(~(u_arr < 1)):
        raise DomainError("Unit outputs must lie strictly inside (0, 1).")
    if not precision > 0:
        raise DomainError(f"The precision must be positive, got {precision}.")
    value = _normal_logpdf(logit(u_arr), mean, precision) - np.log(u_arr) - np.log1p(-u_arr)
    return float(value) if np.ndim(value) == 0 else value


def _normal_logpdf(x, mean, precision):
    return 0.5 * (math.log(precision) - _LOG_2PI) - 0.5 * precision * np.square(x - mean)


def _log_precision_prior(rho: float) -> float:
    return float(stats.gamma.logpdf(rho, a=_PRECISION_SHAPE, scale=1.0 / _PRECISION_RATE))


@dataclass(frozen=True)
class StepSizes:
    """Random-walk standard deviations per parameter class, adapted towards `target` acceptance during burn-in."""

    weights: float = 0.5
    biases: float = 0.5
    precisions: float = 0.5
    activations: float = 1.0
    target: float = 0.44

    def adapted(self, rates: Dict[str, float]) -> "StepSizes":
        changes = {}
        for name, rate in rates.items():
            if not math.isnan(rate):
                changes[name] = getattr(self, name) * math.exp(rate - self.target)
        return replace(self, **changes)


@dataclass
class NlgbnState:
    """
    Parameters and latent unit outputs of the sigmoid network.

    Attributes
    ----------
    weights : Dict[Tuple[int, int], float]
        One weight per edge (parent, child).
    biases, precisions : Dict[int, float]
        One bias and one noise precision per node.
    activations : Dict[int, np.ndarray]
        Unit outputs of every node for every datum; observed nodes hold the rescaled data.
    steps : StepSizes
        Current random-walk step sizes.
    acceptance : Dict[str, float]
        Acceptance rate of each parameter class in the last sweep.
    """

    weights: Dict[Tuple[int, int], float]
    biases: Dict[int, float]
    precisions: Dict[int, float]
    activations: Dict[int, np.ndarray]
    steps: StepSizes = StepSizes()
    acceptance: Dict[str, float] = field(default_factory=dict)

    def copy(self) -> "NlgbnState":
        # Activation arrays are never modified in place, so sharing them is safe
        return NlgbnState(dict(self.weights), dict(self.biases), dict(self.precisions),
                          dict(self.activations), self.steps, dict(self.acceptance))


def observed_columns(dag: OrderedDag) -> List[int]:
    """Observed node ids in data-column order."""
    return sorted(dag.observed)


def check_state(dag: OrderedDag, state: NlgbnState, data: Dataset):
    """
    Check that the network parameters match the graph and the data.

    Raises
    ------
    GraphError
        If weights, biases, precisions or activations do not match the graph's edges and nodes, or the
        observed nodes do not match the data columns.
    ParameterError
        If a precision is not positive.
    """
    nodes = set(dag.node_ids())
    if set(state.weights) != set(dag.edges):
        raise GraphError("Network weights do not match the graph edges.")
    for name in ("biases", "precisions", "activations"):
        if set(getattr(state, name)) != nodes:
            raise GraphError(f"Network {name} do not match the graph nodes.")
    if any(not rho > 0 for rho in state.precisions.values()):
        raise ParameterError("Noise precisions must be positive.")
    observed = observed_columns(dag)
    if len(observed) != data.d:
        raise GraphError(f"The graph has {len(observed)} observed nodes but the data has {data.d} columns.")
    for u in state.activations.values():
        if u.shape != (data.n,):
            raise GraphError("Activation arrays must hold one value per datum.")
    for j, k in enumerate(observed):
        if not np.array_equal(state.activations[k], data.rows[:, j]):
            raise GraphError(f"Activations of observed node {k} differ from data column {j}.")


def _node_log_lik(dag: OrderedDag, state: NlgbnState, i: int) -> float:
    u = state.activations[i]
    terms = _normal_logpdf(logit(u), _preactivation_mean(dag, state, i, len(u)), state.precisions[i]) - np.log(u) - np.log1p(-u)
    return math.fsum(terms)


def log_likelihood(dag: OrderedDag, state: NlgbnState, data: Dataset) -> float:
    """Data term of every node plus the parameter log priors."""
    check_state(dag, state, data)
    terms = [_node_log_lik(dag, state, i) for i in dag.node_ids()]
    terms.extend(float(stats.norm.logpdf(w)) for _, w in sorted(state.weights.items()))
    terms.extend(float(stats.norm.logpdf(state.biases[i])) for i in dag.node_ids())
    terms.extend(_log_precision_prior(state.precisions[i]) for i in dag.node_ids())
    return math.fsum(terms)


def log_joint(dag: OrderedDag, state: NlgbnState, data: Dataset, hp: Hyperparams) -> float:
    """
    Log joint density of the graph, the network parameters, the latent outputs and the data.

    The graph prior is the infinite-limit density; parameter priors are W ~ N(0, 1), b ~ N(0, 1) and
    rho ~ Gamma(0.5, 0.5).

    Raises
    ------
    GraphError
        If the state does not match the graph or the data.
    """
    return log_prob_infinite(dag, hp) + log_likelihood(dag, state, data)


def _accept(log_ratio, rng: np.random.Generator):
    # Vectorised Metropolis test; one uniform per proposal
    u = rng.random(np.shape(log_ratio))
    return np.where(np.asarray(log_ratio) >= 0, True, u < np.exp(np.minimum(log_ratio, 0.0)))


def update_params(
    dag: OrderedDag,
    state: NlgbnState,
    data: Dataset,
    rng: np.random.Generator,
    tune: bool = False,
    classes: Iterable[str] = PARAMETER_CLASSES,
) -> NlgbnState:
    """
    One sweep of single-site Gaussian random-walk Metropolis over the network.

    Every weight, bias and log precision is moved in turn, then every hidden node's preactivations
    are moved for all data at once (the per-datum updates are independent given the parameters).

    Parameters
    ----------
    dag : OrderedDag
        Current graph.
    state : NlgbnState
        Current network state; not modified.
    data : Dataset
        The rescaled data.
    rng : np.random.Generator
        Random stream of the chain.
    tune : bool, optional
        Adapt the step sizes towards the target acceptance rate after the sweep. Default is False.
    classes : Iterable[str], optional
        Subset of ("weights", "biases", "precisions", "activations") to update. Default is all.

    Returns
    -------
    NlgbnState
        The updated state with this sweep's acceptance rates.
    """
    classes = set(classes)
    unknown = classes - set(PARAMETER_CLASSES)
    if unknown:
        raise ValueError(f"Unknown parameter classes: {sorted(unknown)}")

    state = state.copy()
    steps = state.steps
    nodes = dag.node_ids()
    logits = {i: logit(state.activations[i]) for i in nodes}
    means = {i: _preactivation_mean(dag, state, i, data.n) for i in nodes}
    rates: Dict[str, float] = {}

    def data_term(i, mean, rho):
        return math.fsum(_normal_logpdf(logits[i], mean, rho))

    if "weights" in classes:
        accepted = 0
        for (k, i) in dag.edges:
            w = state.weights[(k, i)]
            w_new = w + steps.weights * rng.standard_normal()
            mean_new = means[i] + (w_new - w) * state.activations[k]
            log_ratio = (data_term(i, mean_new, state.precisions[i]) - data_term(i, means[i], state.precisions[i])
                         + float(stats.norm.logpdf(w_new) - stats.norm.logpdf(w)))
            if _accept(log_ratio, rng):
                state.weights[(k, i)], means[i] = w_new, mean_new
                accepted += 1
        rates["weights"] = accepted / dag.n_edges if dag.n_edges else math.nan

    if "biases" in classes:
        accepted = 0
        for i in nodes:
            b = state.biases[i]
            b_new = b + steps.biases * rng.standard_normal()
            mean_new = means[i] + (b_new - b)
            log_ratio = (data_term(i, mean_new, state.precisions[i]) - data_term(i, means[i], state.precisions[i])
                         + float(stats.norm.logpdf(b_new) - stats.norm.logpdf(b)))
            if _accept(log_ratio, rng):
                state.biases[i], means[i] = b_new, mean_new
                accepted += 1
        rates["biases"] = accepted / len(nodes)

    if "precisions" in classes:
        accepted = 0
        for i in nodes:
            rho = state.precisions[i]
            rho_new = rho * math.exp(steps.precisions * rng.standard_normal())
            if not (rho_new > 0 and math.isfinite(rho_new)):
                rng.random()
                continue
            # Walk on log rho, Jacobian included
            log_ratio = (data_term(i, means[i], rho_new) - data_term(i, means[i], rho)
                         + _log_precision_prior(rho_new) + math.log(rho_new)
                         - _log_precision_prior(rho) - math.log(rho))
            if _accept(log_ratio, rng):
                state.precisions[i] = rho_new
                accepted += 1
        rates["precisions"] = accepted / len(nodes)

    if "activations" in classes:
        hidden = sorted(dag.hidden, key=lambda k: (-dag.theta(k), k))
        accepted, proposed = 0, 0
        for k in hidden:
            a = logits[k]
            a_new = a + steps.activations * rng.standard_normal(a.shape)
            u_old = state.activations[k]
            u_new = np.where(a_new == a, u_old, np.clip(expit(a_new), _CLIP, 1 - _CLIP))
            a_new = np.where(a_new == a, a, logit(u_new))

            # In preactivation space the node's own density is a plain normal
            log_ratio = (_normal_logpdf(a_new, means[k], state.precisions[k])
                         - _normal_logpdf(a, means[k], state.precisions[k]))
            child_means = {}
            for c in sorted(dag.children(k)):
                child_means[c] = means[c] + state.weights[(k, c)] * (u_new - u_old)
                log_ratio = log_ratio + (_normal_logpdf(logits[c], child_means[c], state.precisions[c])
                                         - _normal_logpdf(logits[c], means[c], state.precisions[c]))
            mask = _accept(log_ratio, rng)
            state.activations[k] = np.where(mask, u_new, u_old)
            logits[k] = np.where(mask, a_new, a)
            for c, mean_c in child_means.items():
                means[c] = np.where(mask, mean_c, means[c])
            accepted += int(mask.sum())
            proposed += mask.size
        rates["activations"] = accepted / proposed if proposed else math.nan

    state.acceptance = rates
    if tune:
        state.steps = steps.adapted(rates)
    logger.debug("Parameter sweep acceptance: %s", {k: round(v, 3) for k, v in rates.items()})
    return state


def trans_dimensional_params(
    dag_old: OrderedDag,
    dag_new: OrderedDag,
    state: NlgbnState,
    data: Dataset,
    rng: np.random.Generator,
) -> Tuple[NlgbnState, float, float]:
    """
    Carry the network parameters over a structure change.

    New edges draw W ~ N(0, 1); new nodes draw b ~ N(0, 1), rho ~ Gamma(0.5, 0.5) and their outputs
    from the conditional prior given their parents. Removed edges and nodes drop their parameters.
    All draws follow the prior, so their densities cancel against the prior terms in the acceptance
    ratio.

    Returns
    -------
    Tuple[NlgbnState, float, float]
        The new state, the log density of the forward draws and the log density of the removed
        components under the reverse draw.
    """
    new = state.copy()
    old_nodes, new_nodes = set(dag_old.node_ids()), set(dag_new.node_ids())
    old_edges, new_edges = set(dag_old.edges), set(dag_new.edges)
    log_q_fwd, log_q_rev = [], []

    for edge in sorted(old_edges - new_edges):
        log_q_rev.append(float(stats.norm.logpdf(new.weights.pop(edge))))
    for k in sorted(old_nodes - new_nodes):
        log_q_rev.append(float(stats.norm.logpdf(state.biases[k])))
        log_q_rev.append(_log_precision_prior(state.precisions[k]))
        log_q_rev.append(_node_log_lik(dag_old, state, k))
        del new.biases[k], new.precisions[k], new.activations[k]

    # Parents before children so every conditional mean is available
    added = sorted(new_nodes - old_nodes, key=lambda k: (-dag_new.theta(k), k))
    for k in added:
        new.biases[k] = float(rng.standard_normal())
        new.precisions[k] = float(rng.gamma(_PRECISION_SHAPE, 1.0 / _PRECISION_RATE))
        log_q_fwd.append(float(stats.norm.logpdf(new.biases[k])))
        log_q_fwd.append(_log_precision_prior(new.precisions[k]))
    for edge in sorted(new_edges - old_edges):
        new.weights[edge] = float(rng.standard_normal())
        log_q_fwd.append(float(stats.norm.logpdf(new.weights[edge])))
    for k in added:
        mean = _preactivation_mean(dag_new, new, k, data.n)
        a = rng.normal(mean, 1.0 / math.sqrt(new.precisions[k]))
        new.activations[k] = np.clip(expit(a), _CLIP, 1 - _CLIP)
        log_q_fwd.append(_node_log_lik(dag_new, new, k))

    return new, math.fsum(log_q_fwd), math.fsum(log_q_rev)


def _preactivation_mean(dag: OrderedDag, state: NlgbnState, i: int, n: int) -> np.ndarray:
    mean = np.full(n, state.biases[i])
    for k in sorted(dag.parents(i)):
        mean = mean + state.weights[(k, i)] * state.activations[k]
    return mean


def initial_state(
    dag: OrderedDag,
    data: Dataset,
    rng: np.random.Generator,
    activation_init: str = "sample",
    steps: StepSizes = StepSizes(),
) -> NlgbnState:
    """
    Fresh network state for `dag`: standard normal weights and biases, unit precisions, observed
    outputs set to the data and hidden outputs drawn from (or set to the sigmoid of) their
    conditional mean.

    Raises
    ------
    ValueError
        If `activation_init` is neither "sample" nor "mean".
    GraphError
        If the number of observed nodes differs from the number of data columns.
    """
    if activation_init not in ("sample", "mean"):
        raise ValueError(f"'activation_init' must be 'sample' or 'mean', got {activation_init!r}.")
    observed = observed_columns(dag)
    if len(observed) != data.d:
        raise GraphError(f"The graph has {len(observed)} observed nodes but the data has {data.d} columns.")

    state = NlgbnState(weights={}, biases={}, precisions={}, activations={}, steps=steps)
    for edge in dag.edges:
        state.weights[edge] = float(rng.standard_normal())
    for i in dag.node_ids():
        state.biases[i] = float(rng.standard_normal())
        state.precisions[i] = 1.0
    for j, k in enumerate(observed):
        state.activations[k] = data.rows[:, j]
    for k in sorted(dag.hidden, key=lambda k: (-dag.theta(k), k)):
        mean = _preactivation_mean(dag, state, k, data.n)
        if activation_init == "mean":
            a = mean
        else:
            a = rng.normal(mean, 1.0 / math.sqrt(state.precisions[k]))
        state.activations[k] = np.clip(expit(a), _CLIP, 1 - _CLIP)
    return state


def export_params(state: NlgbnState, data: Dataset) -> dict:
    """JSON record of the network parameters and the data rescaling; activations are left out."""
    return {
        "weights": [[k, i, float(w)] for (k, i), w in sorted(state.weights.items())],
        "biases": [[i, float(b)] for i, b in sorted(state.biases.items())],
        "precisions": [[i, float(r)] for i, r in sorted(state.precisions.items())],
        "rescale": data.rescale_record(),
    }


class NlgbnLikelihood(LikelihoodHook):
    """
    Sigmoid-network likelihood of a dataset, plugged into the structure chain.

    The auxiliary state is an NlgbnState. Observed nodes map to data columns in id order.
    """

    def __init__(self, data: Dataset):
        if not isinstance(data, Dataset):
            raise TypeError(f"Expected a Dataset, got {type(data)}")
        self.data = data

    def log_likelihood(self, dag: OrderedDag, aux: NlgbnState) -> float:
        return log_likelihood(dag, aux, self.data)

    def adapt(self, dag_old, dag_new, aux, rng):
        return trans_dimensional_params(dag_old, dag_new, aux, self.data, rng)

    def update(self, dag, aux, rng, tune=False):
        return update_params(dag, aux, self.data, rng, tune=tune)

    def export(self, aux: NlgbnState) -> dict:
        return export_params(aux, self.data)


def generative_graph(n_observed: int) -> OrderedDag:
    """Graph of `n_observed` observed nodes pinned at order value 0, without hidden nodes."""
    dag = OrderedDag()
    for _ in range(n_observed):
        dag.add_node(0.0, NodeKind.OBSERVED)
    return dag


def fit_nlgbn(
    data: Dataset,
    iterations: int,
    rng: np.random.Generator,
    sink: Sink,
    hp: Hyperparams = Hyperparams(1.0, 1.0, 1.0),
    schedule: Optional[Schedule] = None,
    fix_hypers: bool = False,
    activation_init: str = "sample",
    chain: Optional[int] = None,
) -> MoveStats:
    """
    Simulate the posterior over graphs and network parameters given a dataset.

    All observed units sit at order value 0, so the data is explained by hidden units above them.
    Each sweep runs the structure moves, one parameter and activation sweep, and one hyperparameter
    sweep.

    Parameters
    ----------
    data : Dataset
        The rescaled training data.
    iterations : int
        Number of sweeps.
    rng : np.random.Generator
        Random stream of the chain.
    sink : Callable[[ChainSample], Any]
        Receives the thinned samples, network parameters included.
    hp : Hyperparams, optional
        Starting hyperparameters. Default is (1, 1, 1).
    schedule : Schedule, optional
        Moves per sweep, burn-in and thinning. Default is `Schedule()`.
    fix_hypers : bool, optional
        Keep `hp` fixed. Default is False.
    activation_init : str, optional
        "sample" or "mean", see `initial_state`. Default is "sample".
    chain : int, optional
        Chain index recorded in the samples.

    Returns
    -------
    MoveStats
        Proposal and acceptance counts.
    """
    schedule = schedule or Schedule()
    dag = generative_graph(data.d)
    target = TargetSpec(hp=hp, likelihood=NlgbnLikelihood(data), pin_observed=True, fix_hypers=fix_hypers)
    state = ChainState.start(dag, target, aux=initial_state(dag, data, rng, activation_init=activation_init))
    logger.info("Fitting %d observed units on %d data points", data.d, data.n)
    return run_chain(target, state, schedule, iterations, rng, sink, chain=chain)
