import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from typing import Any, Callable, List, Optional, Union

import numpy as np

from ICPydags.chain_state import ChainState, MoveStats, TargetSpec
from ICPydags.distribution import log_prob_infinite
from ICPydags.hyper_moves import resample_hypers
from ICPydags.ordered_dag import Hyperparams, OrderedDag, count_stats
from ICPydags.structure_moves import birth_death_move, gibbs_edges, order_move
from ICPydags.utils import make_rng

logger = logging.getLogger(__name__)


@dataclass
class Schedule:
    """
    Moves per sweep and output thinning.

    Per-sweep counts left as None are fixed once, when the run starts, to the number of active nodes
    K+ of the starting graph (at least 1). They do not follow K+ during the run, so the repeat counts
    never depend on the current graph.
    """

    gibbs: Optional[int] = None
    birth_death: Optional[int] = None
    order: Optional[int] = None
    hypers: int = 1
    params: int = 1
    thin: int = 1
    burnin: int = 0
    progress_every: int = 100

    def __post_init__(self):
        for name in ("gibbs", "birth_death", "order"):
            value = getattr(self, name)
            if value is not None and value < 0:
                raise ValueError(f"Schedule count '{name}' must be nonnegative, got {value}.")
        if self.hypers < 0 or self.params < 0:
            raise ValueError("Schedule counts must be nonnegative.")
        if self.thin < 1:
            raise ValueError(f"'thin' must be at least 1, got {self.thin}.")
        if self.burnin < 0:
            raise ValueError(f"'burnin' must be nonnegative, got {self.burnin}.")

    def resolved(self, k_plus: int) -> "Schedule":
        """Copy of the schedule with every per-sweep count left as None set to `max(k_plus, 1)`."""
        default = max(int(k_plus), 1)
        return replace(
            self,
            gibbs=default if self.gibbs is None else self.gibbs,
            birth_death=default if self.birth_death is None else self.birth_death,
            order=default if self.order is None else self.order,
        )


@dataclass
class ChainSample:
    """One serialised posterior draw."""

    iter: int
    logp: float
    graph: dict
    hypers: dict
    params: Optional[dict] = None
    chain: Optional[int] = None

    @classmethod
    def from_state(cls, iteration: int, state: ChainState, params: Optional[dict] = None, chain: Optional[int] = None):
        return cls(
            iter=iteration,
            logp=float(state.log_joint),
            graph=state.dag.to_record(),
            hypers=state.hp.to_record(),
            params=params,
            chain=chain,
        )

    def to_record(self) -> dict:
        record = {"iter": self.iter, "logp": self.logp, "graph": self.graph, "hypers": self.hypers}
        if self.params is not None:
            record["params"] = self.params
        if self.chain is not None:
            record["chain"] = self.chain
        return record

    @property
    def dag(self) -> OrderedDag:
        return OrderedDag.from_record(self.graph)

    @property
    def hp(self) -> Hyperparams:
        return Hyperparams.from_record(self.hypers)


Sink = Callable[[ChainSample], Any]


def _sweep(state: ChainState, target: TargetSpec, schedule: Schedule, rng: np.random.Generator,
           stats: MoveStats, tune: bool) -> ChainState:
    # Counts are resolved before the run, see Schedule.resolved
    for _ in range(schedule.gibbs):
        state = gibbs_edges(state, target, rng, stats=stats)
    # Trans-dimensional moves then order values
    for _ in range(schedule.birth_death):
        state, _ = birth_death_move(state, target, rng, stats=stats)
    for _ in range(schedule.order):
        state, _ = order_move(state, target, rng, stats=stats)

    # Likelihood parameters given the new structure
    if target.likelihood is not None:
        for _ in range(schedule.params):
            aux = target.likelihood.update(state.dag, state.aux, rng, tune=tune)
            state = replace(state, aux=aux, log_lik=target.likelihood.log_likelihood(state.dag, aux))

    # Hyperparameters last; the likelihood does not depend on them
    if not target.fix_hypers:
        for _ in range(schedule.hypers):
            hp = resample_hypers(state, rng, target=target, stats=stats)
            if hp != state.hp:
                state = replace(state, hp=hp, log_prior=log_prob_infinite(state.dag, hp))
    return state


def run_chain(
    target: TargetSpec,
    init: Union[OrderedDag, ChainState],
    schedule: Schedule,
    iterations: int,
    rng: np.random.Generator,
    sink: Sink,
    chain: Optional[int] = None,
) -> MoveStats:
    """
    Run a reversible-jump chain and emit thinned samples.

    Each sweep applies Gibbs edge updates, birth/death proposals and order moves, then the likelihood
    parameter sweep and the hyperparameter sweep when applicable.

    Parameters
    ----------
    target : TargetSpec
        What to sample from.
    init : OrderedDag or ChainState
        Starting graph (all hidden nodes active), or a full state carrying the likelihood's auxiliary
        state.
    schedule : Schedule
        Moves per sweep, burn-in and thinning.
    iterations : int
        Number of sweeps after the initial state.
    rng : np.random.Generator
        Random stream; a fixed seed makes the output bit-identical.
    sink : Callable[[ChainSample], Any]
        Receives every emitted sample. The initial state is emitted as iteration 0 unless there is a
        burn-in; afterwards every `thin`-th sweep past the burn-in is emitted.
    chain : int, optional
        Chain index recorded in each sample.

    Returns
    -------
    MoveStats
        Proposal and acceptance counts of every move type.

    Raises
    ------
    OSError
        Re-raised from the sink; samples already written stay in place.
    """
    if isinstance(iterations, bool) or not isinstance(iterations, (int, np.integer)) or iterations < 0:
        raise ValueError(f"'iterations' must be a nonnegative integer, got {iterations!r}.")
    # Start state and the per-sweep move counts, fixed for the whole run
    state = init if isinstance(init, ChainState) else ChainState.start(init, target)
    schedule = schedule.resolved(count_stats(state.dag).k_plus)
    logger.debug("Sweep counts: gibbs=%d birth_death=%d order=%d", schedule.gibbs, schedule.birth_death, schedule.order)
    hook = target.likelihood
    stats = MoveStats()

    def emit(iteration: int):
        params = hook.export(state.aux) if hook is not None else None
        try:
            sink(ChainSample.from_state(iteration, state, params=params, chain=chain))
        except OSError:
            logger.error("Writing sample %d failed; stopping the chain", iteration)
            raise

    # Without burn-in the initial state is part of the output
    if schedule.burnin == 0:
        emit(0)

    for t in range(1, int(iterations) + 1):
        state = _sweep(state, target, schedule, rng, stats, tune=t <= schedule.burnin)
        if t > schedule.burnin and (t - schedule.burnin) % schedule.thin == 0:
            emit(t)
        # Progress report
        if schedule.progress_every and t % schedule.progress_every == 0:
            counts = count_stats(state.dag)
            logger.info(
                "chain %s sweep %d: K+=%d E+=%d logp=%.4f birth=%.3f death=%.3f order=%.3f",
                chain if chain is not None else 0, t, counts.k_plus, counts.e_plus, state.log_joint,
                stats.rate("birth"), stats.rate("death"), stats.rate("order"),
            )

    if not math.isfinite(state.log_joint):
        logger.warning("Chain ended in a state with non-finite log density %s", state.log_joint)
    return stats


def run_chains(
    target: TargetSpec,
    init: Union[OrderedDag, Callable[[int], Union[OrderedDag, ChainState]]],
    schedule: Schedule,
    iterations: int,
    n_chains: int,
    base_seed: int,
    sink_factory: Callable[[int], Sink],
    max_workers: Optional[int] = None,
) -> List[MoveStats]:
    """
    Run `n_chains` independent chains on a thread pool.

    Chain c uses seed base_seed + c and writes to sink_factory(c). `init` is either a shared starting
    graph (copied per chain) or a callable building chain c's starting state.
    """
    if n_chains < 1:
        raise ValueError(f"'n_chains' must be at least 1, got {n_chains}.")

    def one(c: int) -> MoveStats:
        start = init(c) if callable(init) else init.copy()
        return run_chain(target, start, schedule, iterations, make_rng(base_seed + c), sink_factory(c), chain=c)

    with ThreadPoolExecutor(max_workers=max_workers or n_chains) as pool:
        results = list(pool.map(one, range(n_chains)))
    logger.info("Finished %d chains", n_chains)
    return results
