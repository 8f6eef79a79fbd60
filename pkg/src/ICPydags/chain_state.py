import math
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from typing import Any, Dict, Optional, Tuple

import numpy as np

from ICPydags.distribution import log_prob_infinite
from ICPydags.ordered_dag import Hyperparams, OrderedDag, check_dag


class LikelihoodHook(ABC):
    """
    Contract for a data likelihood plugged into the structure chain.

    `aux` is whatever auxiliary state the likelihood needs (parameters, latent variables). Hooks must
    be deterministic given their inputs and random stream, and must not keep per-chain state on
    `self`, so a single hook can serve several chains at once.
    """

    @abstractmethod
    def log_likelihood(self, dag: OrderedDag, aux: Any) -> float:
        """Log likelihood of the data, parameter priors included."""

    @abstractmethod
    def adapt(self, dag_old: OrderedDag, dag_new: OrderedDag, aux: Any, rng: np.random.Generator) -> Tuple[Any, float, float]:
        """
        Carry `aux` over to a proposed graph.

        Returns the new auxiliary state with the log densities of the forward draw of any new
        components and of the reverse draw of removed ones.
        """

    def update(self, dag: OrderedDag, aux: Any, rng: np.random.Generator, tune: bool = False) -> Any:
        """Within-model sweep over the auxiliary state; the default leaves it unchanged."""
        return aux

    def export(self, aux: Any) -> Optional[dict]:
        """JSON-serialisable record of `aux`, or None."""
        return None


@dataclass(frozen=True)
class HyperPrior:
    """Gamma(shape, rate) priors on gamma, phi and 1/alpha."""

    shape: float = 0.5
    rate: float = 0.5


@dataclass(frozen=True)
class TargetSpec:
    """
    What a chain samples from.

    Parameters
    ----------
    hp : Hyperparams
        Starting (or fixed) hyperparameters.
    likelihood : LikelihoodHook, optional
        Data likelihood; None samples the prior.
    pin_observed : bool
        Never move the order values of observed nodes.
    fix_hypers : bool
        Keep `hp` fixed instead of resampling it.
    hyper_prior : HyperPrior
        Priors used when resampling the hyperparameters.
    hyper_step : float
        Standard deviation of the log-scale random walk on each hyperparameter.
    debug : bool
        Check every graph invariant after each accepted move.
    """

    hp: Hyperparams
    likelihood: Optional[LikelihoodHook] = None
    pin_observed: bool = True
    fix_hypers: bool = False
    hyper_prior: HyperPrior = HyperPrior()
    hyper_step: float = 0.5
    debug: bool = False


@dataclass
class ChainState:
    """Current graph, hyperparameters and auxiliary likelihood state with cached log terms."""

    dag: OrderedDag
    hp: Hyperparams
    aux: Any = None
    log_prior: float = math.nan
    log_lik: float = 0.0

    @classmethod
    def start(cls, dag: OrderedDag, target: TargetSpec, aux: Any = None) -> "ChainState":
        check_dag(dag, require_active=True)
        log_lik = target.likelihood.log_likelihood(dag, aux) if target.likelihood is not None else 0.0
        return cls(dag=dag, hp=target.hp, aux=aux, log_prior=log_prob_infinite(dag, target.hp), log_lik=log_lik)

    @property
    def log_joint(self) -> float:
        return self.log_prior + self.log_lik


@dataclass
class MoveStats:
    """Proposal and acceptance counters per move type."""

    proposals: Dict[str, int] = field(default_factory=dict)
    acceptances: Dict[str, int] = field(default_factory=dict)

    def record(self, move: str, accepted: bool):
        self.proposals[move] = self.proposals.get(move, 0) + 1
        self.acceptances[move] = self.acceptances.get(move, 0) + int(bool(accepted))

    def rate(self, move: str) -> float:
        n = self.proposals.get(move, 0)
        return self.acceptances.get(move, 0) / n if n else math.nan

    def merge(self, other: "MoveStats") -> "MoveStats":
        merged = MoveStats(dict(self.proposals), dict(self.acceptances))
        for move, n in other.proposals.items():
            merged.proposals[move] = merged.proposals.get(move, 0) + n
            merged.acceptances[move] = merged.acceptances.get(move, 0) + other.acceptances.get(move, 0)
        return merged

    def to_record(self) -> dict:
        return {m: {"proposals": self.proposals[m], "acceptances": self.acceptances.get(m, 0)} for m in sorted(self.proposals)}
