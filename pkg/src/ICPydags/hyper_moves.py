import logging
import math
import warnings
from dataclasses import replace
from typing import Optional

import numpy as np
from scipy import stats

from ICPydags.chain_state import ChainState, HyperPrior, MoveStats, TargetSpec
from ICPydags.distribution import log_prob_infinite
from ICPydags.ordered_dag import Hyperparams

logger = logging.getLogger(__name__)


def log_hyper_prior(name: str, value: float, prior: HyperPrior = HyperPrior()) -> float:
    """
    Log prior density of log(value), the scale the random walk moves on.

    gamma and phi follow Gamma(shape, rate); for alpha the Gamma prior sits on 1/alpha. In both cases
    the density of the logarithm is the Gamma log density at the transformed value plus its logarithm.
    """
    x = 1.0 / value if name == "alpha" else value
    return float(stats.gamma.logpdf(x, a=prior.shape, scale=1.0 / prior.rate)) + math.log(x)


def resample_hypers(
    state: ChainState,
    rng: np.random.Generator,
    target: Optional[TargetSpec] = None,
    stats: Optional[MoveStats] = None,
) -> Hyperparams:
    """
    One Metropolis-Hastings sweep over alpha, gamma and phi.

    Each hyperparameter in turn takes a Gaussian random-walk step on the log scale and is accepted
    under its prior times the graph density. The likelihood does not depend on the hyperparameters and
    cancels.

    Parameters
    ----------
    state : ChainState
        Current chain state; only its graph and hyperparameters are read.
    rng : np.random.Generator
        Random stream of the chain.
    target : TargetSpec, optional
        Supplies the priors and the step size. Default uses Gamma(0.5, 0.5) priors and step 0.5.
    stats : MoveStats, optional
        Counter receiving "alpha", "gamma" and "phi" records.

    Returns
    -------
    Hyperparams
        The updated hyperparameters.

    Notes
    -----
    A log-scale walk can neither reach nor leave phi = 0, so a chain started at phi = 0 keeps it and a
    warning is issued.
    """
    # Priors and step size come from the target when one is given
    prior = target.hyper_prior if target is not None else HyperPrior()
    step = target.hyper_step if target is not None else 0.5
    hp = state.hp
    current = log_prob_infinite(state.dag, hp)

    for name in ("alpha", "gamma", "phi"):
        value = getattr(hp, name)
        if value == 0:
            warnings.warn(f"'{name}' is 0 and cannot be resampled on the log scale; it stays fixed.", UserWarning)
            continue

        # Gaussian step on the log scale
        proposed_value = math.exp(math.log(value) + step * rng.standard_normal())
        u = rng.random()
        if not (proposed_value > 0 and math.isfinite(proposed_value)):
            accepted = False
        else:
            proposal = replace(hp, **{name: proposed_value})
            log_p = log_prob_infinite(state.dag, proposal)
            # Graph density ratio times the prior ratio on the log scale
            log_ratio = math.fsum([
                log_p, -current,
                log_hyper_prior(name, proposed_value, prior), -log_hyper_prior(name, value, prior),
            ])
            accepted = log_ratio >= 0 or u < math.exp(log_ratio)
            if accepted:
                hp, current = proposal, log_p
        if stats is not None:
            stats.record(name, accepted)

    logger.debug("Hyperparameters now alpha=%.4f gamma=%.4f phi=%.4f", hp.alpha, hp.gamma, hp.phi)
    return hp
