import json
import logging
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from contextlib import ExitStack
from typing import List, Optional

from ICPydags.chain_io import ChainWriter, merge_chains, read_chain
from ICPydags.chain_state import TargetSpec
from ICPydags.config import RunConfig, UsageError, parse_config
from ICPydags.convnet_mapping import arch_statistics, dag_to_arch
from ICPydags.fantasy import fantasy
from ICPydags.hellinger import hellinger
from ICPydags.hyper_study import complexity_study, density_study, hyper_study
from ICPydags.nlgbn import fit_nlgbn, generative_graph
from ICPydags.ordered_dag import Hyperparams, OrderedDag
from ICPydags.prior_sampler import RANDOM, sample_prior_many
from ICPydags.read_dataset import read_dataset, read_matrix, write_dataset
from ICPydags.run_chain import Schedule, run_chain, run_chains
from ICPydags.utils import configure_logging, make_rng

logger = logging.getLogger(__name__)


def chain_path(out: str, chain: int) -> str:
    """Per-chain output file: run.jsonl becomes run.chain{c}.jsonl."""
    stem, extension = os.path.splitext(out)
    return f"{stem}.chain{chain}{extension or '.jsonl'}"


def _hypers(config: RunConfig) -> Hyperparams:
    return Hyperparams(float(config.alpha), float(config.gamma), float(config.phi))


def _schedule(config: RunConfig) -> Schedule:
    return Schedule(burnin=config.burnin, thin=config.thin)


def _star_thetas(config: RunConfig) -> list:
    if config.star_thetas is not None:
        try:
            return [float(v) for v in config.star_thetas.split(",") if v.strip()]
        except ValueError as e:
            raise UsageError(f"--star-thetas must be comma-separated numbers: {e}") from e
    return [RANDOM] * config.stars


def cmd_sample_prior(config: RunConfig) -> int:
    graphs = sample_prior_many(
        _hypers(config), _star_thetas(config), config.draws, config.seed,
        ibp_restricted=config.ibp_restricted, exact_backward=config.exact_backward,
    )
    with ChainWriter(config.out) as writer:
        for dag in graphs:
            writer.write(dag.to_record())
    logger.info("Wrote %d prior graphs to %s", writer.count, config.out)
    return 0


def cmd_mcmc(config: RunConfig) -> int:
    target = TargetSpec(hp=_hypers(config), fix_hypers=config.fix_hypers)
    init = generative_graph(config.stars_theta0)
    schedule = _schedule(config)
    # One chain writes to --out, several chains to numbered files
    if config.chains == 1:
        with ChainWriter(config.out) as writer:
            stats = run_chain(target, init, schedule, config.iters, make_rng(config.seed), writer)
        logger.info("Acceptance rates: %s", stats.to_record())
        return 0
    with ExitStack() as stack:
        writers = [stack.enter_context(ChainWriter(chain_path(config.out, c))) for c in range(config.chains)]
        run_chains(target, init, schedule, config.iters, config.chains, config.seed, lambda c: writers[c])
    return 0


def cmd_fit(config: RunConfig) -> int:
    data = read_dataset(config.data, margin=config.margin)
    paths = [config.out] if config.chains == 1 else [chain_path(config.out, c) for c in range(config.chains)]

    # Chain c runs with seed + c
    def one(c: int):
        with ChainWriter(paths[c]) as writer:
            return fit_nlgbn(
                data, config.iters, make_rng(config.seed + c), writer, hp=_hypers(config),
                schedule=_schedule(config), fix_hypers=config.fix_hypers,
                activation_init=config.activation_init, chain=c if config.chains > 1 else None,
            )

    with ThreadPoolExecutor(max_workers=config.chains) as pool:
        results = list(pool.map(one, range(config.chains)))
    for c, stats in enumerate(results):
        logger.info("Chain %d acceptance rates: %s", c, stats.to_record())
    return 0


def cmd_fantasy(config: RunConfig) -> int:
    samples = [sample for path in config.chains for sample in read_chain(path)]
    data = fantasy(samples, config.n, make_rng(config.seed))
    write_dataset(data, config.out, raw=True)
    return 0


def cmd_hellinger(config: RunConfig) -> int:
    estimate = hellinger(read_matrix(config.a), read_matrix(config.b), estimator=config.estimator,
                         bins=config.bins, k=config.k)
    print(repr(estimate.value))
    return 0


def cmd_hyper_study(config: RunConfig) -> int:
    if config.kind == "grid":
        table = hyper_study(config.alphas, config.gammas, config.n_obs, config.draws, config.seed,
                            phi=config.phi, max_workers=config.workers)
    elif config.kind == "complexity":
        table = complexity_study(config.alphas, range(1, config.n_obs + 1), config.draws, config.seed,
                                 gamma=config.gammas[0], phi=config.phi)
    else:
        table = density_study(config.alphas, config.target_k_plus, config.n_obs, config.draws, config.seed,
                              phi=config.phi)
    table.write_csv(config.out)
    return 0


def cmd_dag2cnn(config: RunConfig) -> int:
    with open(config.graph, "r", encoding="utf-8") as handle:
        record = json.load(handle)
    # Accept a bare graph record or a chain sample holding one
    if isinstance(record, dict) and "graph" in record:
        record = record["graph"]
    dag = OrderedDag.from_record(record)
    spec = dag_to_arch(dag, config.bins, config.n0, config.pixels, kernel=config.kernel, n_classes=config.classes)
    out = spec.to_record()
    if config.stats:
        out["statistics"] = arch_statistics(spec)
    with open(config.out, "w", encoding="utf-8") as handle:
        json.dump(out, handle, indent=2)
        handle.write("\n")
    return 0


def cmd_merge(config: RunConfig) -> int:
    merge_chains(config.inputs, config.out)
    return 0


COMMAND_HANDLERS = {
    "sample-prior": cmd_sample_prior,
    "mcmc": cmd_mcmc,
    "fit": cmd_fit,
    "fantasy": cmd_fantasy,
    "hellinger": cmd_hellinger,
    "hyper-study": cmd_hyper_study,
    "dag2cnn": cmd_dag2cnn,
    "merge": cmd_merge,
}


def main(argv: Optional[List[str]] = None) -> int:
    """
    Entry point of the `icp` command.

    Returns 0 on success, 2 on a usage error and 1 on any other failure. Progress and errors go to
    standard error; only `hellinger` prints its result to standard output.
    """
    # Parse and validate; argparse exits with 2 on its own errors
    configure_logging()
    try:
        config = parse_config(argv)
    except SystemExit as e:
        return e.code if isinstance(e.code, int) else 2
    except UsageError as e:
        print(f"icp: error: {e}", file=sys.stderr)
        return 2

    # Dispatch to the handler of the subcommand
    logger.info("Running '%s' with seed %d", config.command, config.seed)
    try:
        return COMMAND_HANDLERS[config.command](config)
    except UsageError as e:
        print(f"icp: error: {e}", file=sys.stderr)
        return 2
    except Exception as e:
        logger.error("'%s' failed: %s", config.command, e)
        logger.debug("Traceback", exc_info=True)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
