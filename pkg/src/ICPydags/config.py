import argparse
import json
import logging
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional

logger = logging.getLogger(__name__)

DEFAULT_SEED = 2019

# Values used when neither the command line nor the config file sets an option
_DEFAULTS: Dict[str, Dict[str, Any]] = {
    "sample-prior": {"alpha": 1.0, "gamma": 1.0, "phi": 1.0, "draws": 1, "ibp_restricted": False,
                     "exact_backward": False},
    "mcmc": {"alpha": 1.0, "gamma": 1.0, "phi": 1.0, "fix_hypers": False, "stars_theta0": 1, "iters": 1000,
             "burnin": 0, "thin": 1, "chains": 1},
    "fit": {"alpha": 1.0, "gamma": 1.0, "phi": 1.0, "fix_hypers": False, "iters": 1000, "burnin": 0, "thin": 1,
            "chains": 1, "activation_init": "sample", "margin": 0.05},
    "fantasy": {"n": 2000},
    "hellinger": {"bins": 30, "k": 5, "estimator": "auto"},
    "hyper-study": {"kind": "grid", "alphas": [1.0], "gammas": [1.0], "draws": 1000, "n_obs": 10, "phi": 1.0},
    "dag2cnn": {"bins": 5, "n0": 4, "pixels": 784, "kernel": 3, "classes": 10, "stats": False},
    "merge": {},
}

_REQUIRED: Dict[str, List[str]] = {
    "sample-prior": ["out"],
    "mcmc": ["out"],
    "fit": ["data", "out"],
    "fantasy": ["chains", "out"],
    "hellinger": ["a", "b"],
    "hyper-study": ["out"],
    "dag2cnn": ["graph", "out"],
    "merge": ["inputs", "out"],
}

# Lower bounds of numeric options
_MINIMUM = {
    "draws": 1, "stars": 1, "stars_theta0": 1, "iters": 0, "burnin": 0, "thin": 1, "n": 1, "bins": 1, "k": 1,
    "n_obs": 1, "n0": 0, "pixels": 1, "kernel": 1, "classes": 1, "workers": 1,
}


class UsageError(ValueError):
    """Invalid command line or config file; the CLI exits with status 2."""


@dataclass
class RunConfig:
    """
    Resolved settings of one CLI invocation.

    Options are reachable as attributes (`config.alpha`); options with no value resolve to None.
    """

    command: str
    seed: int = DEFAULT_SEED
    options: Dict[str, Any] = field(default_factory=dict)

    def __getattr__(self, name: str):
        if name.startswith("__"):
            raise AttributeError(name)
        try:
            return self.__dict__["options"].get(name)
        except KeyError:
            raise AttributeError(name) from None

    def to_record(self) -> dict:
        return {"command": self.command, "seed": self.seed, **self.options}


def _hyper_options(parser: argparse.ArgumentParser, infer: bool = True):
    parser.add_argument("--alpha", type=float, default=None, help="Mass parameter (default 1).")
    parser.add_argument("--gamma", type=float, default=None, help="Beta Process concentration (default 1).")
    parser.add_argument("--phi", type=float, default=None, help="Observed-node popularity boost (default 1).")
    if infer:
        parser.add_argument("--fix-hypers", action="store_true", default=None,
                            help="Keep the hyperparameters fixed instead of inferring them.")


def _chain_options(parser: argparse.ArgumentParser):
    parser.add_argument("--iters", type=int, default=None, help="Number of sweeps (default 1000).")
    parser.add_argument("--burnin", type=int, default=None, help="Sweeps discarded before output (default 0).")
    parser.add_argument("--thin", type=int, default=None, help="Keep every thin-th sweep (default 1).")
    parser.add_argument("--chains", type=int, default=None,
                        help="Independent chains; chain c uses seed + c and writes OUT.chain{c}.jsonl.")
    parser.add_argument("--out", default=None, help="Output JSONL file.")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None, help=f"Base random seed (default {DEFAULT_SEED}).")
    common.add_argument("--config", default=None, help="JSON file with default option values.")

    parser = argparse.ArgumentParser(
        prog="icp",
        description="Priors, posterior inference and evaluation for ordered DAGs with unbounded hidden nodes.",
    )
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")
    sub.required = True

    p = sub.add_parser("sample-prior", parents=[common], help="Draw graphs from the prior.")
    _hyper_options(p, infer=False)
    stars = p.add_mutually_exclusive_group()
    stars.add_argument("--stars", type=int, default=None, help="Number of observed nodes at random order values.")
    stars.add_argument("--star-thetas", default=None, help="Comma-separated order values of the observed nodes.")
    p.add_argument("--draws", type=int, default=None, help="Number of graphs (default 1).")
    p.add_argument("--ibp-restricted", action="store_true", default=None,
                   help="Observed nodes at 0, hidden nodes at 1.")
    p.add_argument("--exact-backward", action="store_true", default=None,
                   help="Draw the backward connection count from its exact Beta-Binomial law.")
    p.add_argument("--out", default=None, help="Output JSONL file, one graph per line.")

    p = sub.add_parser("mcmc", parents=[common], help="Simulate the prior with the reversible-jump chain.")
    _hyper_options(p)
    p.add_argument("--stars-theta0", type=int, default=None, help="Observed nodes pinned at order value 0.")
    _chain_options(p)

    p = sub.add_parser("fit", parents=[common], help="Fit a sigmoid belief network to a dataset.")
    _hyper_options(p)
    p.add_argument("--data", default=None, help="Training data (.csv, .tsv, .txt or .parquet).")
    p.add_argument("--margin", type=float, default=None, help="Distance kept from 0 and 1 after rescaling.")
    p.add_argument("--activation-init", choices=["sample", "mean"], default=None,
                   help="How hidden activations start (default sample).")
    _chain_options(p)

    p = sub.add_parser("fantasy", parents=[common], help="Generate data from fitted networks.")
    p.add_argument("--chains", nargs="+", default=None, help="Chain files written by 'fit'.")
    p.add_argument("--n", type=int, default=None, help="Number of points (default 2000).")
    p.add_argument("--out", default=None, help="Output CSV file.")

    p = sub.add_parser("hellinger", parents=[common], help="Hellinger distance between two samples.")
    p.add_argument("--a", default=None, help="First sample file.")
    p.add_argument("--b", default=None, help="Second sample file.")
    p.add_argument("--bins", type=int, default=None, help="Histogram bins per dimension (default 30).")
    p.add_argument("--k", type=int, default=None, help="Neighbours of the k-NN estimator (default 5).")
    p.add_argument("--estimator", choices=["auto", "histogram", "knn"], default=None)

    p = sub.add_parser("hyper-study", parents=[common], help="Monte Carlo study of prior complexity.")
    p.add_argument("--kind", choices=["grid", "complexity", "density"], default=None,
                   help="grid: E[K+], E[E+] over (alpha, gamma); complexity: hidden nodes against the "
                        "number of observables; density: E[E+] against alpha at fixed E[K+].")
    p.add_argument("--alphas", type=float, nargs="+", default=None)
    p.add_argument("--gammas", type=float, nargs="+", default=None)
    p.add_argument("--phi", type=float, default=None)
    p.add_argument("--draws", type=int, default=None, help="Draws per grid point (default 1000).")
    p.add_argument("--n-obs", type=int, default=None,
                   help="Observed nodes; for --kind complexity every count from 1 to N is used.")
    p.add_argument("--target-k-plus", type=float, default=None, help="E[K+] matched by --kind density.")
    p.add_argument("--workers", type=int, default=None, help="Threads for --kind grid.")
    p.add_argument("--out", default=None, help="Output CSV file.")

    p = sub.add_parser("dag2cnn", parents=[common], help="Map a graph to a convolutional architecture.")
    p.add_argument("--graph", default=None, help="Graph record or chain sample (JSON).")
    p.add_argument("--bins", type=int, default=None, help="Order-value bins (default 5).")
    p.add_argument("--n0", type=int, default=None, help="Channels added to every tensor (default 4).")
    p.add_argument("--pixels", type=int, default=None, help="Pixels of the input tensor (default 784).")
    p.add_argument("--kernel", type=int, default=None, help="Convolution kernel size (default 3).")
    p.add_argument("--classes", type=int, default=None, help="Width of the output layer (default 10).")
    p.add_argument("--stats", action="store_true", default=None, help="Add size statistics to the output.")
    p.add_argument("--out", default=None, help="Output JSON file.")

    p = sub.add_parser("merge", parents=[common], help="Concatenate chain files.")
    p.add_argument("--inputs", nargs="+", default=None)
    p.add_argument("--out", default=None)

    return parser


def _read_config_file(path: str) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as handle:
            values = json.load(handle)
    except (OSError, json.JSONDecodeError) as e:
        raise UsageError(f"Cannot read config file '{path}': {e}") from e
    if not isinstance(values, dict):
        raise UsageError(f"Config file '{path}' must hold a JSON object.")
    return {str(key).replace("-", "_"): value for key, value in values.items()}


def _coerce(name: str, value: Any, action: argparse.Action) -> Any:
    # Config file values go through the same conversion as command-line strings
    if isinstance(action, argparse._StoreTrueAction):
        if not isinstance(value, bool):
            raise UsageError(f"Config value '{name}' must be true or false, got {value!r}.")
        return value
    convert = action.type or str

    def one(v):
        if isinstance(v, bool) or isinstance(v, (list, dict)):
            raise UsageError(f"Config value '{name}' has the wrong type: {v!r}.")
        if convert is int and isinstance(v, float) and not v.is_integer():
            raise UsageError(f"Config value '{name}' must be an integer, got {v!r}.")
        try:
            converted = convert(int(v) if convert is int and isinstance(v, float) else v)
        except (TypeError, ValueError) as e:
            raise UsageError(f"Invalid config value for '{name}': {v!r}.") from e
        if action.choices is not None and converted not in action.choices:
            raise UsageError(f"Config value '{name}' must be one of {list(action.choices)}, got {v!r}.")
        return converted

    if action.nargs in ("+", "*"):
        values = value if isinstance(value, list) else [value]
        if not values:
            raise UsageError(f"Config value '{name}' must not be empty.")
        return [one(v) for v in values]
    return one(value)


def _validate(command: str, options: Dict[str, Any]):
    for name, minimum in _MINIMUM.items():
        value = options.get(name)
        if value is not None and value < minimum:
            raise UsageError(f"--{name.replace('_', '-')} must be at least {minimum}, got {value}.")
    for name in ("alpha", "gamma"):
        value = options.get(name)
        if value is not None and not value > 0:
            raise UsageError(f"--{name} must be positive, got {value}.")
    if options.get("phi") is not None and not options["phi"] >= 0:
        raise UsageError(f"--phi must be nonnegative, got {options['phi']}.")
    for name in ("alphas", "gammas"):
        if options.get(name) is not None and not all(v > 0 for v in options[name]):
            raise UsageError(f"--{name} must all be positive.")
    margin = options.get("margin")
    if margin is not None and not 0 < margin < 0.5:
        raise UsageError(f"--margin must lie in (0, 0.5), got {margin}.")

    if command == "sample-prior":
        if options.get("stars") is not None and options.get("star_thetas") is not None:
            raise UsageError("Give either --stars or --star-thetas, not both.")
        if options.get("stars") is None and options.get("star_thetas") is None:
            raise UsageError("One of --stars or --star-thetas is required.")
    if command == "hyper-study" and options.get("kind") == "density" and options.get("target_k_plus") is None:
        raise UsageError("--kind density requires --target-k-plus.")

    missing = [name for name in _REQUIRED[command] if options.get(name) is None]
    if missing:
        raise UsageError(f"Missing required options for '{command}': "
                         + ", ".join("--" + m.replace("_", "-") for m in missing))


def parse_config(argv: Optional[List[str]] = None, config_file: Optional[str] = None) -> RunConfig:
    """
    Resolve the settings of one invocation.

    Precedence is: command-line flag, then config file, then the command's defaults. The config file
    is a JSON object keyed by long option names ("-" and "_" are interchangeable); it comes from
    `config_file` or from the --config flag.

    Parameters
    ----------
    argv : List[str], optional
        Command-line arguments without the program name.
    config_file : str, optional
        Config file used when --config is not given.

    Returns
    -------
    RunConfig
        The command, the seed (always set) and every option of the command.

    Raises
    ------
    SystemExit
        From argparse, for unparseable command lines (status 2) and --help (status 0).
    UsageError
        For unknown config keys, invalid values and missing required options.

    Examples
    --------
    >>> parse_config(["hellinger", "--a", "x.csv", "--b", "y.csv", "--seed", "42"]).seed
    42
    """
    parser = build_parser()
    args = parser.parse_args(argv)
    command = args.command
    flags = {k: v for k, v in vars(args).items() if k not in ("command", "config")}

    subparser = parser._subparsers._group_actions[0].choices[command]
    actions = {a.dest: a for a in subparser._actions if a.dest not in ("help", "config")}

    path = args.config if args.config is not None else config_file
    from_file = {}
    if path is not None:
        raw = _read_config_file(path)
        unknown = sorted(set(raw) - set(actions))
        if unknown:
            raise UsageError(f"Unknown keys in config file '{path}' for '{command}': {unknown}")
        from_file = {name: _coerce(name, value, actions[name]) for name, value in raw.items()}

    options = dict(_DEFAULTS[command])
    for name in actions:
        if flags.get(name) is not None:
            if name in from_file and from_file[name] != flags[name]:
                logger.info("Option '%s' from the command line (%r) overrides the config file (%r)",
                            name, flags[name], from_file[name])
            options[name] = flags[name]
        elif name in from_file:
            options[name] = from_file[name]
        else:
            options.setdefault(name, None)

    seed = options.pop("seed", None)
    seed = DEFAULT_SEED if seed is None else seed
    if seed < 0:
        raise UsageError(f"--seed must be nonnegative, got {seed}.")
    _validate(command, options)
    return RunConfig(command=command, seed=int(seed), options=options)
