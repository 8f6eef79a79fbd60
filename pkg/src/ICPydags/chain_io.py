import json
import logging
from dataclasses import replace
from typing import Iterable, Iterator, List, Union

from ICPydags.ordered_dag import Hyperparams, OrderedDag
from ICPydags.run_chain import ChainSample
from ICPydags.utils import ChainFormatError

logger = logging.getLogger(__name__)

_REQUIRED_KEYS = ("iter", "logp", "graph", "hypers")


def encode_sample(sample: Union[ChainSample, dict]) -> str:
    """One JSON line; floats use the shortest text that round-trips exactly."""
    record = sample.to_record() if isinstance(sample, ChainSample) else sample
    return json.dumps(record, separators=(",", ":"))


def decode_sample(line: str, line_number: int = 0) -> ChainSample:
    """
    Parse one chain line.

    Raises
    ------
    ChainFormatError
        If the line is not valid JSON or misses a field; the message names `line_number`.
    """
    # Parse the line as a JSON object
    try:
        record = json.loads(line)
    except json.JSONDecodeError as e:
        raise ChainFormatError(f"Line {line_number}: invalid JSON ({e.msg}).") from e
    if not isinstance(record, dict):
        raise ChainFormatError(f"Line {line_number}: expected a JSON object.")
    # Check the required fields
    missing = [key for key in _REQUIRED_KEYS if key not in record]
    if missing:
        raise ChainFormatError(f"Line {line_number}: missing fields {missing}.")
    try:
        # Validate the graph and hyperparameters without keeping the parsed objects
        OrderedDag.from_record(record["graph"])
        Hyperparams.from_record(record["hypers"])
        return ChainSample(
            iter=int(record["iter"]),
            logp=float(record["logp"]),
            graph=record["graph"],
            hypers=record["hypers"],
            params=record.get("params"),
            chain=record.get("chain"),
        )
    except (KeyError, TypeError, ValueError) as e:
        raise ChainFormatError(f"Line {line_number}: {e}") from e


class ChainWriter:
    """
    Line-flushed JSONL sink; usable as a context manager and directly as a `run_chain` sink.

    Every sample is flushed as soon as it is written, so an aborted run leaves all complete lines.
    """

    def __init__(self, path: str, append: bool = False):
        self.path = path
        self._handle = open(path, "a" if append else "w", encoding="utf-8")
        self.count = 0

    def write(self, sample: Union[ChainSample, dict]):
        self._handle.write(encode_sample(sample) + "\n")
        self._handle.flush()
        self.count += 1

    __call__ = write

    def close(self):
        if not self._handle.closed:
            self._handle.close()

    def __enter__(self) -> "ChainWriter":
        return self

    def __exit__(self, exc_type, exc, tb):
        self.close()


def write_chain(path: str, samples: Iterable[ChainSample]) -> int:
    """Write samples to a JSONL file, one per line; returns the number written."""
    with ChainWriter(path) as writer:
        for sample in samples:
            writer.write(sample)
    return writer.count


def read_chain(path: str) -> Iterator[ChainSample]:
    """
    Stream the samples of a JSONL chain file.

    Blank lines are skipped; an empty file yields nothing.

    Raises
    ------
    ChainFormatError
        At the first malformed line, naming its 1-based line number.
    """
    with open(path, "r", encoding="utf-8") as handle:
        for line_number, line in enumerate(handle, start=1):
            # Skip blank lines
            if not line.strip():
                continue
            yield decode_sample(line, line_number)


def merge_chains(paths: List[str], out: str) -> int:
    """
    Concatenate chain files into one, tagging samples without a chain index with their file's position.

    Returns
    -------
    int
        Number of samples written.
    """
    with ChainWriter(out) as writer:
        for index, path in enumerate(paths):
            for sample in read_chain(path):
                writer.write(sample if sample.chain is not None else replace(sample, chain=index))
    logger.info("Merged %d samples from %d chain files into %s", writer.count, len(paths), out)
    return writer.count
