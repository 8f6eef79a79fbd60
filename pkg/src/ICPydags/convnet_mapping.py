import logging
import math
from dataclasses import asdict, dataclass
from typing import Dict, List, Optional

import networkx as nx
import numpy as np

from ICPydags.ordered_dag import OrderedDag
from ICPydags.utils import DomainError, GraphError

logger = logging.getLogger(__name__)

# Absorbs binary rounding of n_bins * (1 - theta) at exact bin boundaries
_BIN_TOLERANCE = 1e-9


def _check_int(value, name: str, minimum: int) -> int:
    if isinstance(value, bool) or not isinstance(value, (int, np.integer)):
        raise TypeError(f"'{name}' must be an integer, got {type(value)}")
    if value < minimum:
        raise DomainError(f"'{name}' must be at least {minimum}, got {value}.")
    return int(value)


def bin_steps(theta: float, n_bins: int) -> int:
    """Number of halving steps floor(n_bins (1 - theta)) between order value 1 and `theta`."""
    n_bins = _check_int(n_bins, "n_bins", 1)
    if not 0.0 <= theta <= 1.0:
        raise DomainError(f"'theta' must lie in [0, 1], got {theta}.")
    return int(math.floor(n_bins * (1.0 - theta) + _BIN_TOLERANCE))


def compute_channels(theta: float, n_bins: int, n0: int) -> int:
    """
    Number of channels of the tensor at order value `theta`: 2**floor(n_bins (1 - theta)) + n0.

    Examples
    --------
    >>> compute_channels(0.0, 5, 4)
    36
    >>> compute_channels(1.0, 5, 4)
    5
    """
    n0 = _check_int(n0, "n0", 0)
    return 2 ** bin_steps(theta, n_bins) + n0


def compute_pixels(theta: float, n_bins: int, m: int) -> int:
    """
    Number of pixels of the tensor at order value `theta`: m / 2**floor(n_bins (1 - theta)).

    Raises
    ------
    DomainError
        If `m` is not divisible by the halving factor; fractional pixel counts are not rounded.
    """
    m = _check_int(m, "m", 1)
    factor = 2 ** bin_steps(theta, n_bins)
    if m % factor:
        raise DomainError(f"{m} pixels cannot be halved {int(math.log2(factor))} times without a remainder.")
    return m // factor


@dataclass(frozen=True)
class TensorShape:
    id: int
    theta: float
    role: str
    channels: int
    pixels: int


@dataclass(frozen=True)
class EdgeSpec:
    parent: int
    child: int
    kind: str
    in_shape: List[int]
    out_shape: List[int]
    kernel: int
    stride: int


@dataclass(frozen=True)
class ArchSpec:
    """
    Convolutional architecture derived from an ordered DAG.

    Every node is a tensor of `channels` x `pixels`; every edge is a convolution whose stride is the
    ratio of parent to child pixels, except edges into the output node, which are dense layers
    feeding a softmax over `n_classes`.
    """

    nodes: List[TensorShape]
    edges: List[EdgeSpec]
    input_id: int
    output_id: int
    n_bins: int
    n0: int
    m: int
    kernel: int = 3
    n_classes: int = 10

    def to_record(self) -> dict:
        return asdict(self)

    @classmethod
    def from_record(cls, record: dict) -> "ArchSpec":
        try:
            nodes = [TensorShape(**n) for n in record["nodes"]]
            edges = [EdgeSpec(**{**e, "in_shape": list(e["in_shape"]), "out_shape": list(e["out_shape"])}) for e in record["edges"]]
            rest = {k: record[k] for k in ("input_id", "output_id", "n_bins", "n0", "m", "kernel", "n_classes")}
        except (KeyError, TypeError) as e:
            raise ValueError(f"Malformed architecture record: {e}") from e
        return cls(nodes=nodes, edges=edges, **rest)


def _pinned_observed(dag: OrderedDag, theta: float, what: str) -> int:
    found = [k for k in dag.observed if dag.theta(k) == theta]
    if len(found) != 1:
        raise GraphError(f"Expected exactly one observed {what} node at order value {theta}, found {len(found)}.")
    return found[0]


def dag_to_arch(
    dag: OrderedDag,
    n_bins: int,
    n0: int,
    m: int,
    kernel: int = 3,
    n_classes: int = 10,
    input_id: Optional[int] = None,
    output_id: Optional[int] = None,
) -> ArchSpec:
    """
    Map an ordered DAG to a convolutional architecture.

    The input node is the observed node at order value 1 and the output node the observed node at 0,
    unless given explicitly. Only the input and the nodes it reaches are kept.

    Parameters
    ----------
    dag : OrderedDag
        The graph.
    n_bins : int
        Number of order-value bins; each bin halves the pixels and doubles the channels.
    n0 : int
        Channels added to every tensor.
    m : int
        Pixels of the input tensor.
    kernel : int, optional
        Spatial kernel size of every convolution. Default is 3.
    n_classes : int, optional
        Width of the output softmax. Default is 10.
    input_id, output_id : int, optional
        Explicit input and output nodes.

    Returns
    -------
    ArchSpec
        Tensor shapes and edge descriptors.

    Raises
    ------
    GraphError
        If the input or output node is missing, or the output is not reachable from the input.
    DomainError
        If a pixel count would be fractional.
    """
    kernel = _check_int(kernel, "kernel", 1)
    n_classes = _check_int(n_classes, "n_classes", 1)
    if input_id is None:
        input_id = _pinned_observed(dag, 1.0, "input")
    if output_id is None:
        output_id = _pinned_observed(dag, 0.0, "output")
    if input_id not in dag or output_id not in dag:
        raise GraphError("The input and output nodes must belong to the graph.")

    # Forward reachability from the input
    kept = {input_id}
    frontier = [input_id]
    while frontier:
        node_id = frontier.pop()
        for child in dag.children(node_id):
            if child not in kept:
                kept.add(child)
                frontier.append(child)
    if output_id not in kept:
        raise GraphError(f"The output node {output_id} is not reachable from the input node {input_id}.")

    shapes: Dict[int, TensorShape] = {}
    for k in sorted(kept, key=lambda k: (-dag.theta(k), k)):
        theta = dag.theta(k)
        if k == output_id:
            shapes[k] = TensorShape(k, theta, "output", n_classes, 1)
        else:
            role = "input" if k == input_id else "hidden"
            shapes[k] = TensorShape(k, theta, role, compute_channels(theta, n_bins, n0), compute_pixels(theta, n_bins, m))

    edges = []
    for parent, child in dag.edges:
        if parent not in kept or child not in kept:
            continue
        p, c = shapes[parent], shapes[child]
        if child == output_id:
            edges.append(EdgeSpec(parent, child, "dense", [p.channels, p.pixels], [c.channels], 1, 1))
        else:
            edges.append(EdgeSpec(parent, child, "conv", [p.channels, p.pixels], [c.channels, c.pixels],
                                  kernel, p.pixels // c.pixels))

    logger.debug("Architecture with %d tensors and %d layers", len(shapes), len(edges))
    return ArchSpec(
        nodes=[shapes[k] for k in sorted(shapes)],
        edges=edges,
        input_id=input_id,
        output_id=output_id,
        n_bins=int(n_bins),
        n0=int(n0),
        m=int(m),
        kernel=kernel,
        n_classes=n_classes,
    )


def arch_statistics(spec: ArchSpec) -> dict:
    """
    Size statistics of an architecture.

    Returns
    -------
    dict
        n_nodes, n_edges, avg_degree, width (number of directed input-to-output paths), depth (edges on
        the longest input-to-output path) and the mean, std, min and max of the node order values.
    """
    graph = nx.DiGraph()
    graph.add_nodes_from(n.id for n in spec.nodes)
    graph.add_edges_from((e.parent, e.child) for e in spec.edges)

    # Path counts and longest paths from the input, in topological order
    paths = {n: 0 for n in graph}
    longest = {n: -math.inf for n in graph}
    paths[spec.input_id], longest[spec.input_id] = 1, 0
    for node in nx.topological_sort(graph):
        for child in graph.successors(node):
            paths[child] += paths[node]
            longest[child] = max(longest[child], longest[node] + 1)

    thetas = np.array([n.theta for n in spec.nodes])
    return {
        "n_nodes": graph.number_of_nodes(),
        "n_edges": graph.number_of_edges(),
        "avg_degree": 2 * graph.number_of_edges() / graph.number_of_nodes(),
        "width": int(paths[spec.output_id]),
        "depth": int(longest[spec.output_id]),
        "theta_mean": float(thetas.mean()),
        "theta_std": float(thetas.std()),
        "theta_min": float(thetas.min()),
        "theta_max": float(thetas.max()),
    }
