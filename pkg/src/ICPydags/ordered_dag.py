import bisect
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, FrozenSet, Iterable, List, Optional, Set, Tuple

from ICPydags.utils import DegenerateOrderError, GraphError, ParameterError


@dataclass(frozen=True)
class Hyperparams:
    """
    The (alpha, gamma, phi) triple governing node popularities and order values.

    alpha is the mass parameter and gamma the concentration of the underlying Beta Process;
    phi boosts the popularity of observed nodes.
    """

    alpha: float
    gamma: float
    phi: float

    def __post_init__(self):
        for name in ("alpha", "gamma", "phi"):
            value = getattr(self, name)
            if isinstance(value, bool) or not isinstance(value, (int, float)):
                raise TypeError(f"Hyperparameter '{name}' must be a real number, got {type(value)}")
            if not math.isfinite(value):
                raise ParameterError(f"Hyperparameter '{name}' must be finite, got {value}.")
        if not self.alpha > 0:
            raise ParameterError(f"alpha must be positive, got {self.alpha}.")
        if not self.gamma > 0:
            raise ParameterError(f"gamma must be positive, got {self.gamma}.")
        if not self.phi >= 0:
            raise ParameterError(f"phi must be nonnegative, got {self.phi}.")

    def to_record(self) -> dict:
        return {"alpha": float(self.alpha), "gamma": float(self.gamma), "phi": float(self.phi)}

    @classmethod
    def from_record(cls, record: dict) -> "Hyperparams":
        return cls(alpha=float(record["alpha"]), gamma=float(record["gamma"]), phi=float(record["phi"]))


class NodeKind(str, Enum):
    OBSERVED = "obs"
    HIDDEN = "hid"


@dataclass(frozen=True)
class Node:
    id: int
    theta: float
    kind: NodeKind


def _is_pinned(theta: float) -> bool:
    # Boundary placements may be shared (all observables at 0, convnet input at 1)
    return theta == 0.0 or theta == 1.0


class OrderedDag:
    """
    A DAG whose nodes carry order values in [0, 1]; every edge points from a higher to a lower order.

    Edges are stored as sparse parent/child maps keyed by node id. Node ids are opaque integers
    handed out in increasing order and never reused, even after removals.
    """

    def __init__(self):
        self._nodes: Dict[int, Node] = {}
        self._parents: Dict[int, Set[int]] = {}
        self._children: Dict[int, Set[int]] = {}
        self._interior_thetas: Set[float] = set()
        self._next_id = 0

    # -- construction ---------------------------------------------------------------------------

    @classmethod
    def from_parts(cls, nodes: Iterable[Tuple[int, float, str]], edges: Iterable[Tuple[int, int]] = ()) -> "OrderedDag":
        """
        Build a graph from (id, theta, kind) triples and (parent, child) pairs.

        `kind` may be a NodeKind or its string value ("obs" / "hid").
        """
        dag = cls()
        for node_id, theta, kind in nodes:
            dag.add_node(theta, NodeKind(kind), node_id=node_id)
        for parent, child in edges:
            dag.add_edge(parent, child)
        return dag

    def add_node(self, theta: float, kind: NodeKind, node_id: Optional[int] = None) -> int:
        # Validate the order value
        theta = float(theta)
        if not 0.0 <= theta <= 1.0:
            raise GraphError(f"Order values must lie in [0, 1], got {theta}.")
        if not _is_pinned(theta) and theta in self._interior_thetas:
            raise DegenerateOrderError(f"Order value {theta!r} is already taken by another node.")

        # Assign a fresh id unless one is forced (deserialisation)
        if node_id is None:
            node_id = self._next_id
        elif isinstance(node_id, bool) or not isinstance(node_id, int):
            raise TypeError(f"Node ids must be integers, got {type(node_id)}")
        if node_id in self._nodes:
            raise GraphError(f"Node id {node_id} is not unique.")

        self._nodes[node_id] = Node(node_id, theta, NodeKind(kind))
        self._parents[node_id] = set()
        self._children[node_id] = set()
        if not _is_pinned(theta):
            self._interior_thetas.add(theta)
        self._next_id = max(self._next_id, node_id + 1)
        return node_id

    def add_edge(self, parent: int, child: int):
        self._require(parent)
        self._require(child)
        if parent == child:
            raise GraphError(f"Self-edge on node {parent} is not allowed.")
        if child in self._children[parent]:
            raise GraphError(f"Duplicate edge {parent} -> {child}.")
        if not self._nodes[parent].theta > self._nodes[child].theta:
            raise GraphError(
                f"Edge {parent} -> {child} violates the order constraint "
                f"({self._nodes[parent].theta} <= {self._nodes[child].theta})."
            )
        self._children[parent].add(child)
        self._parents[child].add(parent)

    def remove_edge(self, parent: int, child: int):
        if child not in self._children.get(parent, ()):
            raise GraphError(f"Edge {parent} -> {child} does not exist.")
        self._children[parent].discard(child)
        self._parents[child].discard(parent)

    def remove_node(self, node_id: int):
        """Remove a node together with all its incident edges."""
        self._require(node_id)
        for parent in self._parents[node_id]:
            self._children[parent].discard(node_id)
        for child in self._children[node_id]:
            self._parents[child].discard(node_id)
        theta = self._nodes[node_id].theta
        self._interior_thetas.discard(theta)
        del self._nodes[node_id], self._parents[node_id], self._children[node_id]

    def set_theta(self, node_id: int, theta: float):
        """Move a node to a new order value that keeps all its edges valid."""
        self._require(node_id)
        theta = float(theta)
        old = self._nodes[node_id]
        if theta == old.theta:
            return
        if not 0.0 <= theta <= 1.0:
            raise GraphError(f"Order values must lie in [0, 1], got {theta}.")
        if not _is_pinned(theta) and theta in self._interior_thetas:
            raise DegenerateOrderError(f"Order value {theta!r} is already taken by another node.")
        if any(self._nodes[p].theta <= theta for p in self._parents[node_id]):
            raise GraphError(f"Order value {theta} for node {node_id} is not below all its parents.")
        if any(self._nodes[c].theta >= theta for c in self._children[node_id]):
            raise GraphError(f"Order value {theta} for node {node_id} is not above all its children.")
        self._interior_thetas.discard(old.theta)
        if not _is_pinned(theta):
            self._interior_thetas.add(theta)
        self._nodes[node_id] = Node(node_id, theta, old.kind)

    def copy(self) -> "OrderedDag":
        other = OrderedDag()
        other._nodes = dict(self._nodes)
        other._parents = {k: set(v) for k, v in self._parents.items()}
        other._children = {k: set(v) for k, v in self._children.items()}
        other._interior_thetas = set(self._interior_thetas)
        other._next_id = self._next_id
        return other

    # -- queries --------------------------------------------------------------------------------

    def _require(self, node_id: int):
        if node_id not in self._nodes:
            raise GraphError(f"Unknown node id {node_id}.")

    def __len__(self) -> int:
        return len(self._nodes)

    def __contains__(self, node_id) -> bool:
        return node_id in self._nodes

    def __eq__(self, other) -> bool:
        if not isinstance(other, OrderedDag):
            return NotImplemented
        return self._nodes == other._nodes and self.edges == other.edges

    def __repr__(self) -> str:
        return f"OrderedDag(nodes={len(self._nodes)}, edges={self.n_edges})"

    @property
    def next_id(self) -> int:
        return self._next_id

    def node(self, node_id: int) -> Node:
        self._require(node_id)
        return self._nodes[node_id]

    def theta(self, node_id: int) -> float:
        return self.node(node_id).theta

    def kind(self, node_id: int) -> NodeKind:
        return self.node(node_id).kind

    def node_ids(self) -> List[int]:
        return sorted(self._nodes)

    def nodes(self) -> List[Node]:
        return [self._nodes[k] for k in sorted(self._nodes)]

    @property
    def observed(self) -> FrozenSet[int]:
        return frozenset(k for k, n in self._nodes.items() if n.kind is NodeKind.OBSERVED)

    @property
    def hidden(self) -> FrozenSet[int]:
        return frozenset(k for k, n in self._nodes.items() if n.kind is NodeKind.HIDDEN)

    def parents(self, node_id: int) -> FrozenSet[int]:
        self._require(node_id)
        return frozenset(self._parents[node_id])

    def children(self, node_id: int) -> FrozenSet[int]:
        self._require(node_id)
        return frozenset(self._children[node_id])

    def has_edge(self, parent: int, child: int) -> bool:
        return child in self._children.get(parent, ())

    @property
    def edges(self) -> List[Tuple[int, int]]:
        return sorted((p, c) for p, cs in self._children.items() for c in cs)

    @property
    def n_edges(self) -> int:
        return sum(len(cs) for cs in self._children.values())

    # -- serialisation --------------------------------------------------------------------------

    def to_record(self) -> dict:
        """Graph record with nodes sorted by id and edges sorted lexicographically."""
        return {
            "nodes": [{"id": n.id, "theta": n.theta, "kind": n.kind.value} for n in self.nodes()],
            "edges": [[p, c] for p, c in self.edges],
        }

    @classmethod
    def from_record(cls, record: dict) -> "OrderedDag":
        try:
            nodes = [(int(n["id"]), float(n["theta"]), n["kind"]) for n in record["nodes"]]
            edges = [(int(p), int(c)) for p, c in record["edges"]]
        except (KeyError, TypeError, ValueError) as e:
            raise GraphError(f"Malformed graph record: {e}") from e
        return cls.from_parts(nodes, edges)


@dataclass
class CountStats:
    """Counting statistics over the active nodes of a graph."""

    m: Dict[int, int]
    down: Dict[int, int]
    up: Dict[int, int]
    k_plus: int
    d: int
    e_plus: int = 0


@dataclass
class SortedOrders:
    """
    Ascending active order values bracketed by the sentinels 0 and 1.

    values[0] == 0 and values[-1] == 1; values[j] for j = 1..K+ is the j-th smallest active order.
    """

    values: List[float] = field(default_factory=lambda: [0.0, 1.0])

    @property
    def k_plus(self) -> int:
        return len(self.values) - 2

    def intervals(self) -> List[Tuple[int, float, float]]:
        """(j, lower, upper) for every interval j = 0..K+, zero-length ones included."""
        return [(j, self.values[j], self.values[j + 1]) for j in range(len(self.values) - 1)]

    def intervals_above(self, theta: float) -> List[Tuple[float, float]]:
        """Intervals between consecutive active orders strictly above `theta`, starting at `theta` and ending at 1."""
        interior = self.values[1:-1]
        start = bisect.bisect_right(interior, theta)
        bounds = [theta] + interior[start:] + [1.0]
        return [(bounds[j], bounds[j + 1]) for j in range(len(bounds) - 1)]


def active_set(dag: OrderedDag) -> Set[int]:
    """
    Observed nodes together with every node having a directed path to an observed node.

    Examples
    --------
    >>> dag = OrderedDag.from_parts([(0, 0.0, "obs"), (1, 0.5, "hid"), (2, 0.9, "hid")], [(2, 1), (1, 0)])
    >>> sorted(active_set(dag))
    [0, 1, 2]
    """
    active = set(dag.observed)
    frontier = list(active)
    # Walk parent links backwards from the observed nodes
    while frontier:
        node_id = frontier.pop()
        for parent in dag.parents(node_id):
            if parent not in active:
                active.add(parent)
                frontier.append(parent)
    return active


def sorted_orders(dag: OrderedDag, active: Optional[Set[int]] = None) -> SortedOrders:
    if active is None:
        active = active_set(dag)
    return SortedOrders([0.0] + sorted(dag.theta(k) for k in active) + [1.0])


def count_stats(dag: OrderedDag, active: Optional[Set[int]] = None) -> CountStats:
    """
    m, down and up counts for every active node, plus K+, D and E+.

    m_k counts edges from k to active children, down_k (up_k) the active nodes with strictly lower
    (higher) order value.

    Raises
    ------
    DegenerateOrderError
        If two active nodes share an order value strictly inside (0, 1).
    """
    if active is None:
        active = active_set(dag)
    thetas = sorted(dag.theta(k) for k in active)

    # Interior ties carry zero probability and would corrupt the down/up counts
    for lower, upper in zip(thetas, thetas[1:]):
        if lower == upper and not _is_pinned(lower):
            raise DegenerateOrderError(f"Two active nodes share the order value {lower!r}.")

    m, down, up = {}, {}, {}
    e_plus = 0
    for k in active:
        theta_k = dag.theta(k)
        m[k] = sum(1 for c in dag.children(k) if c in active)
        down[k] = bisect.bisect_left(thetas, theta_k)
        up[k] = len(thetas) - bisect.bisect_right(thetas, theta_k)
        e_plus += m[k]
    return CountStats(m=m, down=down, up=up, k_plus=len(active), d=len(dag.observed), e_plus=e_plus)


def prune_inactive(dag: OrderedDag) -> OrderedDag:
    """Copy of `dag` restricted to its active subgraph."""
    active = active_set(dag)
    pruned = dag.copy()
    for node_id in dag.node_ids():
        if node_id not in active:
            pruned.remove_node(node_id)
    return pruned


def is_singleton(dag: OrderedDag, node_id: int, active: Optional[Set[int]] = None) -> bool:
    """A node is a singleton when it has exactly one active child."""
    if active is None:
        active = active_set(dag)
    return sum(1 for c in dag.children(node_id) if c in active) == 1


def singleton_orphan_parents(dag: OrderedDag, node_id: int, active: Optional[Set[int]] = None) -> List[int]:
    """Hidden parents of `node_id` without parents of their own whose only active child is `node_id`."""
    if active is None:
        active = active_set(dag)
    result = []
    for parent in sorted(dag.parents(node_id)):
        if dag.kind(parent) is not NodeKind.HIDDEN or parent not in active:
            continue
        if dag.parents(parent):
            continue
        if [c for c in dag.children(parent) if c in active] == [node_id]:
            result.append(parent)
    return result


def check_dag(dag: OrderedDag, require_active: bool = False):
    """
    Verify every structural invariant of an ordered DAG.

    Parameters
    ----------
    dag : OrderedDag
        The graph to check.
    require_active : bool, optional
        Also require every hidden node to have a directed path to an observed node. Default is False.

    Raises
    ------
    TypeError
        If `dag` is not an OrderedDag.
    GraphError
        If an edge violates the order constraint, or an inactive hidden node is present while
        `require_active` is set.
    DegenerateOrderError
        If two nodes share an interior order value.
    """
    if not isinstance(dag, OrderedDag):
        raise TypeError(f"Expected an OrderedDag, got {type(dag)}")

    seen = set()
    for node in dag.nodes():
        if not 0.0 <= node.theta <= 1.0:
            raise GraphError(f"Node {node.id} has order value {node.theta} outside [0, 1].")
        if not _is_pinned(node.theta):
            if node.theta in seen:
                raise DegenerateOrderError(f"Two nodes share the order value {node.theta!r}.")
            seen.add(node.theta)

    for parent, child in dag.edges:
        if parent == child or not dag.theta(parent) > dag.theta(child):
            raise GraphError(f"Edge {parent} -> {child} violates the order constraint.")

    if require_active:
        inactive = set(dag.node_ids()) - active_set(dag)
        if inactive:
            raise GraphError(f"Hidden nodes {sorted(inactive)} have no directed path to an observed node.")
