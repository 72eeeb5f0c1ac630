"""Directed acyclic graphs with ancestry queries and d-separation.

Graphs are immutable: every "mutation" returns a new ``Dag``. Nodes are
addressed by dense integer handles (``NodeId``) assigned in declaration
order, and carry a name plus an observed/unobserved flag.
"""

import itertools
from collections.abc import Iterable
from dataclasses import dataclass, field
from typing import Literal

import networkx as nx
import numpy as np

from errors import CycleError, DuplicateError, OverlapError, UnknownNodeError

NodeId = int

NodeRole = Literal["confounder", "mediator", "collider"]


@dataclass(frozen=True)
class NodeMeta:
    """Name and observation status of a single node."""

    name: str
    observed: bool = True


@dataclass(frozen=True)
class Relations:
    """Result of ``relations``: the neighbourhood of one node."""

    parents: frozenset[NodeId]
    ancestors: frozenset[NodeId]
    descendants: frozenset[NodeId]
    is_root: bool
    is_leaf: bool


@dataclass(frozen=True)
class Dag:
    """Validated, immutable directed acyclic graph.

    Attributes:
        node_meta: Per-node metadata, indexed by NodeId
        edges: Directed edges as (parent, child) handle pairs

    Raises:
        UnknownNodeError: If an edge endpoint is not a declared node
        CycleError: If the edges contain a self-loop or directed cycle
        DuplicateError: If two nodes share a name
    """

    node_meta: tuple[NodeMeta, ...]
    edges: frozenset[tuple[NodeId, NodeId]]
    _graph: nx.DiGraph = field(init=False, repr=False, compare=False)
    _index: dict[str, NodeId] = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        index: dict[str, NodeId] = {}
        for node, meta in enumerate(self.node_meta):
            if meta.name in index:
                raise DuplicateError(f"Duplicate node name: '{meta.name}'")
            index[meta.name] = node

        graph = nx.DiGraph()
        graph.add_nodes_from(range(len(self.node_meta)))
        for parent, child in self.edges:
            for endpoint in (parent, child):
                if endpoint not in graph:
                    raise UnknownNodeError(
                        f"Edge endpoint {endpoint!r} is not a declared node"
                    )
            if parent == child:
                raise CycleError(
                    f"Self-edge on node '{self.node_meta[parent].name}'"
                )
            graph.add_edge(parent, child)

        if not nx.is_directed_acyclic_graph(graph):
            cycle = nx.find_cycle(graph)
            names = " -> ".join(
                self.node_meta[u].name for u, _ in cycle
            )
            raise CycleError(f"Directed cycle: {names}")

        object.__setattr__(self, "_graph", graph)
        object.__setattr__(self, "_index", index)

    @property
    def nodes(self) -> range:
        """All node handles in declaration order."""
        return range(len(self.node_meta))

    def __len__(self) -> int:
        return len(self.node_meta)

    def __contains__(self, node: object) -> bool:
        return isinstance(node, int) and 0 <= node < len(self.node_meta)

    def check(self, *nodes: NodeId) -> None:
        """Raise UnknownNodeError unless every handle is declared."""
        for node in nodes:
            if node not in self:
                raise UnknownNodeError(f"Unknown node handle: {node!r}")

    def name(self, node: NodeId) -> str:
        self.check(node)
        return self.node_meta[node].name

    def node_id(self, name: str) -> NodeId:
        """Look up a handle by node name."""
        try:
            return self._index[name]
        except KeyError:
            raise UnknownNodeError(f"Unknown node: '{name}'") from None

    def is_observed(self, node: NodeId) -> bool:
        self.check(node)
        return self.node_meta[node].observed

    @property
    def observed_nodes(self) -> tuple[NodeId, ...]:
        return tuple(v for v in self.nodes if self.node_meta[v].observed)

    def parents(self, node: NodeId) -> tuple[NodeId, ...]:
        """Parents in declaration order (the CPT axis order)."""
        self.check(node)
        return tuple(sorted(self._graph.predecessors(node)))

    def children(self, node: NodeId) -> tuple[NodeId, ...]:
        self.check(node)
        return tuple(sorted(self._graph.successors(node)))

    def ancestors(self, node: NodeId) -> frozenset[NodeId]:
        self.check(node)
        return frozenset(nx.ancestors(self._graph, node))

    def descendants(self, node: NodeId) -> frozenset[NodeId]:
        self.check(node)
        return frozenset(nx.descendants(self._graph, node))

    def topological_order(self) -> tuple[NodeId, ...]:
        """Deterministic topological order (smallest handle first)."""
        return tuple(nx.lexicographical_topological_sort(self._graph))

    def without_incoming(self, nodes: Iterable[NodeId]) -> "Dag":
        """Return the graph with every edge into ``nodes`` deleted."""
        cut = frozenset(nodes)
        self.check(*cut)
        return Dag(
            self.node_meta,
            frozenset((u, v) for u, v in self.edges if v not in cut),
        )

    def without_outgoing(self, nodes: Iterable[NodeId]) -> "Dag":
        """Return the graph with every edge out of ``nodes`` deleted."""
        cut = frozenset(nodes)
        self.check(*cut)
        return Dag(
            self.node_meta,
            frozenset((u, v) for u, v in self.edges if u not in cut),
        )

    def with_node(
        self,
        name: str,
        parents: Iterable[NodeId] = (),
        observed: bool = True,
    ) -> "Dag":
        """Return a graph with one extra node appended after the others."""
        new_id = len(self.node_meta)
        parents = tuple(parents)
        self.check(*parents)
        return Dag(
            self.node_meta + (NodeMeta(name, observed),),
            self.edges | {(p, new_id) for p in parents},
        )

    def edge_names(self) -> list[tuple[str, str]]:
        """Edges as sorted (parent name, child name) pairs."""
        return sorted(
            (self.node_meta[u].name, self.node_meta[v].name)
            for u, v in self.edges
        )

    def weakly_connected(self, u: NodeId, v: NodeId) -> bool:
        self.check(u, v)
        return nx.has_path(self._graph.to_undirected(as_view=True), u, v)


def build_dag(
    node_names: list[tuple[str, bool]],
    edges: list[tuple[str, str]],
) -> Dag:
    """Build a validated Dag from node names and named edges.

    Args:
        node_names: (name, observed) pairs in declaration order
        edges: (parent name, child name) pairs

    Returns:
        Dag whose handles follow declaration order

    Raises:
        DuplicateError: If a name or an edge is declared twice
        UnknownNodeError: If an edge references an undeclared name
        CycleError: If the edges admit a directed cycle

    Examples:
        >>> dag = build_dag([("V1", True), ("V2", True)], [("V1", "V2")])
        >>> dag.parents(dag.node_id("V2"))
        (0,)
        >>> build_dag([("V1", True), ("V2", True)],
        ...           [("V1", "V2"), ("V2", "V1")])  # raises CycleError
    """
    metas = tuple(
        NodeMeta(name, bool(observed)) for name, observed in node_names
    )

    index: dict[str, NodeId] = {}
    for node, meta in enumerate(metas):
        if meta.name in index:
            raise DuplicateError(f"Duplicate node name: '{meta.name}'")
        index[meta.name] = node

    handles: set[tuple[NodeId, NodeId]] = set()
    for parent, child in edges:
        for endpoint in (parent, child):
            if endpoint not in index:
                raise UnknownNodeError(f"Unknown node in edge: '{endpoint}'")
        pair = (index[parent], index[child])
        if pair in handles:
            raise DuplicateError(f"Duplicate edge: {parent} -> {child}")
        handles.add(pair)

    return Dag(metas, frozenset(handles))


def relations(dag: Dag, v: NodeId) -> Relations:
    """Parents, ancestors and descendants of ``v``.

    A node is a root when it has no ancestors and a leaf when it has no
    descendants; a node is never its own ancestor.

    Raises:
        UnknownNodeError: If ``v`` is not in the graph
    """
    ancestors = dag.ancestors(v)
    descendants = dag.descendants(v)
    return Relations(
        parents=frozenset(dag.parents(v)),
        ancestors=ancestors,
        descendants=descendants,
        is_root=not ancestors,
        is_leaf=not descendants,
    )


def _check_query(dag: Dag, x: NodeId, y: NodeId, s: frozenset[NodeId]) -> None:
    dag.check(x, y, *s)
    if x == y:
        raise OverlapError("x and y must be distinct nodes")
    if x in s or y in s:
        raise OverlapError("x and y must not be in the conditioning set")


def is_d_separated(
    dag: Dag,
    x: NodeId,
    y: NodeId,
    s: Iterable[NodeId] = (),
) -> bool:
    """Decide whether ``s`` d-separates ``x`` from ``y``.

    Reachability ("Bayes ball") search over (node, direction) states, so
    paths are never enumerated. A collider passes the ball back up only
    when it lies in ``s`` or has a descendant in ``s``, i.e. when it is in
    ``s`` or an ancestor of ``s``.

    Args:
        dag: The graph
        x: First endpoint
        y: Second endpoint
        s: Conditioning set

    Returns:
        True when every path between x and y is blocked by s

    Raises:
        UnknownNodeError: If a handle is not in the graph
        OverlapError: If x == y or either endpoint is in s
    """
    s = frozenset(s)
    _check_query(dag, x, y, s)

    # colliders in s or with a descendant in s
    opened = set(s)
    for node in s:
        opened |= dag.ancestors(node)

    up, down = "up", "down"  # arrived from a child / from a parent
    schedule = [(x, up)]
    visited: set[tuple[NodeId, str]] = set()

    while schedule:
        node, direction = schedule.pop()
        if (node, direction) in visited:
            continue
        visited.add((node, direction))
        if node == y:
            return False

        if direction == up and node not in s:
            schedule.extend((p, up) for p in dag.parents(node))
            schedule.extend((c, down) for c in dag.children(node))
        elif direction == down:
            if node in opened:
                schedule.extend((p, up) for p in dag.parents(node))
            if node not in s:
                schedule.extend((c, down) for c in dag.children(node))

    return True


def classify_triple(
    dag: Dag, u: NodeId, k: NodeId, v: NodeId
) -> NodeRole:
    """Name the role ``k`` plays on the adjacent triple u - k - v.

    Raises:
        ValueError: If k is not adjacent to both u and v
    """
    dag.check(u, k, v)
    into_k = {p for p in (u, v) if (p, k) in dag.edges}
    out_of_k = {c for c in (u, v) if (k, c) in dag.edges}
    if len(into_k) + len(out_of_k) != 2 or u == v:
        raise ValueError(
            f"'{dag.name(k)}' is not between '{dag.name(u)}' and "
            f"'{dag.name(v)}'"
        )
    match len(into_k):
        case 2:
            return "collider"
        case 1:
            return "mediator"
        case _:
            return "confounder"


def _path_blocked(
    dag: Dag,
    path: list[NodeId],
    s: frozenset[NodeId],
) -> bool:
    """True when some interior node of ``path`` blocks it given s.

    Examples:
        >>> _path_blocked(collider_dag, [0, 1, 2], frozenset())
        True
        >>> _path_blocked(collider_dag, [0, 1, 2], frozenset({1}))
        False
    """
    for u, k, v in zip(path, path[1:], path[2:], strict=False):
        if classify_triple(dag, u, k, v) == "collider":
            if k not in s and not (dag.descendants(k) & s):
                return True
        elif k in s:
            return True
    return False


def d_separated_by_paths(
    dag: Dag,
    x: NodeId,
    y: NodeId,
    s: Iterable[NodeId] = (),
) -> bool:
    """Exhaustive path-enumeration oracle for ``is_d_separated``.

    Walks every simple path of the skeleton and applies the two blocking
    rules literally. Exponential; meant for testing small graphs.
    """
    s = frozenset(s)
    _check_query(dag, x, y, s)
    skeleton = dag._graph.to_undirected(as_view=True)
    return all(
        _path_blocked(dag, path, s)
        for path in nx.all_simple_paths(skeleton, x, y)
    )


def random_dag(
    n_nodes: int,
    edge_probability: float,
    rng: np.random.Generator,
    prefix: str = "V",
) -> Dag:
    """Random DAG whose edges respect a random node ordering.

    Args:
        n_nodes: Number of nodes (named prefix1..prefixN)
        edge_probability: Chance each ordered pair gets an edge
        rng: Source of randomness
        prefix: Node name prefix

    Returns:
        Acyclic graph with every node observed
    """
    order = rng.permutation(n_nodes)
    edges = [
        (f"{prefix}{order[i] + 1}", f"{prefix}{order[j] + 1}")
        for i, j in itertools.combinations(range(n_nodes), 2)
        if rng.random() < edge_probability
    ]
    names = [(f"{prefix}{i + 1}", True) for i in range(n_nodes)]
    return build_dag(names, edges)
