"""
Graph types and algorithms for causal structure learning.

Directed acyclic graphs, endpoint-marked mixed graphs (the common container for
CPDAG, MAG and PAG outputs), undirected superstructures, v-structure
enumeration, Meek orientation, directed-cycle search, and the edge-list text
format shared by every graph artifact.
"""

from dataclasses import dataclass
from enum import Enum
from typing import Dict, FrozenSet, Iterable, Iterator, List, Mapping, Optional, Set, Tuple

import networkx as nx
import numpy as np

from utils.logger import get_logger
from .errors import CycleError, GraphError

logger = get_logger(__name__)

NodeId = int
Edge = Tuple[int, int]


class EndpointMark(str, Enum):
    """Mark at one end of an edge."""
    TAIL = "-"
    ARROW = ">"
    CIRCLE = "o"


TAIL = EndpointMark.TAIL
ARROW = EndpointMark.ARROW
CIRCLE = EndpointMark.CIRCLE

Marks = Tuple[EndpointMark, EndpointMark]

# '<' is accepted on input as an arrow drawn on the left endpoint
_MARK_SYMBOLS = {'-': TAIL, '>': ARROW, '<': ARROW, 'o': CIRCLE}


def _check_node(p: int, v: int) -> int:
    v = int(v)
    if not 0 <= v < p:
        raise GraphError(f"Node {v} outside [0, {p})")
    return v


def _pair(u: int, v: int) -> Edge:
    return (u, v) if u < v else (v, u)


def _as_mark(mark) -> EndpointMark:
    if isinstance(mark, EndpointMark):
        return mark
    try:
        return _MARK_SYMBOLS[mark] if mark in _MARK_SYMBOLS else EndpointMark(mark)
    except (ValueError, TypeError):
        raise GraphError(f"Unknown endpoint mark {mark!r}")


# ---------------------------------------------------------------------------
# Edge-list text format
# ---------------------------------------------------------------------------

def _parse_edge_lines(text: str) -> Tuple[int, Dict[str, str], List[Tuple[int, EndpointMark, EndpointMark, int]]]:
    """Parse `p=<count>` header, `# key=value` comments and `u XY v` lines."""
    p = None
    meta: Dict[str, str] = {}
    rows = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith('#'):
            body = line[1:].strip()
            if '=' in body:
                key, value = body.split('=', 1)
                meta[key.strip()] = value.strip()
            continue
        if p is None:
            if not line.startswith('p='):
                raise GraphError(f"Line {lineno}: expected header 'p=<count>', got {line!r}")
            try:
                p = int(line[2:])
            except ValueError:
                raise GraphError(f"Line {lineno}: invalid node count {line[2:]!r}")
            continue
        parts = line.split()
        if len(parts) != 3 or len(parts[1]) != 2:
            raise GraphError(f"Line {lineno}: expected 'u XY v', got {line!r}")
        try:
            u, v = int(parts[0]), int(parts[2])
        except ValueError:
            raise GraphError(f"Line {lineno}: node ids must be integers")
        rows.append((u, _as_mark(parts[1][0]), _as_mark(parts[1][1]), v))
    if p is None:
        raise GraphError("Missing 'p=<count>' header")
    return p, meta, rows


# ---------------------------------------------------------------------------
# Dag
# ---------------------------------------------------------------------------

class Dag:
    """Directed acyclic graph over nodes 0..p-1. Immutable."""

    __slots__ = ('_p', '_edges', '_graph', '_order', '_ancestor_cache')

    def __init__(self, p: int, edges: Iterable[Edge] = ()):
        if p < 0:
            raise GraphError(f"Node count must be non-negative, got {p}")
        edge_set = set()
        for u, v in edges:
            u, v = _check_node(p, u), _check_node(p, v)
            if u == v:
                raise GraphError(f"Self-loop on node {u}")
            edge_set.add((u, v))

        graph = nx.DiGraph()
        graph.add_nodes_from(range(p))
        graph.add_edges_from(sorted(edge_set))
        try:
            order = list(nx.lexicographical_topological_sort(graph))
        except nx.NetworkXUnfeasible:
            raise CycleError(nx.find_cycle(graph))

        self._p = p
        self._edges = frozenset(edge_set)
        self._graph = graph
        self._order = tuple(order)
        self._ancestor_cache: Dict[int, FrozenSet[int]] = {}

    @property
    def p(self) -> int:
        return self._p

    @property
    def edges(self) -> FrozenSet[Edge]:
        return self._edges

    @property
    def num_edges(self) -> int:
        return len(self._edges)

    def has_edge(self, u: int, v: int) -> bool:
        return (u, v) in self._edges

    def is_adjacent(self, u: int, v: int) -> bool:
        return (u, v) in self._edges or (v, u) in self._edges

    def parents(self, v: int) -> Tuple[int, ...]:
        return tuple(sorted(self._graph.predecessors(v)))

    def children(self, v: int) -> Tuple[int, ...]:
        return tuple(sorted(self._graph.successors(v)))

    def neighbors(self, v: int) -> Tuple[int, ...]:
        return tuple(sorted(set(self._graph.predecessors(v)) | set(self._graph.successors(v))))

    def topological_order(self) -> Tuple[int, ...]:
        """Lexicographically smallest topological order."""
        return self._order

    def ancestors(self, v: int) -> FrozenSet[int]:
        v = _check_node(self._p, v)
        cached = self._ancestor_cache.get(v)
        if cached is None:
            cached = frozenset(nx.ancestors(self._graph, v))
            self._ancestor_cache[v] = cached
        return cached

    def skeleton(self) -> FrozenSet[Edge]:
        return frozenset(_pair(u, v) for u, v in self._edges)

    def to_networkx(self) -> nx.DiGraph:
        return self._graph.copy()

    def to_matrix(self) -> np.ndarray:
        """Adjacency matrix A with A[u, v] = 1 iff u -> v."""
        matrix = np.zeros((self._p, self._p), dtype=int)
        for u, v in self._edges:
            matrix[u, v] = 1
        return matrix

    def to_mixed(self) -> 'MixedGraph':
        return MixedGraph(self._p, {(u, v): (TAIL, ARROW) for u, v in self._edges})

    def to_edge_list(self) -> str:
        return self.to_mixed().to_edge_list()

    @classmethod
    def from_edge_list(cls, text: str) -> 'Dag':
        graph = MixedGraph.from_edge_list(text)
        undirected = [e for e in graph.edges() if not graph.is_directed(e[0], e[1]) and not graph.is_directed(e[1], e[0])]
        if undirected:
            raise GraphError(f"DAG edge list contains non-directed edges: {undirected[:3]}")
        return cls(graph.p, graph.directed_edges())

    def __eq__(self, other) -> bool:
        return isinstance(other, Dag) and self._p == other._p and self._edges == other._edges

    def __hash__(self) -> int:
        return hash((self._p, self._edges))

    def __repr__(self) -> str:
        return f"Dag(p={self._p}, edges={sorted(self._edges)})"


def ancestors(g: Dag, v: int) -> Set[int]:
    """All u with a directed path u ~> v in g, excluding v."""
    return set(g.ancestors(v))


# ---------------------------------------------------------------------------
# Mixed graphs
# ---------------------------------------------------------------------------

class _MarkedEdges:
    """Read-only queries shared by MixedGraph and its builder."""

    _p: int
    _marks: Dict[Edge, Marks]
    _adj: Dict[int, Set[int]]

    @property
    def p(self) -> int:
        return self._p

    @property
    def num_edges(self) -> int:
        return len(self._marks)

    def marks(self, u: int, v: int) -> Optional[Marks]:
        """(mark at u, mark at v) or None when u, v are not adjacent."""
        if u < v:
            return self._marks.get((u, v))
        found = self._marks.get((v, u))
        return None if found is None else (found[1], found[0])

    def is_adjacent(self, u: int, v: int) -> bool:
        return _pair(u, v) in self._marks

    def neighbors(self, v: int) -> Tuple[int, ...]:
        return tuple(sorted(self._adj.get(v, ())))

    def has_arrowhead(self, u: int, v: int) -> bool:
        """Edge {u, v} exists and carries an Arrow at v."""
        found = self.marks(u, v)
        return found is not None and found[1] is ARROW

    def is_directed(self, u: int, v: int) -> bool:
        return self.marks(u, v) == (TAIL, ARROW)

    def is_undirected(self, u: int, v: int) -> bool:
        return self.marks(u, v) == (TAIL, TAIL)

    def is_bidirected(self, u: int, v: int) -> bool:
        return self.marks(u, v) == (ARROW, ARROW)

    def edges(self) -> Iterator[Tuple[int, int, EndpointMark, EndpointMark]]:
        """(u, v, mark at u, mark at v) with u < v, sorted."""
        for (u, v) in sorted(self._marks):
            mu, mv = self._marks[(u, v)]
            yield u, v, mu, mv

    def adjacencies(self) -> FrozenSet[Edge]:
        return frozenset(self._marks)

    def directed_edges(self) -> List[Edge]:
        out = []
        for u, v, mu, mv in self.edges():
            if (mu, mv) == (TAIL, ARROW):
                out.append((u, v))
            elif (mu, mv) == (ARROW, TAIL):
                out.append((v, u))
        return sorted(out)

    def undirected_edges(self) -> List[Edge]:
        return [(u, v) for u, v, mu, mv in self.edges() if mu is TAIL and mv is TAIL]

    def parents(self, v: int) -> Tuple[int, ...]:
        return tuple(u for u in self.neighbors(v) if self.is_directed(u, v))

    def children(self, v: int) -> Tuple[int, ...]:
        return tuple(w for w in self.neighbors(v) if self.is_directed(v, w))

    def directed_view(self) -> nx.DiGraph:
        """DiGraph of the Tail/Arrow edges only."""
        view = nx.DiGraph()
        view.add_nodes_from(range(self._p))
        view.add_edges_from(self.directed_edges())
        return view


class MixedGraph(_MarkedEdges):
    """Graph with two endpoint marks per edge; at most one edge per pair. Immutable."""

    __slots__ = ('_p', '_marks', '_adj')

    def __init__(self, p: int, edges: Optional[Mapping[Edge, Tuple]] = None):
        if p < 0:
            raise GraphError(f"Node count must be non-negative, got {p}")
        marks: Dict[Edge, Marks] = {}
        adj: Dict[int, Set[int]] = {}
        for (u, v), (mu, mv) in (edges or {}).items():
            u, v = _check_node(p, u), _check_node(p, v)
            if u == v:
                raise GraphError(f"Self-loop on node {u}")
            key = _pair(u, v)
            if key in marks:
                raise GraphError(f"Duplicate edge between {u} and {v}")
            mu, mv = _as_mark(mu), _as_mark(mv)
            marks[key] = (mu, mv) if u < v else (mv, mu)
            adj.setdefault(u, set()).add(v)
            adj.setdefault(v, set()).add(u)
        self._p = p
        self._marks = marks
        self._adj = adj

    @classmethod
    def empty(cls, p: int) -> 'MixedGraph':
        return cls(p)

    @classmethod
    def from_dag(cls, dag: Dag) -> 'MixedGraph':
        return dag.to_mixed()

    @classmethod
    def undirected(cls, p: int, pairs: Iterable[Edge]) -> 'MixedGraph':
        return cls(p, {_pair(u, v): (TAIL, TAIL) for u, v in pairs})

    def builder(self) -> 'MixedGraphBuilder':
        return MixedGraphBuilder(self._p, self._marks)

    def relabel(self, mapping: Mapping[int, int], p: int) -> 'MixedGraph':
        """Rename every node through mapping into a graph over p nodes."""
        return MixedGraph(p, {(mapping[u], mapping[v]): (mu, mv) for u, v, mu, mv in self.edges()})

    def to_edge_list(self) -> str:
        lines = [f"p={self._p}"]
        for u, v, mu, mv in self.edges():
            if mu is ARROW and mv is TAIL:
                lines.append(f"{v} -> {u}")
            else:
                lines.append(f"{u} {mu.value}{mv.value} {v}")
        return '\n'.join(lines) + '\n'

    @classmethod
    def from_edge_list(cls, text: str) -> 'MixedGraph':
        p, _, rows = _parse_edge_lines(text)
        return cls(p, _rows_to_marks(rows))

    def __eq__(self, other) -> bool:
        return isinstance(other, MixedGraph) and self._p == other._p and self._marks == other._marks

    def __hash__(self) -> int:
        return hash((self._p, frozenset(self._marks.items())))

    def __repr__(self) -> str:
        body = ', '.join(f"{u}{mu.value}{mv.value}{v}" for u, v, mu, mv in self.edges())
        return f"MixedGraph(p={self._p}, [{body}])"


def _rows_to_marks(rows) -> Dict[Edge, Marks]:
    marks: Dict[Edge, Marks] = {}
    for u, mu, mv, v in rows:
        key = _pair(u, v)
        if key in marks:
            raise GraphError(f"Duplicate edge between {u} and {v}")
        marks[key] = (mu, mv) if u < v else (mv, mu)
    return marks


class MixedGraphBuilder(_MarkedEdges):
    """Single-owner mutable counterpart of MixedGraph."""

    def __init__(self, p: int, marks: Optional[Mapping[Edge, Marks]] = None):
        self._p = p
        self._marks = dict(marks or {})
        self._adj = {}
        for u, v in self._marks:
            self._adj.setdefault(u, set()).add(v)
            self._adj.setdefault(v, set()).add(u)

    def set_edge(self, u: int, v: int, mark_u, mark_v) -> None:
        u, v = _check_node(self._p, u), _check_node(self._p, v)
        if u == v:
            raise GraphError(f"Self-loop on node {u}")
        mark_u, mark_v = _as_mark(mark_u), _as_mark(mark_v)
        self._marks[_pair(u, v)] = (mark_u, mark_v) if u < v else (mark_v, mark_u)
        self._adj.setdefault(u, set()).add(v)
        self._adj.setdefault(v, set()).add(u)

    def add_undirected(self, u: int, v: int) -> None:
        self.set_edge(u, v, TAIL, TAIL)

    def orient(self, u: int, v: int) -> None:
        """Make the edge u -> v."""
        self.set_edge(u, v, TAIL, ARROW)

    def remove_edge(self, u: int, v: int) -> None:
        key = _pair(u, v)
        if key in self._marks:
            del self._marks[key]
            self._adj[u].discard(v)
            self._adj[v].discard(u)

    def build(self) -> MixedGraph:
        return MixedGraph(self._p, self._marks)


# ---------------------------------------------------------------------------
# Superstructure
# ---------------------------------------------------------------------------

class Superstructure:
    """Undirected simple graph bounding the true skeleton. Immutable."""

    __slots__ = ('_p', '_edges', '_adj', '_perfect')

    def __init__(self, p: int, edges: Iterable[Edge] = (), perfect: bool = False):
        if p < 0:
            raise GraphError(f"Node count must be non-negative, got {p}")
        edge_set = set()
        adj: Dict[int, Set[int]] = {v: set() for v in range(p)}
        for u, v in edges:
            u, v = _check_node(p, u), _check_node(p, v)
            if u == v:
                raise GraphError(f"Self-loop on node {u}")
            edge_set.add(_pair(u, v))
            adj[u].add(v)
            adj[v].add(u)
        self._p = p
        self._edges = frozenset(edge_set)
        self._adj = {v: frozenset(nbrs) for v, nbrs in adj.items()}
        self._perfect = bool(perfect)

    @property
    def p(self) -> int:
        return self._p

    @property
    def edges(self) -> FrozenSet[Edge]:
        return self._edges

    @property
    def perfect(self) -> bool:
        return self._perfect

    @property
    def num_edges(self) -> int:
        return len(self._edges)

    def has_edge(self, u: int, v: int) -> bool:
        return _pair(u, v) in self._edges

    def neighbors(self, v: int) -> FrozenSet[int]:
        return self._adj[v]

    def to_networkx(self) -> nx.Graph:
        graph = nx.Graph()
        graph.add_nodes_from(range(self._p))
        graph.add_edges_from(sorted(self._edges))
        return graph

    @classmethod
    def from_dag(cls, dag: Dag, perfect: bool = True) -> 'Superstructure':
        return cls(dag.p, dag.skeleton(), perfect=perfect)

    def contains_skeleton(self, dag: Dag) -> bool:
        return dag.skeleton() <= self._edges

    def to_edge_list(self) -> str:
        lines = [f"p={self._p}", f"# perfect={int(self._perfect)}"]
        lines.extend(f"{u} -- {v}" for u, v in sorted(self._edges))
        return '\n'.join(lines) + '\n'

    @classmethod
    def from_edge_list(cls, text: str) -> 'Superstructure':
        p, meta, rows = _parse_edge_lines(text)
        for u, mu, mv, v in rows:
            if (mu, mv) != (TAIL, TAIL):
                raise GraphError(f"Superstructure edge {u}-{v} must be undirected")
        return cls(p, [(u, v) for u, _, _, v in rows], perfect=meta.get('perfect', '0') == '1')

    def __eq__(self, other) -> bool:
        return (isinstance(other, Superstructure) and self._p == other._p
                and self._edges == other._edges and self._perfect == other._perfect)

    def __hash__(self) -> int:
        return hash((self._p, self._edges, self._perfect))

    def __repr__(self) -> str:
        return f"Superstructure(p={self._p}, edges={len(self._edges)}, perfect={self._perfect})"


# ---------------------------------------------------------------------------
# Colliders, cycles, Meek orientation
# ---------------------------------------------------------------------------

@dataclass(frozen=True, order=True)
class UnshieldedCollider:
    """Triple u *-> v <-* w with u, w non-adjacent; canonical form has u < w."""
    u: int
    v: int
    w: int

    @classmethod
    def of(cls, u: int, v: int, w: int) -> 'UnshieldedCollider':
        if u == w:
            raise GraphError("Collider endpoints must differ")
        return cls(min(u, w), v, max(u, w))


def unshielded_colliders(g: _MarkedEdges) -> Set[UnshieldedCollider]:
    """Every u *-> v <-* w with u not adjacent to w; only the marks at v matter."""
    found = set()
    for v in range(g.p):
        into = [u for u in g.neighbors(v) if g.has_arrowhead(u, v)]
        for i, u in enumerate(into):
            for w in into[i + 1:]:
                if not g.is_adjacent(u, w):
                    found.add(UnshieldedCollider(u, v, w))
    return found


def directed_cycle_in(edges: Iterable[Edge]) -> Optional[List[Edge]]:
    """A directed cycle in a raw edge collection (may hold both u->v and v->u)."""
    view = nx.DiGraph()
    view.add_edges_from(sorted(set(edges)))
    try:
        return [(u, v) for u, v in nx.find_cycle(view)]
    except nx.NetworkXNoCycle:
        return None


def find_directed_cycle(g: _MarkedEdges) -> Optional[List[Edge]]:
    """A directed cycle among Tail/Arrow edges, or None when that subgraph is acyclic."""
    return directed_cycle_in(g.directed_edges())


def _meek_forces(b: _MarkedEdges, a: int, c: int) -> bool:
    """Whether one of Meek's rules R1-R4 orients the undirected edge a - c as a -> c."""
    nbrs_a = b.neighbors(a)
    # R1: k -> a, k not adjacent to c
    for k in nbrs_a:
        if k != c and b.is_directed(k, a) and not b.is_adjacent(k, c):
            return True
    # R2: a -> k -> c
    for k in nbrs_a:
        if b.is_directed(a, k) and b.is_directed(k, c):
            return True
    undirected_a = [k for k in nbrs_a if k != c and b.is_undirected(a, k)]
    # R3: a - k1 -> c, a - k2 -> c, k1 not adjacent to k2
    into_c = [k for k in undirected_a if b.is_directed(k, c)]
    for i, k1 in enumerate(into_c):
        for k2 in into_c[i + 1:]:
            if not b.is_adjacent(k1, k2):
                return True
    # R4: a - d, d -> k -> c, a adjacent to k, d not adjacent to c
    for d in undirected_a:
        if b.is_adjacent(d, c):
            continue
        for k in b.children(d):
            if k != a and b.is_directed(k, c) and b.is_adjacent(a, k):
                return True
    return False


def meek_orient_in_place(b: MixedGraphBuilder) -> int:
    oriented = 0
    changed = True
    while changed:
        changed = False
        for u, v in b.undirected_edges():
            if not b.is_undirected(u, v):
                continue
            if _meek_forces(b, u, v):
                b.orient(u, v)
            elif _meek_forces(b, v, u):
                b.orient(v, u)
            else:
                continue
            oriented += 1
            changed = True
    return oriented


def apply_meek_rules(g: MixedGraph) -> MixedGraph:
    """Close a partially directed graph under Meek's rules R1-R4."""
    b = g.builder()
    oriented = meek_orient_in_place(b)
    if oriented:
        logger.debug(f"Meek rules oriented {oriented} edges")
    return b.build()


def cpdag_of_dag(g: Dag) -> MixedGraph:
    """Completed partially directed graph of the Markov equivalence class of g."""
    b = MixedGraphBuilder(g.p)
    for u, v in g.skeleton():
        b.add_undirected(u, v)
    for collider in unshielded_colliders(g.to_mixed()):
        b.orient(collider.u, collider.v)
        b.orient(collider.w, collider.v)
    meek_orient_in_place(b)
    return b.build()


def consistent_extension(g: MixedGraph, rng: Optional[np.random.Generator] = None) -> Dag:
    """
    DAG with the skeleton and v-structures of the partially directed graph g.

    Repeatedly removes a sink whose undirected neighbours are adjacent to all of
    its other neighbours, directing the undirected edges into it. The smallest
    admissible sink is taken unless rng is given, in which case one is drawn at
    random so the result is a random member of the equivalence class.
    """
    for u, v, mu, mv in g.edges():
        if (mu, mv) not in ((TAIL, TAIL), (TAIL, ARROW), (ARROW, TAIL)):
            raise GraphError(f"Edge {u}-{v} has marks {mu.value}{mv.value}; expected a partially directed graph")

    remaining = set(range(g.p))
    edges = set(g.directed_edges())
    while remaining:
        admissible = []
        for x in sorted(remaining):
            nbrs = [y for y in g.neighbors(x) if y in remaining]
            if any(g.is_directed(x, y) for y in nbrs):
                continue
            loose = [y for y in nbrs if g.is_undirected(x, y)]
            if all(g.is_adjacent(y, z) for y in loose for z in nbrs if z != y):
                admissible.append(x)
        if not admissible:
            raise GraphError("Graph admits no consistent DAG extension")
        x = admissible[0] if rng is None else admissible[int(rng.integers(len(admissible)))]
        for y in g.neighbors(x):
            if y in remaining and g.is_undirected(x, y):
                edges.add((y, x))
        remaining.discard(x)
    return Dag(g.p, edges)


def mec_equivalent(a: _MarkedEdges, b: _MarkedEdges) -> bool:
    """Same skeleton and same unshielded colliders."""
    if a.p != b.p:
        raise GraphError(f"Node count mismatch: {a.p} vs {b.p}")
    return a.adjacencies() == b.adjacencies() and unshielded_colliders(a) == unshielded_colliders(b)
