"""
Latent projection of a DAG onto an observed node subset.

Inducing-path detection, latent MAG construction, and the exact oracle learner
that returns what a consistent latent-variable learner would report on the
subset under infinite data.
"""

from dataclasses import dataclass, field
from typing import Dict, FrozenSet, Iterable, Iterator, List, Set, Tuple

import networkx as nx

from utils.logger import get_logger
from .errors import GraphError, SubsetError
from .graph_core import (ARROW, CIRCLE, Dag, MixedGraph, MixedGraphBuilder,
                         unshielded_colliders)

logger = get_logger(__name__)


@dataclass(frozen=True)
class Subset:
    """Sorted, non-empty set of node ids drawn from a host graph over host_p nodes."""
    members: Tuple[int, ...]
    host_p: int
    _index: Dict[int, int] = field(init=False, repr=False, compare=False, hash=False)

    def __post_init__(self):
        members = tuple(sorted(set(int(m) for m in self.members)))
        if not members:
            raise SubsetError("Subset must be non-empty")
        if members[0] < 0 or members[-1] >= self.host_p:
            raise SubsetError(f"Subset members must lie in [0, {self.host_p})")
        object.__setattr__(self, 'members', members)
        object.__setattr__(self, '_index', {node: i for i, node in enumerate(members)})

    @classmethod
    def of(cls, members: Iterable[int], host_p: int) -> 'Subset':
        return cls(tuple(members), host_p)

    @classmethod
    def full(cls, p: int) -> 'Subset':
        return cls(tuple(range(p)), p)

    @property
    def size(self) -> int:
        return len(self.members)

    def __len__(self) -> int:
        return len(self.members)

    def __iter__(self) -> Iterator[int]:
        return iter(self.members)

    def __contains__(self, node: int) -> bool:
        return node in self._index

    def as_set(self) -> FrozenSet[int]:
        return frozenset(self.members)

    def contains_pair(self, u: int, v: int) -> bool:
        return u in self._index and v in self._index

    def local_index(self, node: int) -> int:
        return self._index[node]

    def global_id(self, local: int) -> int:
        return self.members[local]

    def to_local(self) -> Dict[int, int]:
        return dict(self._index)

    def to_global(self) -> Dict[int, int]:
        return dict(enumerate(self.members))


@dataclass(frozen=True)
class InducingPathQuery:
    """Does an inducing path relative to the complement of s connect u and v in g?"""
    g: Dag
    s: Subset
    u: int
    v: int

    def __post_init__(self):
        if self.s.host_p != self.g.p:
            raise SubsetError(f"Subset host size {self.s.host_p} differs from graph size {self.g.p}")
        if self.u == self.v:
            raise SubsetError("Inducing path endpoints must differ")
        if self.u not in self.s or self.v not in self.s:
            raise SubsetError(f"Endpoints {self.u}, {self.v} must belong to the subset")


def _inducing_path_exists(g: Dag, observed: Subset, u: int, v: int) -> bool:
    if g.is_adjacent(u, v):
        return True
    ancestral = g.ancestors(u) | g.ancestors(v)

    # Walk states (previous, current); a node is passable as a collider when it
    # is ancestral to an endpoint, and as a non-collider only when latent.
    frontier: List[Tuple[int, int]] = [(u, n) for n in g.neighbors(u)]
    seen: Set[Tuple[int, int]] = set(frontier)
    while frontier:
        prev, cur = frontier.pop()
        into_cur = g.has_edge(prev, cur)
        for nxt in g.neighbors(cur):
            if nxt == prev or nxt == u:
                continue
            if into_cur and g.has_edge(nxt, cur):
                passable = cur in ancestral
            else:
                passable = cur not in observed
            if not passable:
                continue
            if nxt == v:
                return True
            state = (cur, nxt)
            if state not in seen:
                seen.add(state)
                frontier.append(state)
    return False


def has_inducing_path(q: InducingPathQuery) -> bool:
    """
    True iff some path between q.u and q.v has every observed non-endpoint as
    a collider, every collider ancestral to q.u or q.v, and every non-collider
    latent. A direct edge is an inducing path.
    """
    return _inducing_path_exists(q.g, q.s, q.u, q.v)


def _check_ancestral(graph: MixedGraph) -> None:
    directed = graph.directed_view()
    for u, v, mu, mv in graph.edges():
        if mu is ARROW and mv is ARROW:
            if nx.has_path(directed, u, v) or nx.has_path(directed, v, u):
                raise GraphError(f"Almost directed cycle through bidirected edge {u}<->{v}")


def latent_mag(g: Dag, s: Subset) -> MixedGraph:
    """
    Latent MAG of g over s, in global node ids (p = g.p, non-members isolated).

    g-edges between members are kept; any other inducing-path pair gets a
    directed edge when one endpoint is an ancestor of the other, otherwise a
    bidirected edge.
    """
    if s.host_p != g.p:
        raise SubsetError(f"Subset host size {s.host_p} differs from graph size {g.p}")
    b = MixedGraphBuilder(g.p)
    members = s.members
    for i, u in enumerate(members):
        for v in members[i + 1:]:
            if g.has_edge(u, v):
                b.orient(u, v)
            elif g.has_edge(v, u):
                b.orient(v, u)
            elif _inducing_path_exists(g, s, u, v):
                if u in g.ancestors(v):
                    b.orient(u, v)
                elif v in g.ancestors(u):
                    b.orient(v, u)
                else:
                    b.set_edge(u, v, ARROW, ARROW)
    mag = b.build()
    _check_ancestral(mag)
    return mag


def oracle_learn(g: Dag, s: Subset) -> MixedGraph:
    """
    Infinite-data learner output on s in global ids: latent-MAG adjacencies,
    Arrow at the centre of every g-collider lying inside s, Circle elsewhere.
    """
    mag = latent_mag(g, s)
    b = MixedGraphBuilder(g.p)
    for u, v, _, _ in mag.edges():
        b.set_edge(u, v, CIRCLE, CIRCLE)
    for collider in unshielded_colliders(g.to_mixed()):
        if collider.u in s and collider.v in s and collider.w in s:
            for end in (collider.u, collider.w):
                mark_end, _ = b.marks(end, collider.v)
                b.set_edge(end, collider.v, mark_end, ARROW)
    return b.build()
