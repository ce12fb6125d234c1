"""
Partitioning of the superstructure into node subsets.

Disjoint community detection by greedy modularity maximisation, and the two
overlapping extensions applied before learning: the causal expansion (each
subset absorbs its outer vertex boundary) and the minimal edge-cover
extension. Also provides the vertex-expansion size report and a checker for
the causal-partition properties in synthetic mode.
"""

from collections import Counter
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, FrozenSet, Iterator, List, Optional, Set, Tuple

import networkx as nx
import numpy as np
from networkx.algorithms.community import greedy_modularity_communities

from utils.logger import get_logger
from .errors import PartitionError
from .graph_core import Dag, Edge, Superstructure, unshielded_colliders
from .latent_projection import InducingPathQuery, Subset, has_inducing_path

logger = get_logger(__name__)


class PartitionKind(str, Enum):
    """How a partition was built."""
    DISJOINT = "disjoint"
    EDGE_COVER = "edge-cover"
    EXPANSIVE = "expansive"
    NONE = "none"


class PartitionMethod(str, Enum):
    """Disjoint partitioner used as the starting point."""
    GREEDY_MODULARITY = "greedy_modularity"
    RANDOM = "random"


@dataclass
class PartitionConfig:
    """Settings for the disjoint partitioner."""
    method: PartitionMethod = PartitionMethod.GREEDY_MODULARITY
    num_communities: Optional[int] = None
    resolution: float = 1.0
    seed: int = 0

    def __post_init__(self):
        self.method = PartitionMethod(self.method)
        if self.num_communities is not None and self.num_communities < 1:
            raise PartitionError("num_communities must be positive")
        if self.resolution <= 0:
            raise PartitionError("resolution must be positive")

    def to_dict(self) -> Dict[str, Any]:
        return {
            'method': self.method.value,
            'num_communities': self.num_communities,
            'resolution': self.resolution,
            'seed': self.seed,
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'PartitionConfig':
        return cls(**data)


@dataclass(frozen=True)
class Partition:
    """Ordered, vertex-covering list of subsets of one host graph."""
    subsets: Tuple[Subset, ...]
    kind: PartitionKind
    _host_p: int = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        subsets = tuple(self.subsets)
        if not subsets:
            raise PartitionError("Partition must contain at least one subset")
        host_ps = {s.host_p for s in subsets}
        if len(host_ps) != 1:
            raise PartitionError(f"Subsets disagree on host size: {sorted(host_ps)}")
        host_p = host_ps.pop()
        covered = set().union(*(s.as_set() for s in subsets))
        if len(covered) != host_p:
            missing = sorted(set(range(host_p)) - covered)
            raise PartitionError(f"Partition does not cover nodes {missing[:10]}")
        kind = PartitionKind(self.kind)
        if kind is PartitionKind.DISJOINT and sum(len(s) for s in subsets) != host_p:
            raise PartitionError("Disjoint partition has overlapping subsets")
        object.__setattr__(self, 'subsets', subsets)
        object.__setattr__(self, 'kind', kind)
        object.__setattr__(self, '_host_p', host_p)

    @property
    def host_p(self) -> int:
        return self._host_p

    def __len__(self) -> int:
        return len(self.subsets)

    def __iter__(self) -> Iterator[Subset]:
        return iter(self.subsets)

    def __getitem__(self, index: int) -> Subset:
        return self.subsets[index]

    @property
    def sizes(self) -> List[int]:
        return [len(s) for s in self.subsets]

    @property
    def max_subset_size(self) -> int:
        return max(self.sizes)

    def overlap_nodes(self) -> FrozenSet[int]:
        """Nodes that belong to at least two subsets."""
        counts = Counter(node for s in self.subsets for node in s)
        return frozenset(node for node, c in counts.items() if c > 1)

    def uncovered_edges(self, g: Superstructure) -> List[Edge]:
        return [e for e in sorted(g.edges) if not any(s.contains_pair(*e) for s in self.subsets)]

    def is_edge_covering(self, g: Superstructure) -> bool:
        return not self.uncovered_edges(g)

    def to_text(self) -> str:
        lines = [f"# kind={self.kind.value}", f"# p={self._host_p}"]
        lines.extend(' '.join(str(m) for m in s.members) for s in self.subsets)
        return '\n'.join(lines) + '\n'

    @classmethod
    def from_text(cls, text: str) -> 'Partition':
        kind, p, rows = None, None, []
        for raw in text.splitlines():
            line = raw.strip()
            if not line:
                continue
            if line.startswith('#'):
                key, _, value = line[1:].strip().partition('=')
                if key.strip() == 'kind':
                    kind = value.strip()
                elif key.strip() == 'p':
                    p = int(value)
                continue
            try:
                rows.append([int(tok) for tok in line.split()])
            except ValueError:
                raise PartitionError(f"Invalid subset line {line!r}")
        if kind is None:
            raise PartitionError("Partition file is missing '# kind=<kind>' header")
        if p is None:
            p = max((max(r) for r in rows if r), default=-1) + 1
        return cls(tuple(Subset.of(r, p) for r in rows), PartitionKind(kind))


def outer_boundary(g: Superstructure, s: Subset) -> Set[int]:
    """Nodes outside s adjacent in g to some member of s."""
    members = s.as_set()
    return {v for u in members for v in g.neighbors(u) if v not in members}


def random_partition(p: int, k: int, seed: int = 0) -> Partition:
    """Seeded disjoint partition of 0..p-1 into k nearly equal random blocks."""
    if p < 1:
        raise PartitionError("Cannot partition an empty graph")
    k = max(1, min(k, p))
    order = np.random.default_rng(seed).permutation(p)
    blocks = [sorted(int(v) for v in chunk) for chunk in np.array_split(order, k)]
    blocks.sort(key=lambda b: b[0])
    return Partition(tuple(Subset.of(b, p) for b in blocks), PartitionKind.DISJOINT)


def disjoint_partition(g: Superstructure, cfg: Optional[PartitionConfig] = None) -> Partition:
    """
    Disjoint communities of g by greedy modularity agglomeration.

    cfg.num_communities pins the number of communities (merging stops at, and
    is forced down to, that count when the graph allows it). Isolated nodes
    stay singletons. Subsets are ordered by their smallest node.
    """
    cfg = cfg or PartitionConfig()
    if g.p == 0:
        raise PartitionError("Cannot partition an empty graph")
    if cfg.method is PartitionMethod.RANDOM:
        return random_partition(g.p, cfg.num_communities or 2, cfg.seed)

    if g.num_edges == 0:
        communities = [{v} for v in range(g.p)]
    else:
        kwargs: Dict[str, Any] = {'resolution': cfg.resolution}
        if cfg.num_communities is not None:
            pinned = min(cfg.num_communities, g.p)
            kwargs.update(cutoff=pinned, best_n=pinned)
        communities = greedy_modularity_communities(g.to_networkx(), **kwargs)

    blocks = sorted((sorted(c) for c in communities), key=lambda b: b[0])
    logger.debug(f"Greedy modularity found {len(blocks)} communities on {g.p} nodes")
    return Partition(tuple(Subset.of(b, g.p) for b in blocks), PartitionKind.DISJOINT)


def causal_expansion(g: Superstructure, part: Partition) -> Partition:
    """Each subset grows by its outer boundary in g."""
    expanded = tuple(Subset.of(s.as_set() | outer_boundary(g, s), s.host_p) for s in part)
    return Partition(expanded, PartitionKind.EXPANSIVE)


def edge_cover_expansion(g: Superstructure, part: Partition) -> Partition:
    """For every cut edge between S_i and S_j (i < j) the S_j endpoint joins S_i."""
    owner: Dict[int, int] = {}
    for i, s in enumerate(part):
        for node in s:
            if node in owner:
                raise PartitionError("Edge-cover extension requires a disjoint partition")
            owner[node] = i
    grown = [set(s.members) for s in part]
    for u, v in sorted(g.edges):
        i, j = owner[u], owner[v]
        if i < j:
            grown[i].add(v)
        elif j < i:
            grown[j].add(u)
    return Partition(tuple(Subset.of(b, part.host_p) for b in grown), PartitionKind.EDGE_COVER)


def make_partition(g: Superstructure, kind: PartitionKind, cfg: Optional[PartitionConfig] = None) -> Partition:
    """Partition of the requested kind; `none` is the single subset of all nodes."""
    kind = PartitionKind(kind)
    if kind is PartitionKind.NONE:
        if g.p == 0:
            raise PartitionError("Cannot partition an empty graph")
        return Partition((Subset.full(g.p),), PartitionKind.NONE)
    base = disjoint_partition(g, cfg)
    if kind is PartitionKind.DISJOINT:
        return base
    if kind is PartitionKind.EDGE_COVER:
        return edge_cover_expansion(g, base)
    return causal_expansion(g, base)


def modularity(g: Superstructure, part: Partition) -> float:
    """Newman modularity of a disjoint partition of g."""
    return nx.community.modularity(g.to_networkx(), [s.as_set() for s in part])


@dataclass
class SubsetExpansion:
    index: int
    size: int
    boundary_size: int
    expanded_size: int

    @property
    def vertex_expansion(self) -> float:
        return self.boundary_size / self.size


@dataclass
class ExpansionReport:
    """Per-subset boundary sizes and vertex expansion of a disjoint partition."""
    p: int
    entries: List[SubsetExpansion]

    @property
    def max_expanded_size(self) -> int:
        return max(e.expanded_size for e in self.entries)

    @property
    def bound(self) -> float:
        return max((1.0 + e.vertex_expansion) * e.size for e in self.entries)

    @property
    def bound_applicable(self) -> bool:
        return all(e.size <= self.p / 2 for e in self.entries)

    def bound_holds(self) -> bool:
        return self.max_expanded_size <= self.bound + 1e-9

    def size_histogram(self) -> Dict[int, int]:
        """Expanded subset size -> number of subsets."""
        return dict(sorted(Counter(e.expanded_size for e in self.entries).items()))

    def to_dict(self) -> Dict[str, Any]:
        return {
            'p': self.p,
            'max_expanded_size': self.max_expanded_size,
            'bound': self.bound,
            'bound_applicable': self.bound_applicable,
            'subsets': [
                {'index': e.index, 'size': e.size, 'boundary_size': e.boundary_size,
                 'vertex_expansion': e.vertex_expansion, 'expanded_size': e.expanded_size}
                for e in self.entries
            ],
        }


def expansion_report(g: Superstructure, part: Partition) -> ExpansionReport:
    """Boundary sizes of a disjoint partition next to the subsets causal_expansion actually builds."""
    expanded = causal_expansion(g, part)
    entries = []
    for i, (s, grown) in enumerate(zip(part, expanded)):
        boundary = outer_boundary(g, s)
        entries.append(SubsetExpansion(i, len(s), len(boundary), len(grown)))
    return ExpansionReport(part.host_p, entries)


@dataclass
class CausalPartitionReport:
    """Outcome of the three causal-partition checks with witnesses."""
    uncovered_edges: List[Edge] = field(default_factory=list)
    unresolved_non_edges: List[Edge] = field(default_factory=list)
    split_colliders: List[Tuple[int, int, int]] = field(default_factory=list)

    @property
    def edge_coverage(self) -> bool:
        return not self.uncovered_edges

    @property
    def non_edges_resolved(self) -> bool:
        return not self.unresolved_non_edges

    @property
    def colliders_colocated(self) -> bool:
        return not self.split_colliders

    @property
    def passed(self) -> bool:
        return self.edge_coverage and self.non_edges_resolved and self.colliders_colocated


def verify_causal_properties(g: Superstructure, gstar: Dag, part: Partition) -> CausalPartitionReport:
    """
    Check that part is a causal partition of g for the true graph gstar:
    (i) every g-edge lies inside a subset; (ii) every g-edge absent from gstar
    is non-adjacent in the latent projection of some subset holding both ends;
    (iii) every unshielded collider of gstar lies inside a subset.
    """
    report = CausalPartitionReport(uncovered_edges=part.uncovered_edges(g))

    true_skeleton = gstar.skeleton()
    for u, v in sorted(g.edges - true_skeleton):
        holders = [s for s in part if s.contains_pair(u, v)]
        if not any(not has_inducing_path(InducingPathQuery(gstar, s, u, v)) for s in holders):
            report.unresolved_non_edges.append((u, v))

    for c in sorted(unshielded_colliders(gstar.to_mixed())):
        if not any(c.u in s and c.v in s and c.w in s for s in part):
            report.split_colliders.append((c.u, c.v, c.w))

    if not report.passed:
        logger.debug(f"Causal partition check failed: {report}")
    return report
