"""
Synthetic ground truth for causal discovery experiments.

Community-structured scale-free DAGs, linear Gaussian structural equation
models with ancestral sampling, and superstructures built either from the
true skeleton plus random extra edges or learned from data.
"""

import json
import math
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import networkx as nx
import numpy as np
import pandas as pd

from utils.logger import get_logger
from .errors import ConfigError, GraphError
from .graph_core import Dag, Edge, Superstructure

logger = get_logger(__name__)


class CycleRule(str, Enum):
    """What to do with inter-community edges that contradict the node order."""
    FLIP = "flip"
    DELETE = "delete"


@dataclass
class GraphSpec:
    """Community sizes with their attachment parameters, plus inter-community wiring."""
    communities: List[Tuple[int, int]] = field(default_factory=lambda: [(25, 1), (25, 2)])
    inter_community: int = 2
    seed: int = 0
    cycle_rule: CycleRule = CycleRule.FLIP

    def __post_init__(self):
        self.communities = [(int(size), int(m)) for size, m in self.communities]
        if not self.communities:
            raise ConfigError("GraphSpec needs at least one community")
        for size, m in self.communities:
            if size < 1 or m < 1:
                raise ConfigError(f"Community ({size}, {m}) needs size >= 1 and m >= 1")
        if self.inter_community < 0:
            raise ConfigError("inter_community must be non-negative")
        self.cycle_rule = CycleRule(self.cycle_rule)

    @property
    def p(self) -> int:
        return sum(size for size, _ in self.communities)

    @classmethod
    def planted(cls, num_communities: int, size: int, m_values: Sequence[int] = (1, 2),
                inter_community: Optional[int] = None, seed: int = 0) -> 'GraphSpec':
        """num_communities equal blocks cycling through m_values."""
        communities = [(size, m_values[k % len(m_values)]) for k in range(num_communities)]
        if inter_community is None:
            inter_community = 2 * (num_communities - 1)
        return cls(communities, inter_community, seed)

    @classmethod
    def with_nodes(cls, p: int, seed: int = 0) -> 'GraphSpec':
        """Two communities (m=1 and m=2) splitting p nodes."""
        first = max(1, p // 2)
        communities = [(first, 1)] + ([(p - first, 2)] if p - first > 0 else [])
        return cls(communities, 2 if len(communities) > 1 else 0, seed)

    def to_dict(self) -> Dict[str, Any]:
        return {
            'communities': [list(c) for c in self.communities],
            'inter_community': self.inter_community,
            'seed': self.seed,
            'cycle_rule': self.cycle_rule.value,
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'GraphSpec':
        return cls(**data)


def _community_graph(size: int, m: int, seed: int) -> nx.Graph:
    if size == 1:
        return nx.empty_graph(1)
    if m >= size:
        return nx.complete_graph(size)
    return nx.barabasi_albert_graph(size, m, seed=seed)


def generate_dag(spec: GraphSpec) -> Dag:
    """
    Scale-free communities joined by preferential attachment, oriented by a
    random topological order.

    Inter-community edges get a random direction first; under the flip rule
    every edge contradicting the order is reversed, under the delete rule an
    inter-community edge closing a directed cycle is dropped.
    """
    rng = np.random.default_rng(spec.seed)
    undirected = nx.Graph()
    membership: List[int] = []
    offset = 0
    for k, (size, m) in enumerate(spec.communities):
        block = _community_graph(size, m, int(rng.integers(2 ** 31 - 1)))
        undirected.add_nodes_from(range(offset, offset + size))
        undirected.add_edges_from((u + offset, v + offset) for u, v in block.edges())
        membership.extend([k] * size)
        offset += size
    p = offset

    rank = np.empty(p, dtype=int)
    rank[rng.permutation(p)] = np.arange(p)
    directed = {(u, v) if rank[u] < rank[v] else (v, u) for u, v in sorted(undirected.edges())}

    bridges: List[Edge] = []
    if len(spec.communities) > 1:
        for _ in range(spec.inter_community):
            weights = np.array([undirected.degree(v) for v in range(p)], dtype=float) + 1.0
            u = int(rng.choice(p, p=weights / weights.sum()))
            candidates = [v for v in range(p) if membership[v] != membership[u] and not undirected.has_edge(u, v)]
            if not candidates:
                continue
            cw = weights[candidates]
            v = candidates[int(rng.choice(len(candidates), p=cw / cw.sum()))]
            undirected.add_edge(u, v)
            bridges.append((u, v) if rng.random() < 0.5 else (v, u))

    if spec.cycle_rule is CycleRule.FLIP:
        directed.update((u, v) if rank[u] < rank[v] else (v, u) for u, v in bridges)
    else:
        current = nx.DiGraph()
        current.add_nodes_from(range(p))
        current.add_edges_from(sorted(directed))
        for u, v in bridges:
            if nx.has_path(current, v, u):
                logger.debug(f"Dropping inter-community edge {u}->{v}: closes a cycle")
                continue
            current.add_edge(u, v)
            directed.add((u, v))
    return Dag(p, directed)


def random_dag(p: int, edge_prob: float, seed: int = 0) -> Dag:
    """Erdos-Renyi DAG: each pair ordered by a random permutation kept with edge_prob."""
    rng = np.random.default_rng(seed)
    order = rng.permutation(p)
    edges = [(int(order[i]), int(order[j]))
             for i in range(p) for j in range(i + 1, p) if rng.random() < edge_prob]
    return Dag(p, edges)


@dataclass
class SemModel:
    """Linear Gaussian SEM: X_j = sum_i W[i, j] X_i + e_j, e_j ~ N(0, noise_vars[j])."""
    dag: Dag
    weights: Dict[Edge, float]
    noise_vars: Tuple[float, ...]
    seed: Optional[int] = None

    def __post_init__(self):
        self.weights = {(int(u), int(v)): float(w) for (u, v), w in self.weights.items()}
        self.noise_vars = tuple(float(s) for s in self.noise_vars)
        if set(self.weights) != set(self.dag.edges):
            raise GraphError("SEM weights must be defined exactly on the DAG edges")
        if any(w == 0.0 for w in self.weights.values()):
            raise GraphError("SEM weights must be nonzero")
        if len(self.noise_vars) != self.dag.p or any(s <= 0 for s in self.noise_vars):
            raise GraphError("SEM needs one positive noise variance per node")

    @property
    def p(self) -> int:
        return self.dag.p

    def weight_matrix(self) -> np.ndarray:
        W = np.zeros((self.p, self.p))
        for (u, v), w in self.weights.items():
            W[u, v] = w
        return W

    def implied_covariance(self) -> np.ndarray:
        """(I - W)^-T D (I - W)^-1 for row-vector samples."""
        inv = np.linalg.inv(np.eye(self.p) - self.weight_matrix())
        return inv.T @ np.diag(self.noise_vars) @ inv

    def to_dict(self) -> Dict[str, Any]:
        return {
            'p': self.p,
            'edges': [[u, v, self.weights[(u, v)]] for u, v in sorted(self.weights)],
            'noise_vars': list(self.noise_vars),
            'seed': self.seed,
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'SemModel':
        edges = [(int(u), int(v)) for u, v, _ in data['edges']]
        weights = {(int(u), int(v)): float(w) for u, v, w in data['edges']}
        return cls(Dag(int(data['p']), edges), weights, tuple(data['noise_vars']), data.get('seed'))

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    @classmethod
    def from_json(cls, text: str) -> 'SemModel':
        return cls.from_dict(json.loads(text))


def random_sem(dag: Dag, seed: int = 0, weight_range: Tuple[float, float] = (0.5, 1.0),
               noise_range: Tuple[float, float] = (0.0, 1.0)) -> SemModel:
    """Weights uniform on +-[lo, hi]; noise variances uniform on (lo, hi]."""
    lo, hi = weight_range
    if not 0 < lo <= hi:
        raise ConfigError(f"Invalid weight range {weight_range}")
    rng = np.random.default_rng(seed)
    weights = {}
    for edge in sorted(dag.edges):
        magnitude = rng.uniform(lo, hi)
        weights[edge] = magnitude if rng.random() < 0.5 else -magnitude
    nlo, nhi = noise_range
    noise = nhi - rng.uniform(0.0, nhi - nlo, size=dag.p)
    return SemModel(dag, weights, tuple(noise), seed)


@dataclass(eq=False)
class Dataset:
    """n x p observations with column j bound to node nodes[j]."""
    matrix: np.ndarray
    nodes: Tuple[int, ...] = ()
    seed: Optional[int] = None
    _column: Dict[int, int] = field(init=False, repr=False)

    def __post_init__(self):
        self.matrix = np.asarray(self.matrix, dtype=float)
        if self.matrix.ndim != 2 or self.matrix.shape[0] < 1:
            raise GraphError("Dataset matrix must be 2-D with at least one row")
        if not self.nodes:
            self.nodes = tuple(range(self.matrix.shape[1]))
        self.nodes = tuple(int(v) for v in self.nodes)
        if len(self.nodes) != self.matrix.shape[1] or len(set(self.nodes)) != len(self.nodes):
            raise GraphError("Dataset node binding must be a bijection onto its columns")
        self._column = {node: j for j, node in enumerate(self.nodes)}

    @property
    def n(self) -> int:
        return self.matrix.shape[0]

    @property
    def p(self) -> int:
        return self.matrix.shape[1]

    def covers(self, nodes) -> bool:
        return all(v in self._column for v in nodes)

    def column_index(self, node: int) -> int:
        return self._column[node]

    def columns(self, nodes: Sequence[int]) -> np.ndarray:
        return self.matrix[:, [self._column[v] for v in nodes]]

    def correlation(self, nodes: Optional[Sequence[int]] = None) -> np.ndarray:
        block = self.matrix if nodes is None else self.columns(nodes)
        return np.atleast_2d(np.corrcoef(block, rowvar=False))

    def zero_variance_nodes(self, nodes: Optional[Sequence[int]] = None) -> List[int]:
        nodes = list(self.nodes) if nodes is None else list(nodes)
        spread = np.ptp(self.columns(nodes), axis=0)
        return [v for v, s in zip(nodes, spread) if s == 0.0]

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(self.matrix, columns=[str(v) for v in self.nodes])

    def to_csv(self, path: Union[str, Path]) -> None:
        self.to_frame().to_csv(path, index=False)

    @classmethod
    def from_csv(cls, path: Union[str, Path], seed: Optional[int] = None) -> 'Dataset':
        frame = pd.read_csv(path)
        return cls(frame.to_numpy(dtype=float), tuple(int(c) for c in frame.columns), seed)


def sample_sem(model: SemModel, n: int, seed: int = 0) -> Dataset:
    """Ancestral sampling in topological order."""
    if n < 1:
        raise ConfigError("Sample size must be at least 1")
    rng = np.random.default_rng(seed)
    W = model.weight_matrix()
    X = rng.standard_normal((n, model.p)) * np.sqrt(np.asarray(model.noise_vars))
    for j in model.dag.topological_order():
        parents = list(model.dag.parents(j))
        if parents:
            X[:, j] += X[:, parents] @ W[parents, j]
    return Dataset(X, tuple(range(model.p)), seed)


def superstructure_with_extras(gstar: Dag, frac: float, seed: int = 0) -> Superstructure:
    """True skeleton plus ceil(frac * |E*|) uniformly drawn absent pairs; flagged perfect."""
    if frac < 0:
        raise ConfigError(f"extra edge fraction must be non-negative, got {frac}")
    skeleton = gstar.skeleton()
    wanted = math.ceil(frac * len(skeleton))
    absent = [(u, v) for u in range(gstar.p) for v in range(u + 1, gstar.p) if (u, v) not in skeleton]
    if wanted > len(absent):
        logger.warning(f"Requested {wanted} extra edges but only {len(absent)} pairs are absent; "
                       f"clamping to the complete graph")
        wanted = len(absent)
    rng = np.random.default_rng(seed)
    picked = rng.choice(len(absent), size=wanted, replace=False) if wanted else []
    extras = [absent[int(i)] for i in picked]
    return Superstructure(gstar.p, set(skeleton) | set(extras), perfect=True)


def superstructure_from_pc(data: Dataset, alpha: float) -> Superstructure:
    """Skeleton of a PC run over all variables; flagged imperfect."""
    from .latent_projection import Subset
    from .learners import LearnerConfig, pc_learn

    p = max(data.nodes) + 1
    if data.p < 2:
        return Superstructure(p, (), perfect=False)
    result = pc_learn(data, Subset.of(data.nodes, p), LearnerConfig(alpha=alpha))
    return Superstructure(p, result.global_graph().adjacencies(), perfect=False)
