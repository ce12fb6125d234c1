"""
Subset causal learners.

A learner takes the dataset and one subset of the partition and returns a
marked graph over subset-local node ids. Built in: PC-stable with the Fisher-z
partial-correlation test, an exhaustive BIC search for tiny subsets, and the
infinite-data oracle for synthetic runs. learn_all runs a learner over every
subset of a partition, in parallel through joblib.
"""

import itertools
import math
import time
from dataclasses import dataclass
from enum import Enum
from typing import Any, Callable, Dict, Iterator, List, Optional, Sequence, Set, Tuple

import numpy as np
from joblib import Parallel, delayed
from scipy.stats import norm

from utils.config import config
from utils.logger import LoggerMixin, get_logger, log_performance
from .errors import (ConfigError, DegenerateDataError, GraphError,
                     LearnerError, SingularCovarianceError, SubsetLearningError,
                     SubsetTooLargeError)
from .graph_core import (Dag, Edge, MixedGraph, MixedGraphBuilder, Superstructure,
                         consistent_extension, cpdag_of_dag, meek_orient_in_place)
from .latent_projection import Subset, oracle_learn
from .partition import Partition
from .synth import Dataset

logger = get_logger(__name__)

# Condition number above which a conditioning block counts as singular
SINGULAR_CONDITION = 1e12


class LearnerAlgorithm(str, Enum):
    PC = "pc"
    EXACT = "exact"
    ORACLE = "oracle"


@dataclass
class LearnerConfig:
    """Which learner to run on each subset, and its settings."""
    algorithm: LearnerAlgorithm = LearnerAlgorithm.PC
    alpha: float = config.DEFAULT_ALPHA
    max_cond_set: Optional[int] = None
    fixed_gaps: Optional[Superstructure] = None
    dag_extension: bool = False
    seed: int = 0

    def __post_init__(self):
        self.algorithm = LearnerAlgorithm(self.algorithm)
        if not 0.0 < self.alpha < 1.0:
            raise ConfigError(f"alpha must lie in (0, 1), got {self.alpha}")
        if self.max_cond_set is not None and self.max_cond_set < 0:
            raise ConfigError("max_cond_set must be non-negative")

    @property
    def is_data_driven(self) -> bool:
        return self.algorithm is not LearnerAlgorithm.ORACLE

    def to_dict(self) -> Dict[str, Any]:
        return {
            'algorithm': self.algorithm.value,
            'alpha': self.alpha,
            'max_cond_set': self.max_cond_set,
            'fixed_gaps': self.fixed_gaps is not None,
            'dag_extension': self.dag_extension,
            'seed': self.seed,
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'LearnerConfig':
        """Fixed gaps are run-time state and are never read back."""
        data = {k: v for k, v in data.items() if k != 'fixed_gaps'}
        return cls(**data)


@dataclass
class SubsetResult:
    """Learned graph over subset-local ids 0..|subset|-1."""
    subset: Subset
    graph: MixedGraph
    wall_time: float
    learner: LearnerConfig

    def __post_init__(self):
        if self.graph.p != len(self.subset):
            raise LearnerError(f"Result graph has {self.graph.p} nodes for a subset of {len(self.subset)}")

    def global_graph(self) -> MixedGraph:
        """The learned graph in host node ids."""
        return self.graph.relabel(self.subset.to_global(), self.subset.host_p)


# ---------------------------------------------------------------------------
# Fisher-z test
# ---------------------------------------------------------------------------

class FisherZTest:
    """Partial-correlation test over a fixed set of dataset columns."""

    def __init__(self, data: Dataset, nodes: Sequence[int]):
        self.nodes = tuple(nodes)
        self.n = data.n
        self._index = {v: k for k, v in enumerate(self.nodes)}
        self.correlation = data.correlation(self.nodes)

    def partial_correlation(self, i: int, j: int, cond: Sequence[int]) -> float:
        cond = tuple(sorted(cond))
        if i == j or i in cond or j in cond:
            raise LearnerError(f"Invalid CI query {i}, {j} | {cond}")
        c = [self._index[k] for k in cond]
        if c and np.linalg.cond(self.correlation[np.ix_(c, c)]) > SINGULAR_CONDITION:
            raise SingularCovarianceError(cond)
        idx = [self._index[i], self._index[j]] + c
        sub = self.correlation[np.ix_(idx, idx)]
        try:
            inv = np.linalg.inv(sub)
        except np.linalg.LinAlgError:
            inv = np.linalg.pinv(sub)
        r = -inv[0, 1] / math.sqrt(abs(inv[0, 0] * inv[1, 1]))
        # |r| can reach 1 for deterministic relations or tiny samples
        limit = 1.0 - np.finfo(float).eps
        return float(np.clip(r, -limit, limit))

    def statistic(self, i: int, j: int, cond: Sequence[int]) -> float:
        if self.n <= len(cond) + 3:
            raise LearnerError(f"Sample size {self.n} too small for conditioning set of size {len(cond)}")
        r = self.partial_correlation(i, j, cond)
        return math.sqrt(self.n - len(cond) - 3) * abs(math.atanh(r))

    def pvalue(self, i: int, j: int, cond: Sequence[int]) -> float:
        return float(2.0 * norm.sf(self.statistic(i, j, cond)))

    def independent(self, i: int, j: int, cond: Sequence[int], alpha: float) -> bool:
        return self.statistic(i, j, cond) <= norm.ppf(1.0 - alpha / 2.0)


def fisher_z_ci_test(data: Dataset, i: int, j: int, cond: Set[int], alpha: float) -> bool:
    """True when X_i and X_j test as independent given X_cond at level alpha."""
    nodes = sorted({i, j} | set(cond))
    return FisherZTest(data, nodes).independent(i, j, sorted(cond), alpha)


# ---------------------------------------------------------------------------
# PC-stable
# ---------------------------------------------------------------------------

IndependenceOracle = Callable[[int, int, Tuple[int, ...]], bool]


def pc_skeleton(k: int, independent: IndependenceOracle, max_cond_set: Optional[int] = None,
                allowed: Optional[Callable[[int, int], bool]] = None
                ) -> Tuple[Dict[int, Set[int]], Dict[Edge, Tuple[int, ...]]]:
    """
    Order-independent skeleton search over nodes 0..k-1.

    Conditioning sets at each level are drawn from the adjacencies frozen at
    the start of that level. Returns adjacency sets and separating sets.
    """
    adj: Dict[int, Set[int]] = {x: set() for x in range(k)}
    for x, y in itertools.combinations(range(k), 2):
        if allowed is None or allowed(x, y):
            adj[x].add(y)
            adj[y].add(x)
    sepsets: Dict[Edge, Tuple[int, ...]] = {}

    level = 0
    while max_cond_set is None or level <= max_cond_set:
        frozen = {x: sorted(adj[x]) for x in range(k)}
        testable = False
        for x in range(k):
            for y in frozen[x]:
                if y not in adj[x]:
                    continue
                others = [z for z in frozen[x] if z != y]
                if len(others) < level:
                    continue
                testable = True
                for cond in itertools.combinations(others, level):
                    if independent(x, y, cond):
                        adj[x].discard(y)
                        adj[y].discard(x)
                        sepsets[(min(x, y), max(x, y))] = cond
                        break
        if not testable:
            break
        level += 1
    return adj, sepsets


def orient_pc(k: int, adj: Dict[int, Set[int]], sepsets: Dict[Edge, Tuple[int, ...]]) -> MixedGraph:
    """v-structures from separating sets, then Meek closure."""
    b = MixedGraphBuilder(k)
    for x in range(k):
        for y in adj[x]:
            if x < y:
                b.add_undirected(x, y)
    for z in range(k):
        nbrs = sorted(adj[z])
        for i, x in enumerate(nbrs):
            for y in nbrs[i + 1:]:
                if y in adj[x] or z in sepsets.get((x, y), ()):
                    continue
                for end in (x, y):
                    # first orientation wins on conflicting v-structures
                    if not b.is_directed(z, end):
                        b.orient(end, z)
    meek_orient_in_place(b)
    return b.build()


def _check_columns(data: Optional[Dataset], subset: Subset) -> Dataset:
    if data is None:
        raise LearnerError("This learner needs a dataset")
    if not data.covers(subset.members):
        raise LearnerError("Dataset columns do not cover the subset")
    degenerate = data.zero_variance_nodes(subset.members)
    if degenerate:
        raise DegenerateDataError(degenerate[0])
    return data


def _maybe_extend(graph: MixedGraph, cfg: LearnerConfig) -> MixedGraph:
    if not cfg.dag_extension:
        return graph
    try:
        return consistent_extension(graph, np.random.default_rng(cfg.seed)).to_mixed()
    except GraphError as e:
        logger.warning(f"Keeping partially directed output: {e}")
        return graph


def pc_learn(data: Dataset, subset: Subset, cfg: LearnerConfig) -> SubsetResult:
    """CPDAG over the subset from PC-stable with Fisher-z tests."""
    start = time.perf_counter()
    _check_columns(data, subset)
    k = len(subset)
    if k == 1:
        return SubsetResult(subset, MixedGraph(1), time.perf_counter() - start, cfg)

    test = FisherZTest(data, subset.members)
    g = subset.members

    def independent(a: int, b: int, cond: Tuple[int, ...]) -> bool:
        return test.independent(g[a], g[b], [g[c] for c in cond], cfg.alpha)

    allowed = None
    if cfg.fixed_gaps is not None:
        gaps = cfg.fixed_gaps
        allowed = lambda a, b: gaps.has_edge(g[a], g[b])  # noqa: E731

    cap = data.n - 4
    max_cond = cap if cfg.max_cond_set is None else min(cfg.max_cond_set, cap)
    adj, sepsets = pc_skeleton(k, independent, max_cond, allowed)
    graph = _maybe_extend(orient_pc(k, adj, sepsets), cfg)
    return SubsetResult(subset, graph, time.perf_counter() - start, cfg)


# ---------------------------------------------------------------------------
# Exhaustive BIC search
# ---------------------------------------------------------------------------

def _acyclic(k: int, edges: Sequence[Edge]) -> bool:
    indegree = [0] * k
    out: List[List[int]] = [[] for _ in range(k)]
    for u, v in edges:
        out[u].append(v)
        indegree[v] += 1
    ready = [v for v in range(k) if indegree[v] == 0]
    seen = 0
    while ready:
        u = ready.pop()
        seen += 1
        for v in out[u]:
            indegree[v] -= 1
            if indegree[v] == 0:
                ready.append(v)
    return seen == k


def enumerate_dags(k: int) -> Iterator[Tuple[Edge, ...]]:
    """Every DAG on nodes 0..k-1 as a tuple of edges, in a fixed order."""
    pairs = list(itertools.combinations(range(k), 2))
    for choice in itertools.product((0, 1, 2), repeat=len(pairs)):
        edges = tuple((a, b) if c == 1 else (b, a) for (a, b), c in zip(pairs, choice) if c)
        if _acyclic(k, edges):
            yield edges


def gaussian_bic(X: np.ndarray, j: int, parents: Sequence[int]) -> float:
    """Node-wise Gaussian log-likelihood minus (|parents| + 1) / 2 * log n, X centred."""
    n = X.shape[0]
    y = X[:, j]
    if parents:
        design = X[:, list(parents)]
        beta, *_ = np.linalg.lstsq(design, y, rcond=None)
        resid = y - design @ beta
    else:
        resid = y
    sigma2 = max(float(resid @ resid) / n, np.finfo(float).tiny)
    loglik = -0.5 * n * (math.log(2.0 * math.pi * sigma2) + 1.0)
    return loglik - 0.5 * (len(parents) + 1) * math.log(n)


def exact_learn(data: Dataset, subset: Subset, cfg: LearnerConfig) -> SubsetResult:
    """CPDAG of the BIC-best DAG over a subset of at most EXACT_MAX_NODES nodes."""
    start = time.perf_counter()
    k = len(subset)
    if k > config.EXACT_MAX_NODES:
        raise SubsetTooLargeError(f"Exhaustive search supports at most {config.EXACT_MAX_NODES} nodes, got {k}")
    _check_columns(data, subset)
    X = data.columns(subset.members)
    X = X - X.mean(axis=0)

    cache: Dict[Tuple[int, Tuple[int, ...]], float] = {}
    best_score, best_edges = -math.inf, ()
    for edges in enumerate_dags(k):
        total = 0.0
        for j in range(k):
            parents = tuple(sorted(u for u, v in edges if v == j))
            key = (j, parents)
            if key not in cache:
                cache[key] = gaussian_bic(X, j, parents)
            total += cache[key]
        if total > best_score:
            best_score, best_edges = total, edges
    graph = _maybe_extend(cpdag_of_dag(Dag(k, best_edges)), cfg)
    return SubsetResult(subset, graph, time.perf_counter() - start, cfg)


# ---------------------------------------------------------------------------
# Learner objects and parallel driver
# ---------------------------------------------------------------------------

class SubsetLearner(LoggerMixin):
    """Common interface: learn(data, subset) -> SubsetResult."""

    def __init__(self, cfg: LearnerConfig):
        self.cfg = cfg

    def learn(self, data: Optional[Dataset], subset: Subset) -> SubsetResult:
        raise NotImplementedError


class PCLearner(SubsetLearner):
    def learn(self, data, subset):
        return pc_learn(data, subset, self.cfg)


class ExactLearner(SubsetLearner):
    def learn(self, data, subset):
        return exact_learn(data, subset, self.cfg)


class OracleLearner(SubsetLearner):
    """Reads the answer off the true DAG; synthetic mode only."""

    def __init__(self, cfg: LearnerConfig, truth: Dag):
        super().__init__(cfg)
        self.truth = truth

    def learn(self, data, subset):
        start = time.perf_counter()
        graph = oracle_learn(self.truth, subset).relabel(subset.to_local(), len(subset))
        return SubsetResult(subset, graph, time.perf_counter() - start, self.cfg)


def get_learner(cfg: LearnerConfig, truth: Optional[Dag] = None) -> SubsetLearner:
    """Build the learner named by cfg.algorithm."""
    if cfg.algorithm is LearnerAlgorithm.PC:
        return PCLearner(cfg)
    if cfg.algorithm is LearnerAlgorithm.EXACT:
        return ExactLearner(cfg)
    if truth is None:
        raise ConfigError("The oracle learner needs the ground-truth DAG")
    return OracleLearner(cfg, truth)


@dataclass
class _LearnFailure:
    index: int
    message: str
    error_type: str


def _learn_one(learner: SubsetLearner, data: Optional[Dataset], index: int, subset: Subset):
    try:
        return learner.learn(data, subset)
    except Exception as e:
        return _LearnFailure(index, str(e), type(e).__name__)


def learn_all(data: Optional[Dataset], part: Partition, cfg: LearnerConfig, workers: int = 1,
              truth: Optional[Dag] = None, backend: Optional[str] = None) -> List[SubsetResult]:
    """
    One result per subset, in subset order, independent of scheduling.

    Subsets are learned concurrently when workers > 1. The first failing
    subset (by index) is re-raised as SubsetLearningError.
    """
    if workers < 1:
        raise ConfigError("workers must be positive")
    if data is not None and not data.covers(range(part.host_p)):
        raise LearnerError("Dataset columns do not cover the partition")
    learner = get_learner(cfg, truth)

    start = time.perf_counter()
    if workers == 1 or len(part) == 1:
        outcomes = [_learn_one(learner, data, i, s) for i, s in enumerate(part)]
    else:
        outcomes = Parallel(n_jobs=workers, backend=backend or config.JOBLIB_BACKEND)(
            delayed(_learn_one)(learner, data, i, s) for i, s in enumerate(part)
        )
    elapsed = time.perf_counter() - start

    for outcome in outcomes:
        if isinstance(outcome, _LearnFailure):
            logger.error(f"Learner failed on subset {outcome.index}: {outcome.error_type}: {outcome.message}")
            raise SubsetLearningError(outcome.index, f"{outcome.error_type}: {outcome.message}")
    log_performance(logger, "learn_all", elapsed, subsets=len(part), workers=workers,
                    learner=cfg.algorithm.value, max_subset=part.max_subset_size)
    return outcomes
