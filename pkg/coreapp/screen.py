"""
Merging of subset-learned graphs into one graph over all variables.

screen_infinite is the idealised merge: an adjacency survives only when every
subset holding both endpoints reports it, then learned colliders are oriented.
screen_finite adds what finite samples need: directed-edge preference,
penalised-likelihood resolution of opposite orientations, and removal of the
weakest overlap edge on every directed cycle, recorded in a replayable trace.
"""

import json
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, FrozenSet, Iterable, List, Optional, Sequence, Set, Tuple, Union

import numpy as np

from utils.config import config
from utils.logger import get_logger
from .errors import EdgeCoverageError, MergeError
from .graph_core import (Edge, MixedGraph, MixedGraphBuilder, Superstructure,
                         find_directed_cycle, meek_orient_in_place)
from .latent_projection import Subset
from .learners import LearnerConfig, SubsetResult
from .partition import Partition
from .synth import Dataset

logger = get_logger(__name__)

# Residual variance is floored at this fraction of the response variance
VARIANCE_FLOOR = 1e-12


class TwoCycleDecision(str, Enum):
    KEEP_IJ = "keep_ij"
    KEEP_JI = "keep_ji"
    DROP_BOTH = "drop_both"


@dataclass
class MergeConfig:
    """Merge settings; None means decided from the superstructure and learner."""
    use_superstructure_filter: Optional[bool] = None
    finite_sample: Optional[bool] = None
    apply_meek: bool = False
    ric_penalty_scale: float = config.RIC_PENALTY_SCALE

    def __post_init__(self):
        if self.ric_penalty_scale <= 0:
            raise MergeError("ric_penalty_scale must be positive")

    def resolve(self, g: Superstructure, learner: LearnerConfig) -> 'MergeConfig':
        """Concrete settings: filter on iff g is perfect; finite merge iff the learner uses data."""
        return MergeConfig(
            use_superstructure_filter=g.perfect if self.use_superstructure_filter is None
            else self.use_superstructure_filter,
            finite_sample=learner.is_data_driven if self.finite_sample is None else self.finite_sample,
            apply_meek=self.apply_meek,
            ric_penalty_scale=self.ric_penalty_scale,
        )

    def to_dict(self) -> Dict[str, Any]:
        return {
            'use_superstructure_filter': self.use_superstructure_filter,
            'finite_sample': self.finite_sample,
            'apply_meek': self.apply_meek,
            'ric_penalty_scale': self.ric_penalty_scale,
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'MergeConfig':
        return cls(**data)


@dataclass
class TraceEntry:
    """One cycle-resolution step."""
    cycle: List[Edge]
    candidates: List[Edge]
    scores: Dict[Edge, float]
    discarded: Edge
    fallback: bool = False

    def to_dict(self) -> Dict[str, Any]:
        return {
            'cycle': [list(e) for e in self.cycle],
            'candidates': [list(e) for e in self.candidates],
            'scores': [[u, v, s] for (u, v), s in sorted(self.scores.items())],
            'discarded': list(self.discarded),
            'fallback': self.fallback,
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'TraceEntry':
        return cls(
            cycle=[tuple(e) for e in data['cycle']],
            candidates=[tuple(e) for e in data['candidates']],
            scores={(int(u), int(v)): float(s) for u, v, s in data['scores']},
            discarded=tuple(data['discarded']),
            fallback=bool(data.get('fallback', False)),
        )


@dataclass
class TwoCycleRecord:
    """Opposite orientations of one pair and the penalised-likelihood verdict."""
    i: int
    j: int
    scores: Dict[str, float]
    decision: TwoCycleDecision

    def to_dict(self) -> Dict[str, Any]:
        return {'i': self.i, 'j': self.j, 'scores': self.scores, 'decision': self.decision.value}


@dataclass
class CycleResolutionTrace:
    """Audit log of the finite-sample merge; replaying it rebuilds the final graph."""
    initial: Optional[MixedGraph] = None
    entries: List[TraceEntry] = field(default_factory=list)
    two_cycles: List[TwoCycleRecord] = field(default_factory=list)

    def replay(self, graph: Optional[MixedGraph] = None) -> MixedGraph:
        graph = graph if graph is not None else self.initial
        if graph is None:
            raise MergeError("Nothing to replay the trace on")
        b = graph.builder()
        for entry in self.entries:
            b.remove_edge(*entry.discarded)
        return b.build()

    @property
    def discarded_edges(self) -> List[Edge]:
        return [e.discarded for e in self.entries]

    def to_dict(self) -> Dict[str, Any]:
        return {
            'initial': self.initial.to_edge_list() if self.initial is not None else None,
            'entries': [e.to_dict() for e in self.entries],
            'two_cycles': [r.to_dict() for r in self.two_cycles],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'CycleResolutionTrace':
        initial = MixedGraph.from_edge_list(data['initial']) if data.get('initial') else None
        two_cycles = [TwoCycleRecord(r['i'], r['j'], r['scores'], TwoCycleDecision(r['decision']))
                      for r in data.get('two_cycles', [])]
        return cls(initial, [TraceEntry.from_dict(e) for e in data.get('entries', [])], two_cycles)


# ---------------------------------------------------------------------------
# Likelihood scoring
# ---------------------------------------------------------------------------

def _node_loglik(data: Dataset, j: int, parents: Sequence[int]) -> float:
    """-(n/2)(log sigma^2 + 1) for X_j regressed on X_parents with an intercept."""
    n = data.n
    y = data.columns([j])[:, 0]
    y = y - y.mean()
    if parents:
        design = data.columns(list(parents))
        design = design - design.mean(axis=0)
        if np.linalg.matrix_rank(design) < design.shape[1]:
            logger.warning(f"Rank-deficient parent design for node {j} with parents {list(parents)}; "
                           f"using ridge lambda={config.RIDGE_LAMBDA}")
            gram = design.T @ design + config.RIDGE_LAMBDA * np.eye(design.shape[1])
            beta = np.linalg.solve(gram, design.T @ y)
        else:
            beta, *_ = np.linalg.lstsq(design, y, rcond=None)
        resid = y - design @ beta
    else:
        resid = y
    floor = VARIANCE_FLOOR * max(float(y @ y) / n, np.finfo(float).tiny)
    sigma2 = max(float(resid @ resid) / n, floor)
    return -0.5 * n * (math.log(sigma2) + 1.0)


def loglikelihood_score(i: int, j: int, graph: MixedGraph, data: Dataset) -> float:
    """Gain in node-j log-likelihood from keeping i among the parents of j."""
    if not graph.is_directed(i, j):
        raise MergeError(f"Edge {i}->{j} is not in the graph")
    parents = graph.parents(j)
    others = [k for k in parents if k != i]
    return _node_loglik(data, j, parents) - _node_loglik(data, j, others)


def ric_two_cycle(i: int, j: int, graph: MixedGraph, data: Dataset,
                  scale: float = 1.0) -> TwoCycleDecision:
    """
    Choose among i->j, j->i and no edge by -2 loglik + scale * 2 log(p) per edge
    parameter. Ties go to i->j, then j->i; no edge wins only when strictly best.
    """
    return _ric_scores(i, j, graph, data, scale)[0]


def _ric_scores(i: int, j: int, graph: MixedGraph, data: Dataset,
                scale: float) -> Tuple[TwoCycleDecision, Dict[str, float]]:
    pa_i = [k for k in graph.parents(i) if k != j]
    pa_j = [k for k in graph.parents(j) if k != i]
    penalty = scale * 2.0 * math.log(max(data.p, 2))

    def score(parents_i: Sequence[int], parents_j: Sequence[int]) -> float:
        loglik = _node_loglik(data, i, parents_i) + _node_loglik(data, j, parents_j)
        return -2.0 * loglik + penalty * (len(parents_i) + len(parents_j))

    scores = {
        TwoCycleDecision.KEEP_IJ.value: score(pa_i, sorted(pa_j + [i])),
        TwoCycleDecision.KEEP_JI.value: score(sorted(pa_i + [j]), pa_j),
        TwoCycleDecision.DROP_BOTH.value: score(pa_i, pa_j),
    }
    tol = 1e-9 * max(1.0, *(abs(s) for s in scores.values()))
    best, best_score = TwoCycleDecision.KEEP_IJ, scores[TwoCycleDecision.KEEP_IJ.value]
    for decision in (TwoCycleDecision.KEEP_JI, TwoCycleDecision.DROP_BOTH):
        if scores[decision.value] < best_score - tol:
            best, best_score = decision, scores[decision.value]
    return best, scores


# ---------------------------------------------------------------------------
# Cycle resolution
# ---------------------------------------------------------------------------

def _overlap_nodes(subsets: Iterable[Subset]) -> FrozenSet[int]:
    seen: Set[int] = set()
    overlap: Set[int] = set()
    for s in subsets:
        members = s.as_set()
        overlap |= seen & members
        seen |= members
    return frozenset(overlap)


def _resolve_cycle(graph: MixedGraph, cycle: List[Edge], overlap: FrozenSet[int],
                   data: Dataset) -> Tuple[MixedGraph, TraceEntry]:
    candidates = sorted(e for e in cycle if e[0] in overlap or e[1] in overlap)
    fallback = not candidates
    if fallback:
        logger.warning(f"No overlap-incident edge on cycle {cycle}; scoring the whole cycle")
        candidates = sorted(cycle)
    scores = {e: loglikelihood_score(e[0], e[1], graph, data) for e in candidates}
    discarded = min(candidates, key=lambda e: scores[e])
    b = graph.builder()
    b.remove_edge(*discarded)
    return b.build(), TraceEntry(list(cycle), candidates, scores, discarded, fallback)


def score_and_discard(graph: MixedGraph, cycle: List[Edge], part: Union[Partition, Sequence[Subset]],
                      data: Dataset) -> MixedGraph:
    """Remove the lowest-scoring cycle edge touching a node shared by two subsets."""
    subsets = part.subsets if isinstance(part, Partition) else part
    return _resolve_cycle(graph, cycle, _overlap_nodes(subsets), data)[0]


# ---------------------------------------------------------------------------
# Merges
# ---------------------------------------------------------------------------

def _consensus(g: Superstructure, graphs: List[MixedGraph], subsets: List[Subset],
               use_filter: bool) -> List[Edge]:
    """Learned adjacencies present in every result whose subset holds both ends."""
    candidates: Set[Edge] = set()
    for graph in graphs:
        candidates |= graph.adjacencies()
    if use_filter:
        candidates = {e for e in candidates if g.has_edge(*e)}
    kept = []
    for u, v in sorted(candidates):
        if all(graph.is_adjacent(u, v) for graph, s in zip(graphs, subsets) if s.contains_pair(u, v)):
            kept.append((u, v))
    return kept


def _prepare(g: Superstructure, results: List[SubsetResult]) -> Tuple[List[MixedGraph], List[Subset]]:
    if not results:
        raise MergeError("Nothing to merge")
    subsets = [r.subset for r in results]
    if any(s.host_p != g.p for s in subsets):
        raise MergeError("Results and superstructure disagree on the node count")
    return [r.global_graph() for r in results], subsets


def screen_infinite(g: Superstructure, results: List[SubsetResult], apply_meek: bool = False,
                    use_filter: bool = True, require_edge_cover: bool = True) -> MixedGraph:
    """
    Idealised merge.

    Keeps a superstructure-filtered adjacency iff every containing subset
    learned it, then orients u -> v <- w for every learned arrowhead pair at v
    whose edges survived and whose ends are non-adjacent in the merged graph.
    """
    graphs, subsets = _prepare(g, results)
    if require_edge_cover:
        for u, v in sorted(g.edges):
            if not any(s.contains_pair(u, v) for s in subsets):
                raise EdgeCoverageError((u, v))

    b = MixedGraphBuilder(g.p)
    for u, v in _consensus(g, graphs, subsets, use_filter):
        b.add_undirected(u, v)

    skipped = 0
    for graph, s in zip(graphs, subsets):
        for v in s.members:
            into = [u for u in graph.neighbors(v) if graph.has_arrowhead(u, v)]
            for a, u in enumerate(into):
                for w in into[a + 1:]:
                    if not (b.is_adjacent(u, v) and b.is_adjacent(w, v)) or b.is_adjacent(u, w):
                        continue
                    if b.has_arrowhead(v, u) or b.has_arrowhead(v, w):
                        skipped += 1
                        continue
                    b.orient(u, v)
                    b.orient(w, v)
    if skipped:
        logger.warning(f"Skipped {skipped} collider orientations that contradict earlier ones")
    if apply_meek:
        meek_orient_in_place(b)
    return b.build()


def screen_finite(g: Superstructure, results: List[SubsetResult], data: Dataset,
                  cfg: Optional[MergeConfig] = None) -> Tuple[MixedGraph, CycleResolutionTrace]:
    """
    Finite-sample merge: consensus adjacencies, directed where some subset put
    an arrowhead and none the reverse, opposite orientations settled by the
    penalised-likelihood rule, then one edge removed per directed cycle until
    the directed part is acyclic.
    """
    if data is None:
        raise MergeError("Finite-sample merge needs the dataset")
    cfg = cfg or MergeConfig()
    use_filter = g.perfect if cfg.use_superstructure_filter is None else cfg.use_superstructure_filter
    graphs, subsets = _prepare(g, results)
    if not data.covers(range(g.p)):
        raise MergeError("Dataset columns do not cover the merged variables")

    b = MixedGraphBuilder(g.p)
    conflicts: List[Edge] = []
    for u, v in _consensus(g, graphs, subsets, use_filter):
        holders = [graph for graph, s in zip(graphs, subsets) if s.contains_pair(u, v)]
        forward = any(graph.has_arrowhead(u, v) for graph in holders)
        backward = any(graph.has_arrowhead(v, u) for graph in holders)
        if forward and backward:
            conflicts.append((u, v))
        elif forward:
            b.orient(u, v)
        elif backward:
            b.orient(v, u)
        else:
            b.add_undirected(u, v)

    trace = CycleResolutionTrace()
    for u, v in conflicts:
        decision, scores = _ric_scores(u, v, b.build(), data, cfg.ric_penalty_scale)
        if decision is TwoCycleDecision.KEEP_IJ:
            b.orient(u, v)
        elif decision is TwoCycleDecision.KEEP_JI:
            b.orient(v, u)
        trace.two_cycles.append(TwoCycleRecord(u, v, scores, decision))

    if cfg.apply_meek:
        meek_orient_in_place(b)

    graph = b.build()
    trace.initial = graph
    overlap = _overlap_nodes(subsets)
    cycle = find_directed_cycle(graph)
    while cycle is not None:
        graph, entry = _resolve_cycle(graph, cycle, overlap, data)
        trace.entries.append(entry)
        cycle = find_directed_cycle(graph)

    logger.info(f"Merged {len(results)} subsets: {graph.num_edges} edges, "
                f"{len(conflicts)} opposite orientations, {len(trace.entries)} cycle removals")
    return graph, trace


def merge_results(g: Superstructure, results: List[SubsetResult], data: Optional[Dataset],
                  cfg: MergeConfig, require_edge_cover: bool = True
                  ) -> Tuple[MixedGraph, Optional[CycleResolutionTrace]]:
    """Run the merge selected by a resolved MergeConfig."""
    if cfg.finite_sample:
        return screen_finite(g, results, data, cfg)
    use_filter = True if cfg.use_superstructure_filter is None else cfg.use_superstructure_filter
    merged = screen_infinite(g, results, apply_meek=cfg.apply_meek, use_filter=use_filter,
                             require_edge_cover=require_edge_cover and use_filter)
    return merged, None
