"""
Accuracy metrics for learned graphs against a ground-truth DAG.
"""

import json
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, Optional

from utils.logger import get_logger
from .errors import MetricError
from .graph_core import CIRCLE, TAIL, Dag, MixedGraph, cpdag_of_dag

logger = get_logger(__name__)


class EvaluationMode(str, Enum):
    ADJACENCY = "adjacency"
    ORIENTED = "oriented"


@dataclass
class EvalReport:
    shd: int
    tpr: float
    fpr: float
    tp: int
    fp: int
    fn: int
    mode: EvaluationMode = EvaluationMode.ADJACENCY
    orientation_shd: Optional[int] = None
    wall_time_s: float = 0.0
    config: Dict[str, Any] = field(default_factory=dict)

    def to_dict(self) -> Dict[str, Any]:
        return {
            'shd': self.shd,
            'tpr': self.tpr,
            'fpr': self.fpr,
            'tp': self.tp,
            'fp': self.fp,
            'fn': self.fn,
            'mode': self.mode.value,
            'orientation_shd': self.orientation_shd,
            'wall_time_s': self.wall_time_s,
            'config': self.config,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'EvalReport':
        data = dict(data)
        data['mode'] = EvaluationMode(data.get('mode', EvaluationMode.ADJACENCY.value))
        return cls(**data)

    def to_row(self) -> Dict[str, Any]:
        """Flat metric columns for the results ledger."""
        return {
            'shd': self.shd,
            'tpr': round(self.tpr, 6),
            'fpr': round(self.fpr, 6),
            'tp': self.tp,
            'fp': self.fp,
            'fn': self.fn,
            'orientation_shd': '' if self.orientation_shd is None else self.orientation_shd,
            'eval_mode': self.mode.value,
            'wall_time_s': round(self.wall_time_s, 4),
        }


def _normalise(marks):
    # circle endpoints of an otherwise undirected merge output read as tails
    return None if marks is None else tuple(TAIL if m == CIRCLE else m for m in marks)


def _orientation_mismatches(est: MixedGraph, truth: MixedGraph) -> int:
    pairs = est.adjacencies() | truth.adjacencies()
    return sum(1 for u, v in pairs if _normalise(est.marks(u, v)) != _normalise(truth.marks(u, v)))


def evaluate(est: MixedGraph, truth: Dag, mode: EvaluationMode = EvaluationMode.ADJACENCY,
             wall_time_s: float = 0.0, run_config: Optional[Dict[str, Any]] = None) -> EvalReport:
    """
    Compare an estimate with the truth.

    Adjacency mode counts unordered pairs: SHD = FN + FP. Oriented mode
    compares endpoint marks against the CPDAG of the truth; every pair whose
    marks differ counts once toward SHD.
    """
    mode = EvaluationMode(mode)
    if est.p != truth.p:
        raise MetricError(f"Estimate has {est.p} nodes, truth has {truth.p}")

    true_pairs = truth.skeleton()
    est_pairs = est.adjacencies()
    tp = len(true_pairs & est_pairs)
    fp = len(est_pairs - true_pairs)
    fn = len(true_pairs - est_pairs)
    absent = truth.p * (truth.p - 1) // 2 - len(true_pairs)
    tpr = tp / len(true_pairs) if true_pairs else 1.0
    fpr = fp / absent if absent else 0.0

    shd, orientation_shd = fn + fp, None
    if mode is EvaluationMode.ORIENTED:
        orientation_shd = _orientation_mismatches(est, cpdag_of_dag(truth))
        shd = orientation_shd

    return EvalReport(shd=shd, tpr=tpr, fpr=fpr, tp=tp, fp=fp, fn=fn, mode=mode,
                      orientation_shd=orientation_shd, wall_time_s=wall_time_s,
                      config=dict(run_config or {}))
