"""
Tests for SHD, TPR and FPR.
"""

import numpy as np
import pytest

from coreapp.errors import MetricError
from coreapp.graph_core import CIRCLE, Dag, MixedGraph, MixedGraphBuilder, cpdag_of_dag
from coreapp.metrics import EvalReport, EvaluationMode, evaluate
from coreapp.synth import random_dag
from tests.oracles import naive_counts


def _random_estimate(p, rng):
    b = MixedGraphBuilder(p)
    for u in range(p):
        for v in range(u + 1, p):
            if rng.random() < 0.2:
                b.add_undirected(u, v)
    return b.build()


class TestAdjacencyMode:
    """Test skeleton-level metrics."""

    def test_perfect_estimate(self, diamond):
        """The true skeleton scores SHD 0 and TPR 1."""
        report = evaluate(cpdag_of_dag(diamond), diamond)
        assert (report.shd, report.tpr, report.fpr) == (0, 1.0, 0.0)

    def test_missing_and_extra(self, chain):
        """One missing and one extra pair."""
        est = MixedGraph.undirected(3, [(0, 1), (0, 2)])
        report = evaluate(est, chain)
        assert (report.tp, report.fp, report.fn) == (1, 1, 1)
        assert report.shd == 2
        assert report.tpr == pytest.approx(0.5)
        assert report.fpr == pytest.approx(1.0)

    def test_orientation_ignored(self, collider):
        """Reversing every edge does not change adjacency SHD."""
        b = MixedGraphBuilder(3)
        b.orient(1, 0)
        b.orient(1, 2)
        assert evaluate(b.build(), collider).shd == 0

    def test_matches_pairwise_count(self):
        """Counts agree with a loop over every pair, and SHD = FN + FP."""
        rng = np.random.default_rng(8)
        for seed in range(100):
            truth = random_dag(10, 0.25, seed=seed)
            est = _random_estimate(10, rng)
            report = evaluate(est, truth)
            assert (report.tp, report.fp, report.fn) == naive_counts(est, truth)
            assert report.shd == report.fp + report.fn
            assert 0.0 <= report.tpr <= 1.0 and 0.0 <= report.fpr <= 1.0

    def test_shd_is_symmetric_difference(self):
        """Adjacency SHD is symmetric between two DAGs and zero against itself."""
        for seed in range(20):
            a, b = random_dag(8, 0.3, seed=seed), random_dag(8, 0.3, seed=seed + 100)
            assert evaluate(a.to_mixed(), b).shd == evaluate(b.to_mixed(), a).shd
            assert evaluate(a.to_mixed(), a).shd == 0

    def test_empty_truth(self):
        """With no true edges TPR is 1 by convention."""
        report = evaluate(MixedGraph(3), Dag(3))
        assert report.tpr == 1.0 and report.fpr == 0.0

    def test_complete_truth(self):
        """With no absent pairs FPR is 0 by convention."""
        truth = Dag(3, [(0, 1), (0, 2), (1, 2)])
        assert evaluate(MixedGraph.undirected(3, [(0, 1)]), truth).fpr == 0.0

    def test_size_mismatch(self, chain):
        """Graphs over different node counts cannot be compared."""
        with pytest.raises(MetricError):
            evaluate(MixedGraph(4), chain)


class TestOrientedMode:
    """Test mark-level comparison against the true equivalence class."""

    def test_cpdag_scores_zero(self, diamond):
        """The CPDAG of the truth has no mismatched marks."""
        report = evaluate(cpdag_of_dag(diamond), diamond, EvaluationMode.ORIENTED)
        assert report.shd == report.orientation_shd == 0

    def test_circles_read_as_tails(self, chain):
        """An all-circle chain matches the undirected class."""
        b = MixedGraphBuilder(3)
        b.set_edge(0, 1, CIRCLE, CIRCLE)
        b.set_edge(1, 2, CIRCLE, CIRCLE)
        assert evaluate(b.build(), chain, EvaluationMode.ORIENTED).shd == 0

    def test_reversed_collider(self, collider):
        """Reversing both compelled edges costs two."""
        b = MixedGraphBuilder(3)
        b.orient(1, 0)
        b.orient(1, 2)
        report = evaluate(b.build(), collider, EvaluationMode.ORIENTED)
        assert report.shd == 2
        assert evaluate(b.build(), collider).shd == 0

    def test_missing_edge_counts_once(self, collider):
        """A missing compelled edge counts as one mismatch."""
        b = MixedGraphBuilder(3)
        b.orient(0, 1)
        assert evaluate(b.build(), collider, EvaluationMode.ORIENTED).shd == 1


class TestEvalReport:
    """Test report serialisation."""

    def test_dict(self, chain):
        """A report survives its dict form."""
        report = evaluate(MixedGraph.undirected(3, [(0, 1)]), chain, EvaluationMode.ORIENTED,
                          wall_time_s=1.5, run_config={'seed': 3})
        assert EvalReport.from_dict(report.to_dict()) == report

    def test_row(self, chain):
        """Ledger rows are flat and name the mode."""
        row = evaluate(MixedGraph.undirected(3, [(0, 1)]), chain).to_row()
        assert row['eval_mode'] == 'adjacency'
        assert row['orientation_shd'] == ''
        assert row['shd'] == 1 and row['tpr'] == 0.5
