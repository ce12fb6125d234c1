"""
Desk-scale trend studies. Deselected by default; run with `pytest -m slow`.
"""

import pytest

from coreapp.experiment import ExperimentConfig, SweepAxis, sweep
from coreapp.learners import LearnerConfig
from coreapp.partition import PartitionKind
from coreapp.synth import GraphSpec

pytestmark = pytest.mark.slow


def _config(tmp_path, **overrides):
    settings = dict(
        graph=GraphSpec([(25, 1), (25, 2)]),
        n=10_000,
        seeds=list(range(5)),
        learner=LearnerConfig(alpha=0.001),
        output_dir=str(tmp_path),
    )
    settings.update(overrides)
    return ExperimentConfig(**settings)


def test_accuracy_improves_with_samples(tmp_path):
    """Mean TPR grows and SHD shrinks from 500 to 50000 samples."""
    result = sweep(_config(tmp_path), SweepAxis.SAMPLES, [500, 50_000])
    summary = result.summary.set_index('sweep_value')
    assert summary.loc[50_000, 'tpr_mean'] >= summary.loc[500, 'tpr_mean']
    assert summary.loc[50_000, 'shd_mean'] <= summary.loc[500, 'shd_mean']


def test_expansive_beats_disjoint(tmp_path):
    """The expansive partition recovers more true edges than the disjoint one."""
    result = sweep(_config(tmp_path), SweepAxis.PARTITION,
                   [PartitionKind.EXPANSIVE.value, PartitionKind.DISJOINT.value])
    summary = result.summary.set_index('sweep_value')
    assert summary.loc['expansive', 'tpr_mean'] > summary.loc['disjoint', 'tpr_mean']


def test_expansion_keeps_subsets_small(tmp_path):
    """On planted communities the largest expanded subset stays well below p."""
    cfg = _config(tmp_path, graph=GraphSpec.planted(4, 25, seed=0), seeds=[0, 1])
    result = sweep(cfg, SweepAxis.PARTITION, [PartitionKind.EXPANSIVE.value])
    assert result.summary['max_subset_size_mean'].iloc[0] < 0.75 * cfg.graph.p


def _tpr_by_value(tmp_path, name, axis, values, **overrides):
    cfg = _config(tmp_path / name, **overrides)
    return sweep(cfg, axis, values).summary.set_index('sweep_value')['tpr_mean']


def test_expansive_tracks_no_partition_at_large_n(tmp_path):
    """At large n the expansive partition loses at most 0.10 TPR against learning on all of V."""
    values = [500, 100_000]
    expansive = _tpr_by_value(tmp_path, 'expansive', SweepAxis.SAMPLES, values,
                              partition=PartitionKind.EXPANSIVE)
    whole = _tpr_by_value(tmp_path, 'none', SweepAxis.SAMPLES, values, partition=PartitionKind.NONE)
    assert expansive.loc[100_000] >= expansive.loc[500]
    assert abs(expansive.loc[100_000] - whole.loc[100_000]) <= 0.10


def test_gap_stable_across_superstructure_density(tmp_path):
    """Extra superstructure edges never open a TPR gap above 0.10 between expansive and no partition."""
    fracs = [0.0, 0.1, 0.5, 1.0]
    expansive = _tpr_by_value(tmp_path, 'expansive', SweepAxis.EXTRA_EDGE_FRAC, fracs,
                              partition=PartitionKind.EXPANSIVE)
    whole = _tpr_by_value(tmp_path, 'none', SweepAxis.EXTRA_EDGE_FRAC, fracs, partition=PartitionKind.NONE)
    for frac in fracs:
        assert abs(expansive.loc[frac] - whole.loc[frac]) <= 0.10, frac


def test_partition_cost_and_accuracy_ordering(tmp_path):
    """On planted communities subset sizes grow disjoint -> edge-cover -> expansive, the
    expansive run beats learning on all of V for time and beats disjoint on SHD."""
    cfg = _config(tmp_path, graph=GraphSpec.planted(4, 25, seed=0), seeds=[0, 1, 2])
    kinds = [PartitionKind.DISJOINT, PartitionKind.EDGE_COVER, PartitionKind.EXPANSIVE, PartitionKind.NONE]
    summary = sweep(cfg, SweepAxis.PARTITION, [k.value for k in kinds]).summary.set_index('sweep_value')
    size = summary['max_subset_size_mean']
    assert size.loc['disjoint'] <= size.loc['edge-cover'] <= size.loc['expansive'] < size.loc['none']
    assert summary.loc['expansive', 'wall_time_s_mean'] < summary.loc['none', 'wall_time_s_mean']
    assert summary.loc['expansive', 'shd_mean'] < summary.loc['disjoint', 'shd_mean']
