"""
Tests for experiment configs, the end-to-end pipeline and sweeps.
"""

import json
import math
from pathlib import Path

import pandas as pd
import pytest
from scipy import stats

from coreapp.errors import ConfigError
from coreapp.experiment import (ExperimentConfig, SuperstructureMode, SweepAxis, _seed_streams,
                                apply_axis, confidence_halfwidth, run_pipeline, summarise, sweep)
from coreapp.learners import LearnerAlgorithm, LearnerConfig
from coreapp.metrics import EvaluationMode
from coreapp.partition import PartitionKind
from coreapp.screen import MergeConfig
from coreapp.synth import GraphSpec
from utils.artifacts import ResultsLedger, load_results

REPO_ROOT = Path(__file__).resolve().parent.parent


def _oracle_config(tmp_path, **overrides):
    settings = dict(
        graph=GraphSpec([(8, 1), (8, 2)]),
        learner=LearnerConfig(algorithm=LearnerAlgorithm.ORACLE),
        seeds=[0, 1],
        output_dir=str(tmp_path / 'run'),
    )
    settings.update(overrides)
    return ExperimentConfig(**settings)


class TestExperimentConfig:
    """Test experiment config validation and files."""

    def test_json_round_trip(self):
        """A config survives its JSON form."""
        cfg = ExperimentConfig(graph=GraphSpec([(4, 1), (5, 2)]), n=500, seeds=[2, 3],
                               partition=PartitionKind.EDGE_COVER, eval_mode=EvaluationMode.ORIENTED,
                               merge=MergeConfig(apply_meek=True))
        assert ExperimentConfig.from_json(cfg.to_json()) == cfg

    def test_unknown_key(self):
        """Misspelled settings are rejected, not ignored."""
        with pytest.raises(ConfigError):
            ExperimentConfig.from_dict({'samples': 10})

    def test_invalid_values(self):
        """Non-positive sizes and empty seed lists are rejected."""
        with pytest.raises(ConfigError):
            ExperimentConfig(n=0)
        with pytest.raises(ConfigError):
            ExperimentConfig(seeds=[])
        with pytest.raises(ConfigError):
            ExperimentConfig(workers=0)

    def test_missing_file(self, tmp_path):
        """Loading a missing file is a config error."""
        with pytest.raises(ConfigError):
            ExperimentConfig.load(tmp_path / 'absent.json')

    def test_shipped_default(self):
        """The bundled config file is the default configuration."""
        cfg = ExperimentConfig.load(REPO_ROOT / 'config' / 'experiment.json')
        assert cfg.graph.p == 50 and cfg.partition is PartitionKind.EXPANSIVE
        assert cfg.learner.algorithm is LearnerAlgorithm.PC

    def test_save_and_load(self, tmp_path):
        """save writes what load reads."""
        cfg = _oracle_config(tmp_path)
        path = cfg.save(tmp_path / 'cfg.json')
        assert ExperimentConfig.load(path) == cfg

    def test_needs_data(self, tmp_path):
        """Only data-driven learners or learned superstructures sample data."""
        assert not _oracle_config(tmp_path).needs_data
        assert _oracle_config(tmp_path, superstructure=SuperstructureMode.PC).needs_data
        assert ExperimentConfig().needs_data


class TestSeedStreams:
    """Test per-stage seed derivation."""

    def test_deterministic_and_distinct(self):
        """Streams depend only on the seed and differ across stages."""
        a = _seed_streams(7)
        assert a == _seed_streams(7)
        assert len(set(a.values())) == 4
        assert a != _seed_streams(8)


class TestPipeline:
    """Test the end-to-end pipeline."""

    def test_oracle_pipeline_exact(self, tmp_path):
        """With the oracle learner every seed recovers the true skeleton."""
        result = run_pipeline(_oracle_config(tmp_path))
        assert result.ok
        assert sorted(result.reports) == [0, 1]
        for report in result.reports.values():
            assert report.shd == 0 and report.tpr == 1.0 and report.fpr == 0.0

    def test_oracle_pipeline_oriented(self, tmp_path):
        """With Meek closure the oracle merge is the true equivalence class."""
        cfg = _oracle_config(tmp_path, merge=MergeConfig(apply_meek=True), eval_mode=EvaluationMode.ORIENTED)
        result = run_pipeline(cfg)
        assert all(r.orientation_shd == 0 for r in result.reports.values())

    def test_ledger_rows(self, tmp_path):
        """One ledger row per seed with the run settings and stage timings."""
        cfg = _oracle_config(tmp_path)
        run_pipeline(cfg)
        table = ResultsLedger(Path(cfg.output_dir) / 'ledger.csv').read()
        assert len(table) == 2
        assert table['status'].tolist() == ['ok', 'ok']
        assert table['seed'].tolist() == [0, 1]
        assert (table['partition'] == 'expansive').all()
        assert (table['p'] == 16).all()
        assert table['learn_time_s'].notna().all()

    def test_pc_pipeline_deterministic(self, tmp_path):
        """Two runs with the same seed give the same metrics."""
        base = dict(graph=GraphSpec([(5, 1), (5, 2)]), n=2000, seeds=[3], learner=LearnerConfig(alpha=0.01))
        first = run_pipeline(ExperimentConfig(output_dir=str(tmp_path / 'a'), **base)).reports[3]
        second = run_pipeline(ExperimentConfig(output_dir=str(tmp_path / 'b'), **base)).reports[3]
        assert (first.shd, first.tp, first.fp, first.fn) == (second.shd, second.tp, second.fp, second.fn)
        assert first.config['seed'] == 3

    def test_failure_recorded(self, tmp_path):
        """A failing seed becomes an error row and does not stop the run."""
        cfg = ExperimentConfig(graph=GraphSpec([(6, 1), (6, 2)]), n=200, seeds=[0, 1],
                               partition=PartitionKind.NONE,
                               learner=LearnerConfig(algorithm=LearnerAlgorithm.EXACT),
                               output_dir=str(tmp_path / 'run'))
        result = run_pipeline(cfg)
        assert not result.ok
        assert sorted(result.failures) == [0, 1]
        assert 'SubsetLearningError' in result.failures[0]
        assert [row['status'] for row in result.rows] == ['error', 'error']

    def test_artifacts(self, tmp_path):
        """Saved artifacts cover every stage and reload."""
        cfg = _oracle_config(tmp_path, seeds=[0], save_artifacts=True)
        run_pipeline(cfg)
        seed_dir = Path(cfg.output_dir) / 'seed_0'
        for name in ['truth.txt', 'superstructure.txt', 'partition.txt', 'merged.txt', 'report.json']:
            assert (seed_dir / name).exists(), name
        assert json.loads((seed_dir / 'report.json').read_text())['shd'] == 0
        assert load_results(seed_dir / 'results')

    def test_trace_saved_for_finite_merge(self, tmp_path):
        """A data-driven run writes the cycle-resolution trace."""
        cfg = ExperimentConfig(graph=GraphSpec([(5, 1), (5, 2)]), n=1000, seeds=[0], save_artifacts=True,
                               output_dir=str(tmp_path / 'run'))
        result = run_pipeline(cfg)
        assert result.ok
        assert (Path(cfg.output_dir) / 'seed_0' / 'trace.json').exists()
        assert (Path(cfg.output_dir) / 'seed_0' / 'sem.json').exists()


class TestSweepHelpers:
    """Test axis application and summaries."""

    def test_axis_requires_data(self, tmp_path):
        """Sample and alpha axes make no sense without data."""
        cfg = _oracle_config(tmp_path)
        with pytest.raises(ConfigError):
            apply_axis(cfg, SweepAxis.SAMPLES, 100)
        with pytest.raises(ConfigError):
            apply_axis(cfg, SweepAxis.ALPHA, 0.01)

    def test_axis_values(self):
        """Swept values are parsed into the right setting."""
        cfg = ExperimentConfig()
        assert apply_axis(cfg, SweepAxis.SAMPLES, '1e3').n == 1000
        swept = apply_axis(cfg, SweepAxis.ALPHA, 0.05)
        assert swept.learner.alpha == 0.05 and swept.superstructure_alpha == 0.05
        assert apply_axis(cfg, SweepAxis.PARTITION, 'disjoint').partition is PartitionKind.DISJOINT
        assert apply_axis(cfg, SweepAxis.NUM_COMMUNITIES, '3').partition_config.num_communities == 3
        assert apply_axis(cfg, SweepAxis.RESOLUTION, 0.5).partition_config.resolution == 0.5
        assert cfg.n == 100_000

    def test_extra_edges_need_perfect(self):
        """The extra-edge axis only applies to generated superstructures."""
        with pytest.raises(ConfigError):
            apply_axis(ExperimentConfig(superstructure=SuperstructureMode.PC), SweepAxis.EXTRA_EDGE_FRAC, 0.2)

    def test_confidence_halfwidth(self):
        """Student-t half-width of the mean."""
        expected = stats.t.ppf(0.975, 2) * 1.0 / math.sqrt(3)
        assert confidence_halfwidth([1.0, 2.0, 3.0]) == pytest.approx(expected)
        assert confidence_halfwidth([4.0]) == 0.0

    def test_summarise_skips_failures(self):
        """Failed rows do not enter the means."""
        table = pd.DataFrame([
            {'sweep_value': 'a', 'status': 'ok', 'tpr': 1.0, 'fpr': 0.0, 'shd': 0, 'wall_time_s': 1.0, 'max_subset_size': 4},
            {'sweep_value': 'a', 'status': 'ok', 'tpr': 0.5, 'fpr': 0.0, 'shd': 2, 'wall_time_s': 3.0, 'max_subset_size': 4},
            {'sweep_value': 'a', 'status': 'error', 'tpr': None, 'fpr': None, 'shd': None, 'wall_time_s': None,
             'max_subset_size': None},
        ])
        summary = summarise(table)
        assert summary['runs'].tolist() == [2]
        assert summary['tpr_mean'].iloc[0] == pytest.approx(0.75)
        assert summary['shd_mean'].iloc[0] == pytest.approx(1.0)


class TestSweep:
    """Test full sweeps."""

    def test_empty_values(self, tmp_path):
        """A sweep over nothing is a config error."""
        with pytest.raises(ConfigError):
            sweep(_oracle_config(tmp_path), SweepAxis.PARTITION, [])

    def test_partition_sweep(self, tmp_path):
        """Every value runs every seed and the summary is written."""
        cfg = _oracle_config(tmp_path)
        result = sweep(cfg, SweepAxis.PARTITION, ['expansive', 'edge-cover'])
        assert result.ok
        assert len(result.table) == 4
        assert result.summary['sweep_value'].tolist() == ['expansive', 'edge-cover']
        assert (Path(cfg.output_dir) / 'sweep_summary.csv').exists()
        expansive = result.summary.set_index('sweep_value').loc['expansive']
        assert expansive['tpr_mean'] == 1.0 and expansive['shd_mean'] == 0.0
