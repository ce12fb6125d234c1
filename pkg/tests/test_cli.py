"""
Tests for the command-line interface.
"""

import argparse
import json
from pathlib import Path

import pandas as pd
import pytest

from coreapp.learners import LearnerAlgorithm
from coreapp.partition import PartitionKind
from utils.artifacts import results_partition_kind
from utils.cli import CLI, parse_seeds, parse_values

REPO_ROOT = Path(__file__).resolve().parent.parent


def _run(*argv):
    return CLI().run([str(a) for a in argv])


class TestParsers:
    """Test argument helpers."""

    def test_seed_ranges(self):
        """Lists and inclusive ranges combine."""
        assert parse_seeds('0-2,5') == [0, 1, 2, 5]
        assert parse_seeds('7') == [7]

    def test_no_seeds(self):
        """An empty seed list is an argument error."""
        with pytest.raises(argparse.ArgumentTypeError):
            parse_seeds(' , ')

    def test_values(self):
        """Sweep values are split on commas and stripped."""
        assert parse_values('500, 5000,') == ['500', '5000']


class TestStageCommands:
    """Test running the pipeline one stage at a time."""

    def test_oracle_stages(self, tmp_path, capsys):
        """generate -> superstructure -> partition -> learn -> screen -> evaluate recovers the skeleton."""
        out = tmp_path / 'stages'
        assert _run('generate', '--nodes', 12, '--n', 0, '--seed', 2, '--out', out) == 0
        assert (out / 'truth.txt').exists() and not (out / 'data.csv').exists()
        assert _run('superstructure', '--truth', out / 'truth.txt', '--extra-edge-frac', 0.2,
                    '--out', out / 'g.txt') == 0
        assert _run('partition', '--superstructure', out / 'g.txt', '--partition', 'expansive',
                    '--out', out / 'part.txt') == 0
        assert _run('learn', '--partition-file', out / 'part.txt', '--truth', out / 'truth.txt',
                    '--learner', 'oracle', '--out', out / 'results') == 0
        assert _run('screen', '--superstructure', out / 'g.txt', '--results', out / 'results',
                    '--out', out / 'merged.txt') == 0
        capsys.readouterr()
        assert _run('evaluate', '--estimate', out / 'merged.txt', '--truth', out / 'truth.txt',
                    '--out', out / 'report.json') == 0
        printed = json.loads(capsys.readouterr().out)
        assert printed['shd'] == 0 and printed['tpr'] == 1.0
        assert json.loads((out / 'report.json').read_text())['shd'] == 0

    def test_data_stages(self, tmp_path):
        """The PC path writes data, learns from it and saves the merge trace."""
        out = tmp_path / 'pc'
        assert _run('generate', '--nodes', 10, '--n', 2000, '--seed', 1, '--out', out) == 0
        assert (out / 'data.csv').exists()
        assert _run('superstructure', '--data', out / 'data.csv', '--alpha', 0.01, '--out', out / 'g.txt') == 0
        assert _run('partition', '--superstructure', out / 'g.txt', '--partition', 'edge-cover',
                    '--out', out / 'part.txt') == 0
        assert _run('learn', '--partition-file', out / 'part.txt', '--data', out / 'data.csv',
                    '--alpha', 0.01, '--out', out / 'results') == 0
        assert _run('screen', '--superstructure', out / 'g.txt', '--results', out / 'results',
                    '--data', out / 'data.csv', '--out', out / 'merged.txt', '--trace', out / 'trace.json') == 0
        assert (out / 'merged.txt').exists()
        assert 'entries' in json.loads((out / 'trace.json').read_text())

    def test_disjoint_oracle_stages(self, tmp_path):
        """A disjoint partition merges stage by stage just as it does under run."""
        out = tmp_path / 'disjoint'
        assert _run('generate', '--nodes', 20, '--n', 0, '--seed', 0, '--out', out) == 0
        assert _run('superstructure', '--truth', out / 'truth.txt', '--out', out / 'g.txt') == 0
        assert _run('partition', '--superstructure', out / 'g.txt', '--partition', 'disjoint',
                    '--out', out / 'part.txt') == 0
        assert _run('learn', '--partition-file', out / 'part.txt', '--truth', out / 'truth.txt',
                    '--learner', 'oracle', '--out', out / 'results') == 0
        assert results_partition_kind(out / 'results') == 'disjoint'
        assert _run('screen', '--superstructure', out / 'g.txt', '--results', out / 'results',
                    '--out', out / 'merged.txt') == 0
        assert _run('screen', '--superstructure', out / 'g.txt', '--results', out / 'results',
                    '--partition-file', out / 'part.txt', '--out', out / 'merged2.txt') == 0
        assert (out / 'merged.txt').read_text() == (out / 'merged2.txt').read_text()

    def test_superstructure_gaps_flag(self, tmp_path):
        """learn takes --use-superstructure-gaps on|off."""
        out = tmp_path / 'gaps'
        assert _run('generate', '--nodes', 10, '--n', 1000, '--seed', 1, '--out', out) == 0
        assert _run('superstructure', '--truth', out / 'truth.txt', '--out', out / 'g.txt') == 0
        assert _run('partition', '--superstructure', out / 'g.txt', '--out', out / 'part.txt') == 0
        assert _run('learn', '--partition-file', out / 'part.txt', '--data', out / 'data.csv',
                    '--use-superstructure-gaps', 'on', '--superstructure', out / 'g.txt',
                    '--out', out / 'results') == 0
        with pytest.raises(SystemExit):
            CLI().parser.parse_args(['learn', '--partition-file', 'p', '--out', 'o',
                                     '--use-superstructure-gaps'])

    def test_superstructure_needs_source(self, tmp_path, capsys):
        """Missing inputs exit with status 1 and an error line."""
        with pytest.raises(SystemExit) as exc:
            _run('superstructure', '--out', tmp_path / 'g.txt')
        assert exc.value.code == 1
        assert 'Error:' in capsys.readouterr().out

    def test_no_command(self, capsys):
        """Without a command the help is printed."""
        assert CLI().run([]) == 0
        assert 'usage' in capsys.readouterr().out.lower()


class TestExperimentCommands:
    """Test run and sweep."""

    def test_run(self, tmp_path):
        """run writes the effective config and one ledger row per seed."""
        out = tmp_path / 'run'
        assert _run('run', '--nodes', 12, '--learner', 'oracle', '--seeds', '0-1', '--out', out) == 0
        assert (out / 'experiment.json').exists()
        ledger = pd.read_csv(out / 'ledger.csv')
        assert ledger['status'].tolist() == ['ok', 'ok']
        assert (ledger['shd'] == 0).all()

    def test_run_failure_exit_code(self, tmp_path):
        """A failing seed makes run return 1."""
        out = tmp_path / 'run'
        code = _run('run', '--nodes', 12, '--n', 100, '--learner', 'exact', '--partition', 'none',
                    '--seeds', 0, '--out', out)
        assert code == 1

    def test_sweep(self, tmp_path):
        """sweep writes a summary row per value."""
        out = tmp_path / 'sweep'
        assert _run('sweep', '--nodes', 12, '--learner', 'oracle', '--seeds', '0-1', '--out', out,
                    '--axis', 'partition', '--values', 'expansive,edge-cover') == 0
        summary = pd.read_csv(out / 'sweep_summary.csv')
        assert summary['sweep_value'].tolist() == ['expansive', 'edge-cover']

    def test_config_overrides(self):
        """Flags override the config file."""
        cli = CLI()
        args = cli.parser.parse_args(['run', '--config', str(REPO_ROOT / 'config' / 'experiment.json'),
                                      '--alpha', '0.05', '--meek', '--partition', 'disjoint',
                                      '--learner', 'exact', '--num-communities', '4',
                                      '--use-superstructure-gaps', 'on'])
        cfg = cli._build_config(args)
        assert cfg.learner.alpha == 0.05 and cfg.superstructure_alpha == 0.05
        assert cfg.learner.algorithm is LearnerAlgorithm.EXACT
        assert cfg.merge.apply_meek
        assert cfg.partition is PartitionKind.DISJOINT
        assert cfg.partition_config.num_communities == 4
        assert cfg.n == 100_000
        assert cfg.use_superstructure_gaps is True
