"""
Command-line interface for the causal partition toolkit.

Each pipeline stage is a subcommand that reads and writes its artifacts, so
stages can be rerun independently; `run` and `sweep` drive the whole
pipeline from an experiment config with flag overrides.
"""

import sys
import os

# Add the parent directory to sys.path so we can import from the project root
current_dir = os.path.dirname(os.path.abspath(__file__))
parent_dir = os.path.dirname(current_dir)
sys.path.insert(0, parent_dir)

import argparse
import json
from dataclasses import replace
from pathlib import Path
from typing import List, Optional

from utils.artifacts import (load_graph, load_partition, load_results, results_partition_kind, save_graph,
                             save_partition, save_results, write_json, write_text)
from utils.config import config, setup_logging
from utils.logger import get_logger, log_error
from coreapp.experiment import (ExperimentConfig, SuperstructureMode, SweepAxis, run_pipeline,
                                sweep)
from coreapp.graph_core import Dag, MixedGraph, Superstructure
from coreapp.learners import LearnerAlgorithm, LearnerConfig, learn_all
from coreapp.metrics import EvaluationMode, evaluate
from coreapp.partition import PartitionConfig, PartitionKind, expansion_report, make_partition
from coreapp.screen import MergeConfig, merge_results
from coreapp.synth import (Dataset, GraphSpec, generate_dag, random_sem, sample_sem,
                           superstructure_from_pc, superstructure_with_extras)

logger = get_logger(__name__)

PARTITION_CHOICES = [k.value for k in PartitionKind]
LEARNER_CHOICES = [a.value for a in LearnerAlgorithm]


def parse_seeds(text: str) -> List[int]:
    """'0,1,2' or '0-9' (inclusive) or a mix of both."""
    seeds = []
    for part in text.split(','):
        part = part.strip()
        if not part:
            continue
        if '-' in part[1:]:
            lo, hi = part.split('-', 1)
            seeds.extend(range(int(lo), int(hi) + 1))
        else:
            seeds.append(int(part))
    if not seeds:
        raise argparse.ArgumentTypeError(f"No seeds in {text!r}")
    return seeds


def parse_values(text: str) -> List[str]:
    return [v.strip() for v in text.split(',') if v.strip()]


def _on_off(value: Optional[str]) -> Optional[bool]:
    return None if value is None else value == 'on'


class CLI:
    """Main CLI class."""

    def __init__(self):
        self.parser = argparse.ArgumentParser(
            description='Divide-and-conquer causal discovery toolkit',
            formatter_class=argparse.RawDescriptionHelpFormatter,
            epilog="""
Examples:
  python -m utils.cli generate --nodes 50 --n 10000 --seed 3 --out runs/s3
  python -m utils.cli superstructure --truth runs/s3/truth.txt --extra-edge-frac 0.1 --out runs/s3/g.txt
  python -m utils.cli partition --superstructure runs/s3/g.txt --partition expansive --out runs/s3/part.txt
  python -m utils.cli learn --data runs/s3/data.csv --partition-file runs/s3/part.txt --out runs/s3/results
  python -m utils.cli screen --superstructure runs/s3/g.txt --results runs/s3/results --data runs/s3/data.csv --out runs/s3/merged.txt
  python -m utils.cli evaluate --estimate runs/s3/merged.txt --truth runs/s3/truth.txt
  python -m utils.cli run --config config/experiment.json --seeds 0-9 --learner oracle
  python -m utils.cli sweep --axis samples --values 500,5000,50000 --seeds 0-9
            """
        )
        self.parser.add_argument('--log-level', help='Override LOG_LEVEL')

        self.subparsers = self.parser.add_subparsers(dest='command', help='Available commands')

        self._setup_stage_commands()
        self._setup_experiment_commands()

    def _setup_stage_commands(self):
        """Setup one subcommand per pipeline stage."""
        gen = self.subparsers.add_parser('generate', help='Generate a ground-truth DAG, SEM and dataset')
        gen.add_argument('--nodes', type=int, default=50, help='Number of nodes (two communities)')
        gen.add_argument('--communities', type=int, help='Planted equal-size communities instead of two')
        gen.add_argument('--n', type=int, default=10_000, help='Samples to draw (0 skips sampling)')
        gen.add_argument('--seed', type=int, default=0)
        gen.add_argument('--out', required=True, help='Output directory')

        sup = self.subparsers.add_parser('superstructure', help='Build a superstructure')
        sup.add_argument('--truth', help='Truth DAG edge list (perfect superstructure)')
        sup.add_argument('--extra-edge-frac', type=float, default=0.1)
        sup.add_argument('--data', help='Dataset CSV (PC skeleton superstructure)')
        sup.add_argument('--alpha', type=float, default=config.DEFAULT_ALPHA)
        sup.add_argument('--seed', type=int, default=0)
        sup.add_argument('--out', required=True, help='Output edge list')

        part = self.subparsers.add_parser('partition', help='Partition a superstructure')
        part.add_argument('--superstructure', required=True)
        part.add_argument('--partition', choices=PARTITION_CHOICES, default=PartitionKind.EXPANSIVE.value)
        part.add_argument('--method', choices=['greedy_modularity', 'random'], default='greedy_modularity')
        part.add_argument('--num-communities', type=int)
        part.add_argument('--resolution', type=float, default=1.0)
        part.add_argument('--seed', type=int, default=0)
        part.add_argument('--out', required=True, help='Output partition file')

        learn = self.subparsers.add_parser('learn', help='Learn a graph on every subset')
        learn.add_argument('--partition-file', required=True)
        learn.add_argument('--data', help='Dataset CSV (pc and exact learners)')
        learn.add_argument('--truth', help='Truth DAG edge list (oracle learner)')
        learn.add_argument('--learner', choices=LEARNER_CHOICES, default=LearnerAlgorithm.PC.value)
        learn.add_argument('--alpha', type=float, default=config.DEFAULT_ALPHA)
        learn.add_argument('--workers', type=int, default=config.DEFAULT_WORKERS)
        learn.add_argument('--use-superstructure-gaps', choices=['on', 'off'], default='off',
                           help='Treat superstructure non-edges as known independences')
        learn.add_argument('--superstructure', help='Superstructure edge list for --use-superstructure-gaps')
        learn.add_argument('--out', required=True, help='Output results directory')

        screen = self.subparsers.add_parser('screen', help='Merge subset results')
        screen.add_argument('--superstructure', required=True)
        screen.add_argument('--results', required=True, help='Results directory from learn')
        screen.add_argument('--data', help='Dataset CSV (finite-sample merge)')
        screen.add_argument('--partition-file',
                            help='Partition the results were learned on (default: the kind recorded by learn)')
        screen.add_argument('--finite', choices=['auto', 'on', 'off'], default='auto')
        screen.add_argument('--filter', choices=['auto', 'on', 'off'], default='auto',
                            help='Restrict candidates to superstructure edges')
        screen.add_argument('--meek', action='store_true', help='Apply Meek rules to the merged graph')
        screen.add_argument('--out', required=True, help='Output merged edge list')
        screen.add_argument('--trace', help='Write the cycle-resolution trace JSON here')

        ev = self.subparsers.add_parser('evaluate', help='Score an estimate against the truth')
        ev.add_argument('--estimate', required=True)
        ev.add_argument('--truth', required=True)
        ev.add_argument('--mode', choices=[m.value for m in EvaluationMode], default=EvaluationMode.ADJACENCY.value)
        ev.add_argument('--out', help='Write the report JSON here')

    def _add_experiment_args(self, parser: argparse.ArgumentParser):
        parser.add_argument('--config', help='Experiment config JSON')
        parser.add_argument('--out', help='Output directory')
        parser.add_argument('--seeds', type=parse_seeds, help="Seeds, e.g. '0,1,2' or '0-9'")
        parser.add_argument('--nodes', type=int, help='Number of nodes (two communities)')
        parser.add_argument('--communities', type=int, help='Planted communities splitting --nodes')
        parser.add_argument('--n', type=int, help='Sample size')
        parser.add_argument('--superstructure', choices=[m.value for m in SuperstructureMode])
        parser.add_argument('--extra-edge-frac', type=float)
        parser.add_argument('--partition', choices=PARTITION_CHOICES)
        parser.add_argument('--num-communities', type=int)
        parser.add_argument('--resolution', type=float)
        parser.add_argument('--learner', choices=LEARNER_CHOICES)
        parser.add_argument('--alpha', type=float)
        parser.add_argument('--workers', type=int)
        parser.add_argument('--use-superstructure-gaps', choices=['on', 'off'])
        parser.add_argument('--meek', action='store_true', default=None)
        parser.add_argument('--eval-mode', choices=[m.value for m in EvaluationMode])
        parser.add_argument('--save-artifacts', action='store_true', default=None)

    def _setup_experiment_commands(self):
        """Setup whole-pipeline commands."""
        run = self.subparsers.add_parser('run', help='Run the full pipeline for each seed')
        self._add_experiment_args(run)

        sw = self.subparsers.add_parser('sweep', help='Run the pipeline across values of one axis')
        self._add_experiment_args(sw)
        sw.add_argument('--axis', required=True, choices=[a.value for a in SweepAxis])
        sw.add_argument('--values', required=True, type=parse_values, help='Comma-separated values')

    def run(self, args: Optional[list] = None) -> int:
        """Run the CLI with provided arguments; returns the exit code."""
        parsed_args = self.parser.parse_args(args)

        if not parsed_args.command:
            self.parser.print_help()
            return 0

        setup_logging(parsed_args.log_level)
        handlers = {
            'generate': self._handle_generate_command,
            'superstructure': self._handle_superstructure_command,
            'partition': self._handle_partition_command,
            'learn': self._handle_learn_command,
            'screen': self._handle_screen_command,
            'evaluate': self._handle_evaluate_command,
            'run': self._handle_run_command,
            'sweep': self._handle_sweep_command,
        }
        try:
            return handlers[parsed_args.command](parsed_args)
        except Exception as e:
            log_error(logger, e, f"CLI {parsed_args.command}")
            print(f"Error: {e}")
            sys.exit(1)

    # -- stage commands -----------------------------------------------------

    def _handle_generate_command(self, args) -> int:
        if args.communities:
            spec = GraphSpec.planted(args.communities, max(1, args.nodes // args.communities), seed=args.seed)
        else:
            spec = GraphSpec.with_nodes(args.nodes, seed=args.seed)
        out = Path(args.out)
        truth = generate_dag(spec)
        save_graph(out / 'truth.txt', truth)
        model = random_sem(truth, seed=args.seed)
        write_text(out / 'sem.json', model.to_json())
        if args.n > 0:
            sample_sem(model, args.n, seed=args.seed).to_csv(out / 'data.csv')
        print(f"Generated DAG with {truth.p} nodes and {truth.num_edges} edges in {out}")
        return 0

    def _handle_superstructure_command(self, args) -> int:
        if args.truth:
            truth = load_graph(args.truth, Dag)
            g = superstructure_with_extras(truth, args.extra_edge_frac, seed=args.seed)
        elif args.data:
            g = superstructure_from_pc(Dataset.from_csv(args.data), args.alpha)
        else:
            raise ValueError("Either --truth or --data is required")
        save_graph(args.out, g)
        print(f"Superstructure with {g.num_edges} edges (perfect={g.perfect}) written to {args.out}")
        return 0

    def _handle_partition_command(self, args) -> int:
        g = load_graph(args.superstructure, Superstructure)
        cfg = PartitionConfig(method=args.method, num_communities=args.num_communities,
                              resolution=args.resolution, seed=args.seed)
        part = make_partition(g, args.partition, cfg)
        save_partition(args.out, part)
        print(f"{len(part)} subsets of kind {part.kind.value}, sizes {part.sizes}")
        if part.kind in (PartitionKind.EXPANSIVE, PartitionKind.EDGE_COVER):
            base = make_partition(g, PartitionKind.DISJOINT, cfg)
            report = expansion_report(g, base)
            print(f"  Largest expanded subset: {report.max_expanded_size}, bound: {report.bound:.1f}")
        return 0

    def _handle_learn_command(self, args) -> int:
        part = load_partition(args.partition_file)
        data = Dataset.from_csv(args.data) if args.data else None
        truth = load_graph(args.truth, Dag) if args.truth else None
        cfg = LearnerConfig(algorithm=args.learner, alpha=args.alpha)
        if args.use_superstructure_gaps == 'on':
            if not args.superstructure:
                raise ValueError("--use-superstructure-gaps needs --superstructure")
            cfg = replace(cfg, fixed_gaps=load_graph(args.superstructure, Superstructure))
        results = learn_all(data, part, cfg, workers=args.workers, truth=truth)
        save_results(args.out, results, part.kind.value)
        print(f"Learned {len(results)} subsets with {cfg.algorithm.value}; results in {args.out}")
        return 0

    def _handle_screen_command(self, args) -> int:
        g = load_graph(args.superstructure, Superstructure)
        results = load_results(args.results)
        data = Dataset.from_csv(args.data) if args.data else None
        flag = {'auto': None, 'on': True, 'off': False}
        cfg = MergeConfig(use_superstructure_filter=flag[args.filter], finite_sample=flag[args.finite],
                          apply_meek=args.meek)
        cfg = cfg.resolve(g, results[0].learner)
        if args.partition_file:
            kind = load_partition(args.partition_file).kind
        else:
            recorded = results_partition_kind(args.results)
            kind = PartitionKind(recorded) if recorded else None
        merged, trace = merge_results(g, results, data, cfg,
                                      require_edge_cover=kind is not PartitionKind.DISJOINT)
        save_graph(args.out, merged)
        if trace is not None and args.trace:
            write_text(args.trace, trace.to_json())
        removed = len(trace.entries) if trace else 0
        print(f"Merged graph with {merged.num_edges} edges ({removed} cycle edges removed) written to {args.out}")
        return 0

    def _handle_evaluate_command(self, args) -> int:
        est = load_graph(args.estimate, MixedGraph)
        truth = load_graph(args.truth, Dag)
        report = evaluate(est, truth, args.mode)
        if args.out:
            write_json(args.out, report.to_dict())
        print(json.dumps(report.to_row(), indent=2))
        return 0

    # -- experiment commands ------------------------------------------------

    def _build_config(self, args) -> ExperimentConfig:
        """Config file (or defaults) with every given flag applied on top."""
        cfg = ExperimentConfig.load(args.config) if args.config else ExperimentConfig()
        if args.nodes is not None or args.communities is not None:
            nodes = args.nodes if args.nodes is not None else cfg.graph.p
            if args.communities:
                graph = GraphSpec.planted(args.communities, max(1, nodes // args.communities))
            else:
                graph = GraphSpec.with_nodes(nodes)
            cfg = replace(cfg, graph=graph)
        learner = cfg.learner
        if args.learner is not None:
            learner = replace(learner, algorithm=LearnerAlgorithm(args.learner))
        if args.alpha is not None:
            learner = replace(learner, alpha=args.alpha)
        partition_config = cfg.partition_config
        if args.num_communities is not None:
            partition_config = replace(partition_config, num_communities=args.num_communities)
        if args.resolution is not None:
            partition_config = replace(partition_config, resolution=args.resolution)
        merge = cfg.merge if args.meek is None else replace(cfg.merge, apply_meek=True)

        overrides = {
            'output_dir': args.out,
            'seeds': args.seeds,
            'n': args.n,
            'superstructure': args.superstructure,
            'extra_edge_frac': args.extra_edge_frac,
            'superstructure_alpha': args.alpha,
            'partition': args.partition,
            'workers': args.workers,
            'use_superstructure_gaps': _on_off(args.use_superstructure_gaps),
            'eval_mode': args.eval_mode,
            'save_artifacts': args.save_artifacts,
        }
        overrides = {k: v for k, v in overrides.items() if v is not None}
        return replace(cfg, learner=learner, partition_config=partition_config, merge=merge, **overrides)

    def _handle_run_command(self, args) -> int:
        cfg = self._build_config(args)
        Path(cfg.output_dir).mkdir(parents=True, exist_ok=True)
        cfg.save(Path(cfg.output_dir) / 'experiment.json')
        result = run_pipeline(cfg)
        for seed, report in sorted(result.reports.items()):
            print(f"Seed {seed}: SHD={report.shd} TPR={report.tpr:.3f} FPR={report.fpr:.4f} "
                  f"time={report.wall_time_s:.2f}s")
        for seed, message in sorted(result.failures.items()):
            print(f"Seed {seed}: FAILED {message}")
        return 0 if result.ok else 1

    def _handle_sweep_command(self, args) -> int:
        cfg = self._build_config(args)
        Path(cfg.output_dir).mkdir(parents=True, exist_ok=True)
        cfg.save(Path(cfg.output_dir) / 'experiment.json')
        result = sweep(cfg, args.axis, args.values)
        print(result.summary.to_string(index=False))
        return 0 if result.ok else 1


def main():
    """Main entry point for CLI."""
    cli = CLI()
    sys.exit(cli.run())


if __name__ == '__main__':
    main()
