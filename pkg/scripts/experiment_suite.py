"""
Desk-scale experiment suite.

Runs the standard studies one after another, each into its own directory
under the output root: convergence in the sample size, superstructure
density, imperfect superstructure significance level, speedup against the
unpartitioned baseline, and the community-count trade-off.
"""

import argparse
import sys
import time
from dataclasses import replace
from pathlib import Path
from typing import Callable, Dict, List

import pandas as pd

sys.path.insert(0, str(Path(__file__).resolve().parent.parent))

from utils.config import setup_logging
from utils.logger import get_logger, log_performance
from coreapp.experiment import ExperimentConfig, SuperstructureMode, SweepAxis, sweep
from coreapp.learners import LearnerAlgorithm
from coreapp.partition import PartitionKind
from coreapp.synth import GraphSpec

logger = get_logger(__name__)

PARTITION_KINDS = [PartitionKind.NONE, PartitionKind.DISJOINT, PartitionKind.EDGE_COVER, PartitionKind.EXPANSIVE]


class ExperimentSuite:
    """Runs named studies from a shared base config."""

    def __init__(self, base: ExperimentConfig, output_root: str, quick: bool = False):
        self.base = base
        self.output_root = Path(output_root)
        self.quick = quick
        self.summaries: Dict[str, pd.DataFrame] = {}

    def _cfg(self, name: str, **changes) -> ExperimentConfig:
        return replace(self.base, output_dir=str(self.output_root / name), **changes)

    def _by_partition(self, name: str, axis: SweepAxis, values: List, **changes) -> pd.DataFrame:
        """Sweep `axis` once per partition kind and stack the summaries."""
        frames = []
        for kind in PARTITION_KINDS:
            cfg = self._cfg(f"{name}/{kind.value}", partition=kind, **changes)
            summary = sweep(cfg, axis, values).summary
            summary.insert(0, 'partition', kind.value)
            frames.append(summary)
        return pd.concat(frames, ignore_index=True)

    def convergence(self) -> pd.DataFrame:
        values = [500, 5_000] if self.quick else [500, 5_000, 50_000, 500_000]
        return self._by_partition('convergence', SweepAxis.SAMPLES, values)

    def density(self) -> pd.DataFrame:
        values = [0.0, 1.0] if self.quick else [0.0, 0.1, 0.5, 1.0]
        return self._by_partition('density', SweepAxis.EXTRA_EDGE_FRAC, values)

    def imperfect(self) -> pd.DataFrame:
        values = [1e-3, 1e-2] if self.quick else [1e-4, 1e-3, 1e-2, 5e-2]
        return self._by_partition('imperfect', SweepAxis.ALPHA, values,
                                  superstructure=SuperstructureMode.PC)

    def speedup(self) -> pd.DataFrame:
        k, size = (4, 25) if self.quick else (10, 100)
        cfg = self._cfg('speedup', graph=GraphSpec.planted(k, size))
        return sweep(cfg, SweepAxis.PARTITION, [kind.value for kind in PARTITION_KINDS]).summary

    def tradeoff(self) -> pd.DataFrame:
        values = [2, 4] if self.quick else [2, 4, 8, 16]
        cfg = self._cfg('tradeoff', graph=GraphSpec.planted(8, 25))
        return sweep(cfg, SweepAxis.NUM_COMMUNITIES, values).summary

    def run(self, studies: List[str]) -> Dict[str, pd.DataFrame]:
        available: Dict[str, Callable[[], pd.DataFrame]] = {
            'convergence': self.convergence,
            'density': self.density,
            'imperfect': self.imperfect,
            'speedup': self.speedup,
            'tradeoff': self.tradeoff,
        }
        for name in studies:
            start = time.perf_counter()
            logger.info(f"Starting study {name}")
            summary = available[name]()
            path = self.output_root / f"{name}_summary.csv"
            path.parent.mkdir(parents=True, exist_ok=True)
            summary.to_csv(path, index=False)
            self.summaries[name] = summary
            log_performance(logger, f"study {name}", time.perf_counter() - start, rows=len(summary))
        return self.summaries


def main():
    parser = argparse.ArgumentParser(description='Run the desk-scale experiment suite')
    parser.add_argument('--config', help='Base experiment config JSON')
    parser.add_argument('--out', default='results/suite', help='Output root directory')
    parser.add_argument('--studies', default='convergence,density,imperfect,speedup,tradeoff')
    parser.add_argument('--seeds', type=int, default=10, help='Seeds 0..N-1 per cell')
    parser.add_argument('--workers', type=int, default=1)
    parser.add_argument('--learner', choices=[a.value for a in LearnerAlgorithm], default='pc')
    parser.add_argument('--quick', action='store_true', help='Reduced grids for a smoke run')
    args = parser.parse_args()

    setup_logging()
    base = ExperimentConfig.load(args.config) if args.config else ExperimentConfig()
    base = replace(base, seeds=list(range(args.seeds)), workers=args.workers,
                   learner=replace(base.learner, algorithm=LearnerAlgorithm(args.learner)))
    studies = [s.strip() for s in args.studies.split(',') if s.strip()]

    suite = ExperimentSuite(base, args.out, quick=args.quick)
    try:
        for name, summary in suite.run(studies).items():
            print(f"\n== {name} ==")
            print(summary.to_string(index=False))
    except Exception as e:
        logger.error(f"Experiment suite failed: {e}")
        print(f"Error: {e}")
        sys.exit(1)


if __name__ == "__main__":
    main()
