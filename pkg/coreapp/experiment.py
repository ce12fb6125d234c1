"""
End-to-end experiment orchestration.

run_pipeline executes generate -> superstructure -> partition -> learn ->
merge -> evaluate for each configured seed and appends one ledger row per
seed. sweep repeats run_pipeline across the values of one axis and summarises
the ledger into mean and 95% confidence half-widths per value.
"""

import json
import math
import time
from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from scipy import stats
from tqdm import tqdm

from utils.artifacts import ResultsLedger, save_graph, save_partition, save_results, write_json, write_text
from utils.config import config
from utils.logger import LoggerMixin, get_logger, log_error, log_stage
from .errors import ConfigError
from .learners import LearnerConfig, learn_all
from .metrics import EvalReport, EvaluationMode, evaluate
from .partition import PartitionConfig, PartitionKind, make_partition
from .screen import MergeConfig, merge_results
from .synth import (GraphSpec, generate_dag, random_sem, sample_sem, superstructure_from_pc,
                    superstructure_with_extras)

logger = get_logger(__name__)


class SuperstructureMode(str, Enum):
    PERFECT = "perfect"
    PC = "pc"


class SweepAxis(str, Enum):
    SAMPLES = "samples"
    EXTRA_EDGE_FRAC = "extra_edge_frac"
    ALPHA = "alpha"
    PARTITION = "partition"
    NUM_COMMUNITIES = "num_communities"
    RESOLUTION = "resolution"


SUMMARY_METRICS = ['tpr', 'fpr', 'shd', 'wall_time_s', 'max_subset_size']


@dataclass
class ExperimentConfig:
    """Everything one run needs; serialised as a single JSON document."""
    graph: GraphSpec = field(default_factory=GraphSpec)
    n: int = 100_000
    superstructure: SuperstructureMode = SuperstructureMode.PERFECT
    extra_edge_frac: float = 0.1
    superstructure_alpha: float = config.DEFAULT_ALPHA
    partition: PartitionKind = PartitionKind.EXPANSIVE
    partition_config: PartitionConfig = field(default_factory=PartitionConfig)
    learner: LearnerConfig = field(default_factory=LearnerConfig)
    use_superstructure_gaps: bool = False
    merge: MergeConfig = field(default_factory=MergeConfig)
    seeds: List[int] = field(default_factory=lambda: [0])
    workers: int = config.DEFAULT_WORKERS
    output_dir: str = config.OUTPUT_DIR
    eval_mode: EvaluationMode = EvaluationMode.ADJACENCY
    save_artifacts: bool = False

    def __post_init__(self):
        self.superstructure = SuperstructureMode(self.superstructure)
        self.partition = PartitionKind(self.partition)
        self.eval_mode = EvaluationMode(self.eval_mode)
        self.seeds = [int(s) for s in self.seeds]
        if self.n < 1:
            raise ConfigError("n must be positive")
        if not self.seeds:
            raise ConfigError("At least one seed is required")
        if self.workers < 1:
            raise ConfigError("workers must be positive")
        if self.extra_edge_frac < 0:
            raise ConfigError("extra_edge_frac must be non-negative")
        if not 0.0 < self.superstructure_alpha < 1.0:
            raise ConfigError("superstructure_alpha must lie in (0, 1)")

    @property
    def needs_data(self) -> bool:
        return self.learner.is_data_driven or self.superstructure is SuperstructureMode.PC

    def to_dict(self) -> Dict[str, Any]:
        return {
            'graph': self.graph.to_dict(),
            'n': self.n,
            'superstructure': self.superstructure.value,
            'extra_edge_frac': self.extra_edge_frac,
            'superstructure_alpha': self.superstructure_alpha,
            'partition': self.partition.value,
            'partition_config': self.partition_config.to_dict(),
            'learner': self.learner.to_dict(),
            'use_superstructure_gaps': self.use_superstructure_gaps,
            'merge': self.merge.to_dict(),
            'seeds': list(self.seeds),
            'workers': self.workers,
            'output_dir': self.output_dir,
            'eval_mode': self.eval_mode.value,
            'save_artifacts': self.save_artifacts,
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'ExperimentConfig':
        data = dict(data)
        nested = {
            'graph': GraphSpec.from_dict,
            'partition_config': PartitionConfig.from_dict,
            'learner': LearnerConfig.from_dict,
            'merge': MergeConfig.from_dict,
        }
        for key, build in nested.items():
            if key in data:
                data[key] = build(data[key])
        unknown = set(data) - set(cls.__dataclass_fields__)
        if unknown:
            raise ConfigError(f"Unknown experiment config keys: {sorted(unknown)}")
        return cls(**data)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    @classmethod
    def from_json(cls, text: str) -> 'ExperimentConfig':
        return cls.from_dict(json.loads(text))

    @classmethod
    def load(cls, path) -> 'ExperimentConfig':
        path = Path(path)
        if not path.exists():
            raise ConfigError(f"Config file not found: {path}")
        return cls.from_json(path.read_text(encoding='utf-8'))

    def save(self, path) -> Path:
        return write_text(path, self.to_json())


@dataclass
class PipelineResult:
    reports: Dict[int, EvalReport] = field(default_factory=dict)
    failures: Dict[int, str] = field(default_factory=dict)
    rows: List[Dict[str, Any]] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.failures


def _seed_streams(seed: int) -> Dict[str, int]:
    """Independent integer seeds for each random stage of one run."""
    children = np.random.SeedSequence(seed).spawn(4)
    names = ['graph', 'sem', 'sample', 'superstructure']
    return {name: int(child.generate_state(1)[0]) for name, child in zip(names, children)}


class PipelineRunner(LoggerMixin):
    """Runs the full pipeline for every seed of an ExperimentConfig."""

    def __init__(self, cfg: ExperimentConfig, tags: Optional[Dict[str, Any]] = None):
        self.cfg = cfg
        self.tags = dict(tags or {})
        self.output_dir = Path(cfg.output_dir)
        self.ledger = ResultsLedger(self.output_dir / config.LEDGER_FILE)

    def _base_row(self, seed: int) -> Dict[str, Any]:
        cfg = self.cfg
        return {
            'seed': seed,
            'p': cfg.graph.p,
            'n': cfg.n if cfg.needs_data else '',
            'superstructure': cfg.superstructure.value,
            'extra_edge_frac': cfg.extra_edge_frac if cfg.superstructure is SuperstructureMode.PERFECT else '',
            'partition': cfg.partition.value,
            'learner': cfg.learner.algorithm.value,
            'alpha': cfg.learner.alpha if cfg.learner.is_data_driven else '',
            **self.tags,
        }

    def run_seed(self, seed: int) -> Tuple[Dict[str, Any], EvalReport]:
        """One seed end to end; returns the ledger row and the report."""
        cfg = self.cfg
        streams = _seed_streams(seed)
        seed_dir = self.output_dir / f"seed_{seed}"
        row = self._base_row(seed)
        start = time.perf_counter()

        truth = generate_dag(replace(cfg.graph, seed=streams['graph']))
        data = None
        if cfg.needs_data:
            model = random_sem(truth, seed=streams['sem'])
            data = sample_sem(model, cfg.n, seed=streams['sample'])
            if cfg.save_artifacts:
                write_text(seed_dir / 'sem.json', model.to_json())
                if config.SAVE_DATASETS:
                    data.to_csv(seed_dir / 'data.csv')
        log_stage(logger, seed, 'generate', 'done', p=truth.p, edges=truth.num_edges)

        if cfg.superstructure is SuperstructureMode.PERFECT:
            g = superstructure_with_extras(truth, cfg.extra_edge_frac, seed=streams['superstructure'])
        else:
            g = superstructure_from_pc(data, cfg.superstructure_alpha)
        log_stage(logger, seed, 'superstructure', 'done', edges=g.num_edges, perfect=g.perfect)

        t0 = time.perf_counter()
        part = make_partition(g, cfg.partition, cfg.partition_config)
        row['partition_time_s'] = round(time.perf_counter() - t0, 4)
        row['num_subsets'] = len(part)
        row['max_subset_size'] = part.max_subset_size
        log_stage(logger, seed, 'partition', 'done', subsets=len(part), largest=part.max_subset_size)

        learner_cfg = cfg.learner
        if cfg.use_superstructure_gaps:
            learner_cfg = replace(learner_cfg, fixed_gaps=g)
        t0 = time.perf_counter()
        results = learn_all(data, part, learner_cfg, workers=cfg.workers, truth=truth)
        row['learn_time_s'] = round(time.perf_counter() - t0, 4)
        log_stage(logger, seed, 'learn', 'done', subsets=len(results))

        merge_cfg = cfg.merge.resolve(g, learner_cfg)
        t0 = time.perf_counter()
        merged, trace = merge_results(g, results, data, merge_cfg,
                                      require_edge_cover=part.kind is not PartitionKind.DISJOINT)
        row['merge_time_s'] = round(time.perf_counter() - t0, 4)
        row['finite_merge'] = merge_cfg.finite_sample
        log_stage(logger, seed, 'merge', 'done', edges=merged.num_edges,
                  cycles_broken=len(trace.entries) if trace else 0)

        wall = time.perf_counter() - start
        report = evaluate(merged, truth, cfg.eval_mode, wall_time_s=wall,
                          run_config={**cfg.to_dict(), 'seed': seed})
        row.update(report.to_row())
        row['status'] = 'ok'

        if cfg.save_artifacts:
            save_graph(seed_dir / 'truth.txt', truth)
            save_graph(seed_dir / 'superstructure.txt', g)
            save_partition(seed_dir / 'partition.txt', part)
            save_results(seed_dir / 'results', results, part.kind.value)
            save_graph(seed_dir / 'merged.txt', merged)
            write_json(seed_dir / 'report.json', report.to_dict())
            if trace is not None:
                write_text(seed_dir / 'trace.json', trace.to_json())
        log_stage(logger, seed, 'evaluate', 'done', shd=report.shd, tpr=f"{report.tpr:.3f}")
        return row, report

    def run(self) -> PipelineResult:
        result = PipelineResult()
        for seed in self.cfg.seeds:
            try:
                row, report = self.run_seed(seed)
                result.reports[seed] = report
            except Exception as e:
                log_error(self.logger, e, f"seed {seed}")
                message = f"{type(e).__name__}: {e}"
                row = {**self._base_row(seed), 'status': 'error', 'error': message}
                result.failures[seed] = message
            self.ledger.append(row)
            result.rows.append(row)
        return result


def run_pipeline(cfg: ExperimentConfig, tags: Optional[Dict[str, Any]] = None) -> PipelineResult:
    """EvalReport per completed seed; failed seeds are recorded, never raised."""
    return PipelineRunner(cfg, tags).run()


# ---------------------------------------------------------------------------
# Sweeps
# ---------------------------------------------------------------------------

def apply_axis(cfg: ExperimentConfig, axis: SweepAxis, value: Any) -> ExperimentConfig:
    """Copy of cfg with the swept setting replaced."""
    axis = SweepAxis(axis)
    if axis is SweepAxis.SAMPLES:
        if not cfg.needs_data:
            raise ConfigError("The samples axis needs a data-driven learner or superstructure")
        return replace(cfg, n=int(float(value)))
    if axis is SweepAxis.EXTRA_EDGE_FRAC:
        if cfg.superstructure is not SuperstructureMode.PERFECT:
            raise ConfigError("The extra_edge_frac axis needs a perfect superstructure")
        return replace(cfg, extra_edge_frac=float(value))
    if axis is SweepAxis.ALPHA:
        if not cfg.needs_data:
            raise ConfigError("The alpha axis needs a data-driven learner or superstructure")
        return replace(cfg, learner=replace(cfg.learner, alpha=float(value)),
                       superstructure_alpha=float(value))
    if axis is SweepAxis.PARTITION:
        return replace(cfg, partition=PartitionKind(value))
    if axis is SweepAxis.NUM_COMMUNITIES:
        return replace(cfg, partition_config=replace(cfg.partition_config, num_communities=int(float(value))))
    return replace(cfg, partition_config=replace(cfg.partition_config, resolution=float(value)))


def confidence_halfwidth(values: Sequence[float], level: float = 0.95) -> float:
    """Student-t half-width of the mean; 0 for fewer than two values."""
    values = [v for v in values if not (isinstance(v, float) and math.isnan(v))]
    if len(values) < 2:
        return 0.0
    sem = float(np.std(values, ddof=1)) / math.sqrt(len(values))
    return float(stats.t.ppf(0.5 + level / 2.0, len(values) - 1) * sem)


def summarise(table: pd.DataFrame) -> pd.DataFrame:
    """Mean and 95% CI half-width of each metric per swept value, over ok rows."""
    ok = table[table['status'] == 'ok']
    records = []
    for value, group in ok.groupby('sweep_value', sort=False):
        record = {'sweep_value': value, 'runs': len(group)}
        for metric in SUMMARY_METRICS:
            column = pd.to_numeric(group[metric], errors='coerce')
            record[f'{metric}_mean'] = float(column.mean())
            record[f'{metric}_ci95'] = confidence_halfwidth(column.tolist())
        records.append(record)
    return pd.DataFrame(records)


@dataclass
class SweepResult:
    axis: SweepAxis
    table: pd.DataFrame
    summary: pd.DataFrame
    failures: int = 0

    @property
    def ok(self) -> bool:
        return self.failures == 0


def sweep(cfg: ExperimentConfig, axis: SweepAxis, values: Sequence[Any]) -> SweepResult:
    """Seeds x values cross product; ledger rows plus sweep_summary.csv."""
    axis = SweepAxis(axis)
    values = list(values)
    if not values:
        raise ConfigError("Sweep needs at least one value")
    configs = [(value, apply_axis(cfg, axis, value)) for value in values]

    rows: List[Dict[str, Any]] = []
    failures = 0
    for value, run_cfg in tqdm(configs, desc=f"sweep {axis.value}", unit="value"):
        result = run_pipeline(run_cfg, tags={'sweep_axis': axis.value, 'sweep_value': value})
        rows.extend(result.rows)
        failures += len(result.failures)

    table = pd.DataFrame(rows)
    summary = summarise(table)
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    summary.to_csv(out / 'sweep_summary.csv', index=False)
    logger.info(f"Sweep over {axis.value}: {len(values)} values, {len(rows)} runs, {failures} failures")
    return SweepResult(axis, table, summary, failures)
