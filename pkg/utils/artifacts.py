"""
Artifact persistence: graph edge lists, partitions, learner results, reports
and the CSV results ledger.
"""

import json
import threading
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Union

import pandas as pd

from .logger import get_logger

logger = get_logger(__name__)

PathLike = Union[str, Path]

LEDGER_COLUMNS = [
    'timestamp', 'seed', 'status', 'error', 'p', 'n', 'superstructure', 'extra_edge_frac',
    'partition', 'num_subsets', 'max_subset_size', 'learner', 'alpha', 'finite_merge',
    'shd', 'tpr', 'fpr', 'tp', 'fp', 'fn', 'orientation_shd', 'eval_mode',
    'partition_time_s', 'learn_time_s', 'merge_time_s', 'wall_time_s', 'sweep_axis', 'sweep_value',
]


def write_text(path: PathLike, text: str) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text if text.endswith('\n') else text + '\n', encoding='utf-8')
    return path


def read_text(path: PathLike) -> str:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"Artifact not found: {path}")
    return path.read_text(encoding='utf-8')


def write_json(path: PathLike, payload: Dict[str, Any]) -> Path:
    return write_text(path, json.dumps(payload, indent=2, sort_keys=True, default=str))


def read_json(path: PathLike) -> Dict[str, Any]:
    return json.loads(read_text(path))


def save_graph(path: PathLike, graph) -> Path:
    """Write any object with to_edge_list() (Dag, MixedGraph, Superstructure)."""
    return write_text(path, graph.to_edge_list())


def load_graph(path: PathLike, graph_type):
    return graph_type.from_edge_list(read_text(path))


def save_partition(path: PathLike, part) -> Path:
    return write_text(path, part.to_text())


def load_partition(path: PathLike):
    from coreapp.partition import Partition
    return Partition.from_text(read_text(path))


def save_results(directory: PathLike, results, partition_kind: Optional[str] = None) -> Path:
    """subset_<i>.txt edge lists in host ids plus a results.json index."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    index = []
    for i, result in enumerate(results):
        name = f"subset_{i}.txt"
        save_graph(directory / name, result.global_graph())
        index.append({
            'file': name,
            'members': list(result.subset.members),
            'wall_time': result.wall_time,
            'learner': result.learner.to_dict(),
        })
    host_p = results[0].subset.host_p if results else 0
    write_json(directory / 'results.json',
               {'host_p': host_p, 'partition_kind': partition_kind, 'subsets': index})
    return directory


def load_results(directory: PathLike):
    """Inverse of save_results. Learner settings come back without fixed gaps."""
    from coreapp.graph_core import MixedGraph
    from coreapp.latent_projection import Subset
    from coreapp.learners import LearnerConfig, SubsetResult

    directory = Path(directory)
    index = read_json(directory / 'results.json')
    results = []
    for entry in index['subsets']:
        subset = Subset.of(entry['members'], index['host_p'])
        graph = load_graph(directory / entry['file'], MixedGraph)
        local = graph.relabel(subset.to_local(), len(subset))
        results.append(SubsetResult(subset, local, entry['wall_time'], LearnerConfig.from_dict(entry['learner'])))
    return results


def results_partition_kind(directory: PathLike) -> Optional[str]:
    """Kind of the partition a results directory was learned on, if recorded."""
    return read_json(Path(directory) / 'results.json').get('partition_kind')


class ResultsLedger:
    """Append-only CSV of run rows; one writer at a time, header on first write."""

    def __init__(self, path: PathLike, columns: Optional[List[str]] = None):
        self.path = Path(path)
        self.columns = list(columns or LEDGER_COLUMNS)
        self._lock = threading.Lock()

    def append(self, row: Dict[str, Any]) -> None:
        unknown = set(row) - set(self.columns)
        if unknown:
            logger.warning(f"Ledger ignores unknown columns: {sorted(unknown)}")
        record = {c: row.get(c, '') for c in self.columns}
        if not record['timestamp']:
            record['timestamp'] = datetime.now(timezone.utc).isoformat(timespec='seconds')
        with self._lock:
            self.path.parent.mkdir(parents=True, exist_ok=True)
            new_file = not self.path.exists() or self.path.stat().st_size == 0
            with open(self.path, 'a', encoding='utf-8', newline='') as fh:
                pd.DataFrame([record], columns=self.columns).to_csv(fh, header=new_file, index=False)
                fh.flush()

    def extend(self, rows: Iterable[Dict[str, Any]]) -> None:
        for row in rows:
            self.append(row)

    def read(self) -> pd.DataFrame:
        if not self.path.exists():
            return pd.DataFrame(columns=self.columns)
        return pd.read_csv(self.path)
