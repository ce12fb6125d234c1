#!/usr/bin/env python
"""
Health check for the causal partition toolkit.

This script checks:
1. Logging setup
2. Environment config loading and validation
3. Numerical stack versions
4. A 12-node oracle pipeline recovering the true equivalence class
"""

import sys
import logging
from typing import Any, Dict

from utils.config import config, setup_logging


def _stack_versions() -> Dict[str, str]:
    import joblib
    import networkx
    import numpy
    import pandas
    import scipy
    return {
        'numpy': numpy.__version__,
        'scipy': scipy.__version__,
        'networkx': networkx.__version__,
        'pandas': pandas.__version__,
        'joblib': joblib.__version__,
    }


def _oracle_smoke_test() -> bool:
    from coreapp.graph_core import cpdag_of_dag, mec_equivalent
    from coreapp.learners import LearnerAlgorithm, LearnerConfig, learn_all
    from coreapp.partition import PartitionKind, make_partition
    from coreapp.screen import screen_infinite
    from coreapp.synth import GraphSpec, generate_dag, superstructure_with_extras

    truth = generate_dag(GraphSpec([(6, 1), (6, 2)], inter_community=2, seed=7))
    g = superstructure_with_extras(truth, 0.1, seed=7)
    part = make_partition(g, PartitionKind.EXPANSIVE)
    results = learn_all(None, part, LearnerConfig(algorithm=LearnerAlgorithm.ORACLE), truth=truth)
    return mec_equivalent(screen_infinite(g, results), cpdag_of_dag(truth))


def run_health_checks(configure_logging: bool = True) -> Dict[str, Any]:
    """Collect check results; 'ok' is False when any critical check fails."""
    report: Dict[str, Any] = {'ok': True, 'errors': []}

    if configure_logging:
        try:
            setup_logging()
            logging.getLogger("health_check").info("Logging setup successful")
            report['logging'] = True
        except Exception as e:
            report['logging'] = False
            report['ok'] = False
            report['errors'].append(f"logging: {e}")

    report['config_issues'] = config.validate_config()
    if report['config_issues']:
        report['ok'] = False

    try:
        report['versions'] = _stack_versions()
    except ImportError as e:
        report['ok'] = False
        report['errors'].append(f"imports: {e}")

    try:
        report['oracle_pipeline'] = _oracle_smoke_test()
    except Exception as e:
        report['oracle_pipeline'] = False
        report['errors'].append(f"oracle pipeline: {e}")
    if not report['oracle_pipeline']:
        report['ok'] = False
    return report


def main():
    print("=== Causal Partition Toolkit Health Check ===\n")
    report = run_health_checks()

    if report.get('logging', True):
        print("[OK] Logging setup successful")
    else:
        print("[ERROR] Logging setup failed")

    print(f"Log file path: {config.LOG_FILE}")
    print(f"Output directory: {config.OUTPUT_DIR}")
    print(f"Workers: {config.DEFAULT_WORKERS} ({config.JOBLIB_BACKEND})")
    if report['config_issues']:
        print("[WARNING] Configuration issues found:")
        for key, issue in report['config_issues'].items():
            print(f"  {key}: {issue}")
    else:
        print("[OK] Configuration validated successfully")

    for name, version in report.get('versions', {}).items():
        print(f"  {name} {version}")

    if report['oracle_pipeline']:
        print("[OK] Oracle pipeline recovers the true equivalence class")
    else:
        print("[ERROR] Oracle pipeline check failed")
    for error in report['errors']:
        print(f"  {error}")

    print("\n=== Health Check Complete ===")
    sys.exit(0 if report['ok'] else 1)


if __name__ == "__main__":
    main()
