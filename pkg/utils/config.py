"""
Environment settings for the causal partition toolkit.

Values come from `config/.env` (see `config/.env.template`) with defaults for
every key. Experiment-level settings live in ExperimentConfig instead.
"""

import logging
import logging.config
import os
import sys
from pathlib import Path
from typing import Any, Dict, Optional

from dotenv import load_dotenv

load_dotenv(Path(__file__).parent.parent / 'config' / '.env')

logger = logging.getLogger(__name__)

VALID_LOG_LEVELS = ['DEBUG', 'INFO', 'WARNING', 'ERROR', 'CRITICAL']
VALID_JOBLIB_BACKENDS = ['loky', 'threading', 'multiprocessing', 'sequential']


class Config:
    """Environment-level settings, read once at import."""

    # Logging
    LOG_LEVEL: str = os.getenv('LOG_LEVEL', 'INFO')
    LOG_FILE: str = os.getenv('LOG_FILE', 'logs/causal_partition.log')
    LOG_MAX_BYTES: int = int(os.getenv('LOG_MAX_BYTES', str(100 * 1024 * 1024)))
    LOG_BACKUP_COUNT: int = int(os.getenv('LOG_BACKUP_COUNT', '5'))

    # Outputs
    OUTPUT_DIR: str = os.getenv('OUTPUT_DIR', 'results')
    LEDGER_FILE: str = os.getenv('LEDGER_FILE', 'ledger.csv')
    SAVE_DATASETS: bool = os.getenv('SAVE_DATASETS', 'false').lower() == 'true'

    # Subset learning workers
    DEFAULT_WORKERS: int = int(os.getenv('DEFAULT_WORKERS', '1'))
    JOBLIB_BACKEND: str = os.getenv('JOBLIB_BACKEND', 'loky')

    # Numerics
    DEFAULT_ALPHA: float = float(os.getenv('DEFAULT_ALPHA', '0.001'))
    RIDGE_LAMBDA: float = float(os.getenv('RIDGE_LAMBDA', '1e-8'))
    EXACT_MAX_NODES: int = int(os.getenv('EXACT_MAX_NODES', '5'))
    RIC_PENALTY_SCALE: float = float(os.getenv('RIC_PENALTY_SCALE', '1.0'))

    @classmethod
    def get_log_file_path(cls) -> str:
        """Ensure logs directory exists and return log file path."""
        log_dir = os.path.dirname(cls.LOG_FILE)
        if log_dir:
            os.makedirs(log_dir, exist_ok=True)
        return cls.LOG_FILE

    @classmethod
    def get_output_dir(cls) -> str:
        """Ensure the results directory exists and return it."""
        os.makedirs(cls.OUTPUT_DIR, exist_ok=True)
        return cls.OUTPUT_DIR

    @classmethod
    def validate_config(cls) -> Dict[str, Any]:
        """Validate configuration and return any issues."""
        issues = {}

        if cls.LOG_LEVEL.upper() not in VALID_LOG_LEVELS:
            issues['LOG_LEVEL'] = f'LOG_LEVEL must be one of {VALID_LOG_LEVELS}'

        if cls.DEFAULT_WORKERS < 1:
            issues['DEFAULT_WORKERS'] = 'DEFAULT_WORKERS must be a positive integer'

        if cls.JOBLIB_BACKEND not in VALID_JOBLIB_BACKENDS:
            issues['JOBLIB_BACKEND'] = f'JOBLIB_BACKEND must be one of {VALID_JOBLIB_BACKENDS}'

        if not (0.0 < cls.DEFAULT_ALPHA < 1.0):
            issues['DEFAULT_ALPHA'] = 'DEFAULT_ALPHA must lie strictly between 0 and 1'

        if cls.RIDGE_LAMBDA <= 0:
            issues['RIDGE_LAMBDA'] = 'RIDGE_LAMBDA must be positive'

        # Exhaustive search over DAGs is only tractable for tiny subsets
        if not (1 <= cls.EXACT_MAX_NODES <= 5):
            issues['EXACT_MAX_NODES'] = 'EXACT_MAX_NODES must be between 1 and 5'

        if cls.RIC_PENALTY_SCALE <= 0:
            issues['RIC_PENALTY_SCALE'] = 'RIC_PENALTY_SCALE must be positive'

        return issues


config = Config()


def get_config() -> Config:
    """Return the shared Config instance."""
    return config


def setup_logging(level: Optional[str] = None) -> None:
    """Install a console handler and a rotating JSON file handler on the root logger."""
    level = (level or config.LOG_LEVEL).upper()
    log_config = {
        'version': 1,
        'disable_existing_loggers': False,
        'formatters': {
            'standard': {'format': '%(asctime)s [%(levelname)s] %(name)s: %(message)s'},
            'json': {
                '()': 'pythonjsonlogger.jsonlogger.JsonFormatter',
                'fmt': '%(asctime)s %(levelname)s %(name)s %(message)s',
            },
        },
        'handlers': {
            'console': {'level': level, 'formatter': 'standard', 'class': 'logging.StreamHandler'},
            'file': {
                'level': level,
                'formatter': 'json',
                'class': 'logging.handlers.RotatingFileHandler',
                'filename': config.get_log_file_path(),
                'maxBytes': config.LOG_MAX_BYTES,
                'backupCount': config.LOG_BACKUP_COUNT,
            },
        },
        'loggers': {
            '': {'handlers': ['console', 'file'], 'level': level, 'propagate': False}
        }
    }

    logging.config.dictConfig(log_config)
    logger.info(f"Logging at {level} to {config.LOG_FILE}")


def main() -> int:
    """Print the effective settings and any validation problems."""
    issues = config.validate_config()
    for key in sorted(k for k in vars(Config) if k.isupper() and not k.startswith('VALID')):
        flag = '  <- ' + issues[key] if key in issues else ''
        print(f"{key}={getattr(config, key)}{flag}")
    return 1 if issues else 0


if __name__ == '__main__':
    sys.exit(main())
