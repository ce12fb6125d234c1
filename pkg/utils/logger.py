"""
Logging helpers for the causal partition toolkit.

Handlers and formatters are installed once by utils.config.setup_logging; the
helpers here attach structured fields through `extra` so the JSON file
handler records them as separate keys while the console stays readable.
"""

import logging
from typing import Any, Dict, Optional


def get_logger(name: str) -> logging.Logger:
    """Get a logger instance with the specified name."""
    return logging.getLogger(name)


class LoggerMixin:
    """Mixin class to add logging capabilities to other classes."""

    @property
    def logger(self) -> logging.Logger:
        cls = self.__class__
        return get_logger(f"{cls.__module__}.{cls.__name__}")


def _fields(kwargs: Dict[str, Any]) -> str:
    return ' '.join(f"{k}={v}" for k, v in kwargs.items())


def log_error(logger: logging.Logger, error: Exception, context: Optional[str] = None):
    """Log error with context and traceback."""
    where = f" in {context}" if context else ""
    logger.error(f"Error{where}: {error}", exc_info=True,
                 extra={'error_type': type(error).__name__, 'context': context or ''})


def log_performance(logger: logging.Logger, operation: str, duration: float, **kwargs):
    """Log the duration of an operation with its size parameters."""
    logger.info(f"Performance: {operation} took {duration:.2f}s {_fields(kwargs)}".rstrip(),
                extra={'operation': operation, 'duration_s': round(duration, 4), **kwargs})


def log_stage(logger: logging.Logger, seed: int, stage: str, status: str, **kwargs):
    """Log a pipeline stage transition for one seed."""
    logger.info(f"Seed {seed} {stage}: {status} {_fields(kwargs)}".rstrip(),
                extra={'seed': seed, 'stage': stage, 'status': status, **kwargs})
