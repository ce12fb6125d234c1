"""
Exception hierarchy for the causal partition toolkit.

Every error raised by the core modules derives from CausalPartitionError so
the CLI and the pipeline can catch one base class per seed or command.
"""

from typing import Any, Optional, Sequence, Tuple


class CausalPartitionError(Exception):
    """Base class for all toolkit errors."""


class GraphError(CausalPartitionError):
    """Invalid graph construction or graph query."""


class CycleError(GraphError):
    """Edge set contains a directed cycle."""

    def __init__(self, cycle: Sequence[Tuple[int, int]]):
        self.cycle = list(cycle)
        super().__init__(f"Directed cycle detected: {self.cycle}")


class SubsetError(CausalPartitionError):
    """Invalid node subset or subset query."""


class PartitionError(CausalPartitionError):
    """Invalid partition input or partition file."""


class EdgeCoverageError(PartitionError):
    """A superstructure edge is not contained in any subset."""

    def __init__(self, edge: Tuple[int, int]):
        self.edge = edge
        super().__init__(f"Superstructure edge {edge} is contained in no subset")


class LearnerError(CausalPartitionError):
    """Failure inside a subset learner."""


class DegenerateDataError(LearnerError):
    """A data column has zero variance."""

    def __init__(self, column: int):
        self.column = column
        super().__init__(f"Column {column} has zero variance")


class SingularCovarianceError(LearnerError):
    """The conditioning-set correlation matrix is singular."""

    def __init__(self, cond: Sequence[int]):
        self.cond = tuple(cond)
        super().__init__(f"Singular covariance for conditioning set {self.cond}")


class SubsetTooLargeError(LearnerError):
    """Subset exceeds the exhaustive learner's size limit."""


class SubsetLearningError(LearnerError):
    """A learner failed on one subset of a partition."""

    def __init__(self, index: int, message: str, cause: Optional[Any] = None):
        self.index = index
        self.cause = cause
        super().__init__(f"Subset {index}: {message}")


class MergeError(CausalPartitionError):
    """Invalid merge input."""


class MetricError(CausalPartitionError):
    """Invalid metric input."""


class ConfigError(CausalPartitionError):
    """Invalid experiment configuration."""
