"""Exception hierarchy for the interpolation pipeline.

Every error a stage can raise derives from PipelineError. The CLI maps
the category of the error to a process exit code and prints one
machine-parseable line, so modules only need to pick the right base.
"""

from typing import List, Optional


class PipelineError(Exception):
    """Base exception for pipeline errors."""

    category = "PipelineError"
    exit_code = 1

    def __init__(self, message: str, errors: Optional[List[str]] = None):
        """Initialize PipelineError.

        Args:
            message: Error message
            errors: Optional list of detail messages
        """
        super().__init__(message)
        self.errors = errors or []


class ConfigError(PipelineError):
    """Invalid configuration or unresolvable path."""

    category = "ConfigError"
    exit_code = 2


class StageDependencyError(ConfigError):
    """A stage was run before the stage whose artifacts it needs."""

    category = "StageDependencyError"

    def __init__(self, stage: str, missing: str):
        super().__init__(
            f"Stage '{stage}' requires artifacts of stage '{missing}'; "
            f"run '{missing}' first"
        )
        self.missing_stage = missing


class DataError(PipelineError):
    """Input data cannot support the requested operation."""

    category = "DataError"
    exit_code = 3


class NumericError(PipelineError):
    """A numerical procedure failed or produced an invalid result."""

    category = "NumericError"
    exit_code = 4
