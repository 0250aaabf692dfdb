"""Exception hierarchy for the stvc package.

Each class maps to one failure mode of the pipeline; the CLI translates
them into distinct exit codes.
"""


class StvcError(Exception):
    """Base class for all stvc errors."""

    exit_code = 1


class DegenerateAxisError(StvcError):
    """An axis has fewer than two unique points; no basis can be built."""

    exit_code = 3


class ParameterError(StvcError):
    """An invalid numeric parameter (e.g. nonpositive kernel range)."""

    exit_code = 3


class SingularDesignError(StvcError):
    """The fixed-effect matrix is rank deficient."""

    exit_code = 4


class NumericalFailureError(StvcError):
    """A likelihood evaluation failed (non-SPD system or nonfinite value).

    Carries the offending variance parameters when available so callers
    can log which candidate point failed.
    """

    exit_code = 4

    def __init__(self, message, params=None):
        super().__init__(message)
        self.params = params


class TermUnfittableError(StvcError):
    """The objective was nonfinite at every optimizer start point."""

    exit_code = 4


class ParseError(StvcError):
    """A data file could not be parsed; names the row/column involved."""

    exit_code = 2


class ConfigError(StvcError):
    """An invalid or incomplete run configuration."""

    exit_code = 2
