"""Exception hierarchy shared by all pipeline stages.

Each class carries the process exit code used by the command line tool.
"""


class PipelineError(Exception):
    exit_code = 1


class InputError(PipelineError):
    """Bad or inconsistent input data (dimension mismatch, unreadable file)."""

    exit_code = 2


class GeometryError(PipelineError):
    """Invalid geometry encountered (e.g. self-intersecting polygon)."""

    exit_code = 3


class NumericError(PipelineError):
    """Numerical failure such as NaN activations in the network executor."""

    exit_code = 4


class WeightLoadError(InputError):
    """Weight file missing, truncated, or missing a required entry."""
