"""
Error hierarchy for the rigidflow toolkit.

Every error carries the process exit code the CLI reports for it, so
``app.main`` can turn any library failure into a one-line diagnostic.
"""


class RigidFlowError(Exception):
    """Base class for all toolkit errors."""

    exit_code = 1

    def __init__(self, message, source=None):
        super().__init__(message)
        self.source = source

    def diagnostic(self):
        """One-line message naming the offending input when known."""
        if self.source:
            return f"{self.source}: {self}"
        return str(self)


class InvalidParameterError(RigidFlowError, ValueError):
    """A domain-type invariant or a parameter range was violated."""

    exit_code = 8


class DimensionMismatchError(RigidFlowError, ValueError):
    """Two rasters (or a raster and the camera) disagree on H×W."""

    exit_code = 4


class EmptyRegionError(RigidFlowError):
    """No eligible pixels for the alignment region."""

    exit_code = 5


class SingularConfigurationError(RigidFlowError):
    """Alignment region is too small or collinear to define a rotation."""

    exit_code = 5


class FormatError(RigidFlowError):
    """A file could not be parsed in its declared format."""

    exit_code = 3


class SceneError(RigidFlowError):
    """A synthetic scene configuration cannot be rendered."""

    exit_code = 6


class UnsupportedGradientError(RigidFlowError, KeyError):
    """The requested (loss, input) pair has no analytic gradient."""

    exit_code = 7

    def __str__(self):
        return self.args[0] if self.args else ''


def check_same_shape(expected, actual, what, source=None):
    """Raise DimensionMismatchError unless the two H×W shapes agree."""
    if tuple(expected[:2]) != tuple(actual[:2]):
        raise DimensionMismatchError(
            f"{what}: expected {expected[0]}x{expected[1]}, got {actual[0]}x{actual[1]}",
            source=source,
        )
