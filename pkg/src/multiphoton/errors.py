"""Exception types shared across the package."""


class MultiphotonError(Exception):
    """Base class for all package errors."""


class SizeLimitError(MultiphotonError):
    """A hard combinatorial cap was exceeded (CLI exit code 3)."""


class ValidationError(MultiphotonError):
    """Inconsistent or malformed input (CLI exit code 2)."""


class UnsupportedInputError(MultiphotonError):
    """The chosen engine cannot handle this input shape."""


class IncompatibleRepresentationError(ValidationError):
    """States/detectors do not share a common representation."""


class DegenerateDetectionError(MultiphotonError):
    """A diagonal J entry (detection probability of a path) vanished."""


class EngineError(MultiphotonError):
    """A numerical contract was violated (e.g. probability below -1e-9)."""
