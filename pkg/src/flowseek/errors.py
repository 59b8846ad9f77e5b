"""Exception types shared across the toolkit."""


class FlowSeekError(Exception):
    """Base class for all domain errors raised by this package."""


class DimensionError(FlowSeekError):
    """Inputs whose shapes or sizes are inconsistent."""


class ParameterError(FlowSeekError):
    """Scalar parameters or field values outside their documented domain."""


class FlowFormatError(FlowSeekError):
    """Malformed flow files: bad magic, truncation, impossible headers."""


class FlowRangeError(FlowSeekError):
    """Values not representable in the requested file format."""


class EmptyProblemError(FlowSeekError):
    """A fit was requested with no usable pixels."""


class EstimationError(FlowSeekError):
    """The estimator aborted; carries the diagnostics gathered so far."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics if diagnostics is not None else {}
