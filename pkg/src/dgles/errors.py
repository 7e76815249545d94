"""Exception hierarchy shared by every module of the package."""


class DGLESError(Exception):
    """Base class for all package errors."""


class ConfigurationError(DGLESError, ValueError):
    """Invalid user-supplied parameters or configuration."""


class MeshValidityError(DGLESError):
    """A mesh failed a geometric validity check (e.g. J <= 0)."""

    def __init__(self, message, element=None):
        super().__init__(message)
        self.element = element


class MeshFormatError(DGLESError):
    """Malformed or incompatible mesh/checkpoint file."""

    def __init__(self, message, offset=None):
        super().__init__(message)
        self.offset = offset


class StateValidityError(DGLESError, ValueError):
    """Non-physical conservative state (rho <= 0 or p <= 0)."""

    def __init__(self, message, rho=None, pressure=None, location=None):
        super().__init__(message)
        self.rho = rho
        self.pressure = pressure
        self.location = location


class DivergenceError(DGLESError):
    """The time integration produced an invalid state."""

    def __init__(self, message, stage=None, step=None):
        super().__init__(message)
        self.stage = stage
        self.step = step


class InsufficientDataError(DGLESError, ValueError):
    """Not enough samples for the requested statistic."""


class SamplingError(DGLESError, ValueError):
    """Non-uniformly sampled time series."""


class RangeError(DGLESError, ValueError):
    """A requested location lies outside the computational domain."""


class ComparisonError(DGLESError, ValueError):
    """Benchmark reports cannot be compared."""


class MeshHeaderError(MeshFormatError):
    """The text header of a mesh file could not be parsed."""


class MeshVersionError(MeshFormatError):
    """The file was written by an incompatible format version."""


class MeshTruncatedError(MeshFormatError):
    """The binary payload ended early."""


class MeshConnectivityError(MeshFormatError):
    """Face records reference missing elements or sides."""
