class MixedFlowError(Exception):
    """Base class for every error raised by the mixedflow numerics."""

    exit_code = 1


class MeshError(MixedFlowError):
    pass


class AssemblyError(MixedFlowError):
    pass


class DimensionError(MixedFlowError, ValueError):
    pass


class InfSupError(MixedFlowError):
    """The Stokes saddle-point matrix is singular on the free dofs."""


class EigenSolveError(MixedFlowError):
    pass


class LinearSolveError(MixedFlowError):
    """A step matrix of the linearized space-time solve broke down."""

    def __init__(self, message, step=None):
        super().__init__(message)
        self.step = step


class ConfigError(MixedFlowError):
    exit_code = 2


class PencilError(MixedFlowError):
    pass


class ContourError(MixedFlowError):
    """The contour passes too close to a root of the characteristic."""

    def __init__(self, message, suggestion=None):
        super().__init__(message)
        self.suggestion = suggestion


class WindingError(MixedFlowError):
    pass


class RootFindingError(MixedFlowError):
    pass


class FitError(MixedFlowError):
    pass
