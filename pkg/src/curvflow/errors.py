"""Exception hierarchy shared by all curvflow modules."""


class CurvflowError(Exception):
    """Base class for all errors raised by curvflow."""


class CurveError(CurvflowError, ValueError):
    """Invalid polygonal curve (too few vertices, bad shape, orientation)."""


class ZeroLengthEdgeError(CurveError):
    """Two consecutive vertices coincide."""

    def __init__(self, edge):
        self.edge = edge
        super().__init__(f"edge {edge} has zero length")


class DegenerateFoldError(CurveError):
    """Consecutive tangents are exactly antipodal; the angle lift is ambiguous."""

    def __init__(self, edge):
        self.edge = edge
        super().__init__(f"tangents of edges {edge} and {edge + 1} are antipodal")


class OrientationError(CurveError):
    pass


class FlowLawError(CurvflowError, ValueError):
    """Evaluation of a flow law produced a non-finite value."""


class ShapeDegeneracyError(CurvflowError, ValueError):
    pass


class NumericalError(CurvflowError, RuntimeError):
    """Base class for failures of the time stepper."""


class StepTooLargeError(NumericalError):
    def __init__(self, row, tau):
        self.row = row
        self.tau = tau
        super().__init__(f"matrix row {row} is not diagonally dominant for tau={tau:.3e}")


class SingularSystemError(NumericalError):
    pass


class DegenerateFlowError(NumericalError):
    pass


class ExtinctionError(CurvflowError, ValueError):
    pass


class PreconditionError(CurvflowError, ValueError):
    pass


class ConfigError(CurvflowError, ValueError):
    def __init__(self, key, message):
        self.key = key
        super().__init__(f"{key}: {message}")


class ImageFormatError(CurvflowError, ValueError):
    pass
