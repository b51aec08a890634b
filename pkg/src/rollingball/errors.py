"""Exception hierarchy shared by every module."""


class RollingBallError(Exception):
    """Base class; ``code`` is the machine-readable name used in CLI error objects."""

    code = "error"

    def __init__(self, message, **context):
        super().__init__(message)
        self.context = context

    def to_dict(self):
        out = {"error": self.code, "message": str(self)}
        out.update({k: v for k, v in self.context.items()})
        return out


class InfeasibleBody(RollingBallError):
    code = "InfeasibleBody"


class UnboundedBody(RollingBallError):
    code = "UnboundedBody"


class DegenerateBody(RollingBallError):
    code = "DegenerateBody"


class ConvergenceFailure(RollingBallError):
    code = "ConvergenceFailure"


class OriginNotInterior(RollingBallError):
    code = "OriginNotInterior"


class NotOnBoundary(RollingBallError):
    code = "NotOnBoundary"


class InvalidSampleCount(RollingBallError):
    code = "InvalidSampleCount"


class InnerSolveFailure(RollingBallError):
    code = "InnerSolveFailure"


class DomainExceeded(RollingBallError):
    code = "DomainExceeded"


class MarginFailure(RollingBallError):
    code = "MarginFailure"


class DegenerateGrid(RollingBallError):
    code = "DegenerateGrid"


class NotTouchPoint(RollingBallError):
    code = "NotTouchPoint"


class StepUnderflow(RollingBallError):
    code = "StepUnderflow"


class KinkAtCenter(RollingBallError):
    code = "KinkAtCenter"


class ParseError(RollingBallError):
    code = "ParseError"


class ValidationError(RollingBallError):
    code = "ValidationError"


class CoercivityWarning(UserWarning):
    """Patchwork coercivity probe failed; the construction is still returned."""
