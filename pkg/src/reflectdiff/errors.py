"""Exception hierarchy. Every error raised on purpose derives from ReflectDiffError."""


class ReflectDiffError(Exception):
    pass


class InputError(ReflectDiffError, ValueError):
    """Malformed scenario, spec, or argument."""


class NonFiniteGeometry(ReflectDiffError):
    pass


class NotOnBoundary(ReflectDiffError):
    pass


class EmptyScriptI(ReflectDiffError):
    """No exterior probe realized any index set near a boundary point."""


class NotInCone(ReflectDiffError):
    pass


class BoundarySamplingFailed(ReflectDiffError):
    pass


class SimulationError(ReflectDiffError):
    pass


class EscapedWorkingRegion(SimulationError):
    pass


class NonFiniteState(SimulationError):
    pass


class NoViolatedFace(ReflectDiffError):
    pass


class OutOfRange(ReflectDiffError):
    pass


class ZeroLambda0(ReflectDiffError):
    pass


class DegenerateDirection(ReflectDiffError):
    pass


class UnderpopulatedBins(ReflectDiffError):
    pass
