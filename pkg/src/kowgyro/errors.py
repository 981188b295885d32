"""Exception hierarchy for kowgyro."""


class GyrostatError(Exception):
    """Base class for all library errors."""


class InvalidParams(GyrostatError, ValueError):
    pass


class NotRealImage(GyrostatError, ValueError):
    """Complex coordinates are not the image of a real phase point."""


class OffOrbit(GyrostatError, ValueError):
    """State violates the Casimir (orbit) constraints beyond tolerance."""


class SingularD(GyrostatError, ValueError):
    pass


class DependentFields(GyrostatError, ValueError):
    """Force centres or field intensities are linearly dependent."""


class ReducibleCaseWarning(UserWarning):
    """Canonical intensities coincide (a == b): the axially symmetric case."""


class StepFailure(GyrostatError, RuntimeError):
    pass


class InadmissibleFamily(GyrostatError, ValueError):
    pass


class BranchFailure(GyrostatError, RuntimeError):
    pass


class DegenerateDenominator(GyrostatError, ZeroDivisionError):
    """A closure formula hit a vanishing denominator (lower stratum)."""


class SingularDelta(GyrostatError, ZeroDivisionError):
    pass


class ZeroKappa(GyrostatError, ValueError):
    pass


class SZero(GyrostatError, ValueError):
    pass


class GridTooCoarse(GyrostatError, RuntimeError):
    pass


class IOFailure(GyrostatError, OSError):
    pass


class SamplingFailure(GyrostatError, RuntimeError):
    """No acceptable point found within the seed budget."""
