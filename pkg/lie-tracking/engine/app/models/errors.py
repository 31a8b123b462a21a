from typing import Optional


class LieTrackError(Exception):
    """Base class for every numerical or usage failure raised by the engine"""

    def __init__(self, message: str, step: Optional[int] = None):
        super().__init__(message)
        self.step = step

    def __str__(self) -> str:
        message = super().__str__()
        if self.step is not None:
            return f"{message} (step {self.step})"
        return message


class FrameCompositionError(LieTrackError):
    """Group tags or frame labels do not chain"""


class ConditioningError(LieTrackError):
    """A matrix is too close to singular for the requested operation"""


class NumericalDriftError(LieTrackError):
    """A result left its group or algebra by more than the membership tolerance"""


class NoCanonicalCoordinatesError(LieTrackError):
    """hat/vee requested for a group without canonical coordinates"""


class NotInAlgebraError(LieTrackError):
    pass


class MembershipError(LieTrackError):
    pass


class NotARotationError(MembershipError):
    pass


class NotARigidTransformError(MembershipError):
    pass


class InvalidInputError(LieTrackError):
    pass


class BranchDomainError(LieTrackError):
    """Spectrum touches the closed non-positive real axis"""


class LogEscapesAlgebraError(LieTrackError):
    pass


class OutOfRegionError(LieTrackError):
    """Power series evaluated outside its convergence region"""


class InfeasibleOffsetError(LieTrackError):
    pass


class InsufficientSignalError(LieTrackError):
    pass


class NearSingularityError(LieTrackError):
    pass


class ConfigError(LieTrackError):
    pass
