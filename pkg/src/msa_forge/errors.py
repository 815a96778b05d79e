"""Exception hierarchy shared by all modules."""


class MSAError(Exception):
    """Base class for library errors."""


class DomainError(MSAError, ValueError):
    """Parameters outside the domain of an operation."""


class ContainmentError(DomainError):
    """A box is not contained in the required ambient box."""


class CoverageError(MSAError, KeyError):
    """A disorder sample lacks a value at a required site."""

    def __str__(self):
        return Exception.__str__(self)


class CapacityError(MSAError):
    """The volume exceeds the configured dense-solve budget."""


class ResonantEnergyError(MSAError):
    """The energy sits within numerical tolerance of the spectrum."""

    def __init__(self, margin: float, message: str = ""):
        self.margin = margin
        super().__init__(message or f"energy is resonant (distance to spectrum {margin:.3e})")


class ResonantInnerError(ResonantEnergyError):
    """The inner box of a resolvent-identity check is resonant."""


class InteractionNonzeroError(MSAError):
    """Two subsystems are within interaction range of each other."""


class ScheduleError(DomainError):
    """A scale schedule would not be strictly increasing."""


class ConfigError(MSAError, ValueError):
    """Invalid run configuration."""
