"""Exception types shared across the package."""


class RelaxShockError(Exception):
    """Base class for all package-specific failures."""


class DomainError(RelaxShockError):
    """An input lies outside the physical/mathematical domain of an operation."""


class NonphysicalStateError(RelaxShockError):
    """A computed state violates physical admissibility (e.g. rho <= 0)."""


class VacuumError(RelaxShockError):
    """A solver step produced a non-positive density."""

    def __init__(self, message, cell=None, time=None):
        super().__init__(message)
        self.cell = cell
        self.time = time


class CflViolationError(RelaxShockError):
    """A time step exceeds the stable step for the current state."""


class ShockExistenceError(RelaxShockError):
    """No admissible downstream state exists for the requested upstream data."""


class ProfileError(RelaxShockError):
    """A shock profile computation failed (non-monotone, domain too small, ...)."""


class ProfileConnectionError(ProfileError):
    """No heteroclinic connection was found within the iteration budget."""

    def __init__(self, message, miss_distance=None):
        super().__init__(message)
        self.miss_distance = miss_distance


class NonHyperbolicError(RelaxShockError):
    """A rest point of the profile dynamics has a vanishing attraction rate."""


class EvansError(RelaxShockError):
    """Evans-function evaluation failed."""


class SplittingError(EvansError):
    """Stable/unstable asymptotic subspaces could not be separated."""


class RefinementError(EvansError):
    """Contour refinement exhausted its budget without meeting the accuracy goal."""


class ConfigError(RelaxShockError):
    """An experiment configuration is invalid."""

    def __init__(self, message, field=None):
        super().__init__(message if field is None else f"{field}: {message}")
        self.field = field
