"""Exception hierarchy for openqid."""


class OpenQIDError(Exception):
    """Base class for all errors raised by openqid."""


class ValidationError(OpenQIDError, ValueError):
    """Input failed a precondition (shape, hermiticity, range...)."""


class CapacityError(ValidationError):
    """Requested size exceeds a hard cap."""


class ConsistencyError(OpenQIDError):
    """An internal numerical consistency check failed."""


class IntegrationError(ConsistencyError):
    """The reference master-equation integrator drifted out of tolerance."""


class IllConditionedError(ConsistencyError):
    """Faddeev-LeVerrier self-check failed; try balancing or rescaling time."""


class DegenerateSignalError(OpenQIDError):
    """The Hankel matrix carries no signal (all singular values vanish)."""


class BranchCutError(OpenQIDError):
    """Discrete-time eigenvalue on the principal-log branch cut."""


class OrderMismatchError(OpenQIDError):
    """Model and target transfer functions have different denominator degree."""


class ContractError(OpenQIDError):
    """An operation was called outside its documented contract."""
