"""Exception types raised by geophase."""


class GaugeMismatchError(ValueError):
    """A field was handed to an operation expecting the other gauge."""


class TotalDeflectionError(ValueError):
    """|flux| >= k: no transmitted straight-line asymptote exists."""


class PropagationError(RuntimeError):
    """Non-finite values appeared during time stepping."""


class InsufficientSamplesError(ValueError):
    """Too few usable samples for a fit."""


class NoFringeError(ValueError):
    """No fringe peak above the contrast floor."""


class PreconditionError(ValueError):
    """A scenario configuration violates the scenario's physical precondition."""
