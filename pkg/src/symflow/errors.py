"""Exception hierarchy shared by every symflow module."""


class SymflowError(Exception):
    """Base class for all symflow errors."""


class DomainError(SymflowError, ValueError):
    """A field or argument left its admissible domain (e.g. nonpositive tau)."""

    def __init__(self, message, field=None):
        super().__init__(message)
        self.field = field


class ConstitutiveError(SymflowError, ValueError):
    """A transport law violated mu > 0, kappa > 0 or 2 mu + d lambda > 0."""


class ExtrapolationError(SymflowError, ValueError):
    """A tabulated law was evaluated outside its knot range."""


class ConfigurationError(SymflowError, ValueError):
    """Inconsistent run configuration; ``problems`` lists every violation."""

    def __init__(self, message, problems=None):
        self.problems = list(problems) if problems else [message]
        super().__init__(message)


class StateValidityError(SymflowError, ValueError):
    """A State broke one of its invariants."""


class NumericError(SymflowError, RuntimeError):
    """An inner numerical procedure (root finder, Newton) failed."""


class StepError(SymflowError, RuntimeError):
    """Time integration could not continue; ``state`` holds the last good state."""

    def __init__(self, message, state=None):
        super().__init__(message)
        self.state = state


class OracleError(SymflowError, RuntimeError):
    """The explicit reference integrator blew up; use a smaller dt."""
