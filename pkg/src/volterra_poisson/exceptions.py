"""Exception and warning types shared across the package."""


class DomainError(ValueError):
    """A state lies outside the domain of a function (e.g. log of y <= 0)."""


class IntegrationError(RuntimeError):
    """Base class for failures of a one-step map.

    ``step_index`` is filled in by the trajectory driver so that callers can
    tell which step of a long run failed.
    """

    def __init__(self, message, step_index=None):
        super().__init__(message)
        self.step_index = step_index

    def __str__(self):
        msg = super().__str__()
        if self.step_index is not None:
            return f"{msg} (at step {self.step_index})"
        return msg


class SingularStepError(IntegrationError):
    """A diagonal solve inside a step met a denominator too close to zero."""


class NonConvergenceError(IntegrationError):
    """The implicit midpoint solver exhausted its iteration budget."""


class PositivityLossWarning(RuntimeWarning):
    """A step produced a non-positive component; H0 is undefined from here on."""
