"""Exception types raised by the solver."""


class DomainError(ValueError):
    """Inputs outside the region where the problem is posed."""


class IntegrationStalled(RuntimeError):
    """Step size underflowed before the first step could be taken."""


class NumericalFailure(RuntimeError):
    def __init__(self, msg, last_state=None):
        super().__init__(msg)
        self.last_state = last_state


class NotBracketed(ValueError):
    """Event function has no sign change on the interval."""


class InsufficientData(ValueError):
    pass


class ShootError(RuntimeError):
    """Base for solver outcomes that still carry a partial result."""

    status = "error"

    def __init__(self, msg, result=None):
        super().__init__(msg)
        self.result = result


class BracketNotFound(ShootError):
    status = "bracket-not-found"


class MaxIterations(ShootError):
    status = "tolerance-not-met"


class ToleranceNotMet(ShootError):
    status = "tolerance-not-met"
