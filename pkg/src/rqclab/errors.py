"""Exception types shared by all modules."""


class DomainError(ValueError):
    """An argument lies outside the mathematical domain of an operation."""


class CapacityError(ValueError):
    """A dense computation would exceed its configured size guard."""


class RejectionCapError(RuntimeError):
    """Rejection sampling gave up after exhausting its attempt budget."""

    def __init__(self, message, attempts):
        super().__init__(message)
        self.attempts = attempts
