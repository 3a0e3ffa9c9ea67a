"""Exception types shared across the package."""


class InvalidArgument(ValueError):
    """An argument lies outside the domain an operation accepts."""


class InvariantViolation(RuntimeError):
    """A simulation invariant was breached (negative battery, causality, ...).

    These indicate a bug or an unsafe parameterisation, never ordinary data,
    so simulations abort instead of recording them.
    """

    def __init__(self, message, *, slot=None, node=None):
        super().__init__(message)
        self.slot = slot
        self.node = node
