"""Shared exception types."""


class BudgetExceededError(RuntimeError):
    """A bounded search ran out of its node budget.

    Raised instead of returning a partial result; the CLI maps this to its
    own exit code so scripts can tell "too expensive" from "false".
    """

    def __init__(self, message, nodes=None):
        super().__init__(message)
        self.nodes = nodes


class SpecError(ValueError):
    """Malformed or unsupported structure specification."""
