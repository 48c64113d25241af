"""Shared exception types."""


class ModelError(ValueError):
    """Invalid model data: bad tables, non-bijective actions, malformed words."""


class NonComposableError(ModelError):
    """Attempt to compose groupoid elements whose source and range units differ."""


class BudgetError(RuntimeError):
    """An enumeration or convolution grew past its configured budget."""

    def __init__(self, message, *, required=None, budget=None):
        super().__init__(message)
        self.required = required
        self.budget = budget


class KernelDomainError(ValueError):
    """Kernel evaluated outside its stated domain (table kernels only)."""


class KernelPositivityError(ValueError):
    """Kernel failed a positive-semidefiniteness requirement."""


class GrowthHypothesisError(ValueError):
    """Fiber growth is subexponential or unstable; threshold analysis undefined."""


class PreconditionError(ValueError):
    """Input violates a stated support/size precondition of a check."""
