"""Exception hierarchy.

Errors split into two families: :class:`ConfigurationError` for bad inputs
and settings, and :class:`InfeasibleError` for parameter points where the
requested physics does not exist (no admissible root, exceptional point,
no population crossing). The CLI maps the first to exit code 1 and the
second to exit code 2.
"""


class DASAError(Exception):
    """Base class for all package errors."""


class ConfigurationError(DASAError, ValueError):
    """Invalid configuration or settings (step size, window, schema)."""


class InvalidParameterError(ConfigurationError):
    """Non-finite or malformed numeric input."""


class InfeasibleError(DASAError):
    """The requested construction has no solution at these parameters."""


class UnsupportedRegimeError(InfeasibleError):
    """Parameters outside the regime where the Hamiltonian class exists."""


class SingularParameterError(InfeasibleError):
    """Closed-form expressions are singular at these parameters."""


class ExceptionalPointError(InfeasibleError):
    """Eigenvalues (nearly) coalesce; biorthogonal normalization diverges."""


class RootSelectionError(InfeasibleError):
    """No root satisfies the requested selection policy."""


class NoCrossingError(InfeasibleError):
    """Target population never reaches one within the search horizon."""


class NoFeasiblePointError(InfeasibleError):
    """Optimizer found no feasible candidate within its budget.

    The full evaluation history is attached as ``history``.
    """

    def __init__(self, msg, history):
        super().__init__(msg)
        self.history = history


class ComparisonError(DASAError):
    """Two runs cannot be placed side by side."""
