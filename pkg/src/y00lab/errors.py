class Y00LabError(Exception):
    """Base class for errors raised by y00lab."""


class ConfigError(Y00LabError, ValueError):
    """Invalid configuration or parameters."""


class DegenerateStateError(Y00LabError, ValueError):
    """A generator or recovery ended up in a degenerate (all-zero) state."""


class DomainError(Y00LabError, ValueError):
    """Argument outside the mathematical domain of an operation."""


class IntegrationError(Y00LabError, RuntimeError):
    """Numerical integration did not reach the requested tolerance."""

    def __init__(self, message, achieved):
        super().__init__(f"{message} (achieved abs error {achieved:.3g})")
        self.achieved = achieved


class DegeneratePairError(Y00LabError, ValueError):
    """Two hypotheses assign the same probability to a pattern; the Bayes threshold is undefined."""


class InfeasibleError(Y00LabError, ValueError):
    """No solution exists for the requested security budget."""
