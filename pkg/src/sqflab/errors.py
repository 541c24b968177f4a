"""Exception types shared across the package."""


class DomainError(ValueError):
    """An argument lies outside the domain an operation is defined on."""


class AdmissibilityError(DomainError):
    """A stopping-time level or exponent violates an admissibility bound."""


class SingularityError(DomainError):
    """Evaluation requested exactly on a singular point."""


class PreconditionError(ValueError):
    """A sample or argument violates a stated admissibility constraint."""


class SpecError(ValueError):
    """A check specification violates the hypotheses of what it checks."""


class AccuracyError(RuntimeError):
    """A quadrature failed to converge to the requested tolerance."""


class EvaluationError(RuntimeError):
    """An integrand returned a non-finite value; carries the bad abscissa."""

    def __init__(self, message, v=None):
        super().__init__(message)
        self.v = v


class ConfigError(ValueError):
    """Config text failed to parse or validate; carries (line, message) pairs."""

    def __init__(self, errors):
        self.errors = list(errors)
        lines = "; ".join(f"line {ln}: {msg}" for ln, msg in self.errors)
        super().__init__(lines or "invalid config")
