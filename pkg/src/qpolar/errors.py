"""Exception types raised across the package."""


class PolarError(Exception):
    """Base class for model-level errors (bad parameters, inconsistent inputs)."""


class AlphabetMismatchError(PolarError, ValueError):
    pass


class InvalidDistributionError(PolarError, ValueError):
    pass


class HypothesisError(PolarError, ValueError):
    """Operands do not satisfy the preconditions of a bound being checked."""


class BudgetExceededError(PolarError, RuntimeError):
    """Exact channel tracking would exceed the configured atom budget."""

    def __init__(self, level, atoms, budget):
        self.level = level
        self.atoms = atoms
        self.budget = budget
        super().__init__(
            f"atom budget exceeded at level {level}: {atoms} atoms > budget {budget}"
        )


class DecodingError(PolarError, ValueError):
    pass


class StageDecodingError(DecodingError):
    """A multilevel decode failed at a given digit plane."""

    def __init__(self, plane, message):
        self.plane = plane
        super().__init__(f"plane {plane}: {message}")


class FormatError(PolarError, ValueError):
    """A text or binary serialization could not be parsed."""
