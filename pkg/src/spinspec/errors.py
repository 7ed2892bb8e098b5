"""Exception types raised across the package."""


class InvalidArgumentError(ValueError):
    """An argument is outside the domain of the operation."""


class ModeMismatchError(ValueError):
    """Tone phase modes do not match what the coherence engine requires."""


class IllConditionedError(ArithmeticError):
    """A least-squares design or normal matrix is singular."""


class NotCrossedError(ValueError):
    """A coherence series never changes sign, so no zero crossing exists."""
