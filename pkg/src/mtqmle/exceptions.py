"""Exception types shared across the package."""


class NotPositiveDefinite(ValueError):
    """A matrix required to be positive definite is not."""


class DegenerateWeights(ValueError):
    """Every sample weight vanished; the weight function annihilates the sample."""


class SingularMatrix(ValueError):
    """A matrix that must be inverted is numerically singular."""
