"""Exception types raised across the package."""


class DomainError(ValueError):
    """Argument outside the domain of a special function."""


class DuplicatePoints(ValueError):
    """Two design points coincide within the angular tolerance."""


class RankDeficient(ArithmeticError):
    """The retained-harmonic normal system is numerically singular."""


class SingularSystem(ArithmeticError):
    """A dense system that should be positive definite is not."""


class NonIntegrable(ArithmeticError):
    """A posterior over v could not be normalised."""


class EmptyInput(ValueError):
    """No observations were supplied."""


class ArchiveError(ValueError):
    """A model archive is corrupt, truncated or of an unknown kind."""


class SchemaVersionError(ArchiveError):
    """A model archive was written with an unsupported schema version."""
