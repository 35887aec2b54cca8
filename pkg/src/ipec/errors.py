"""Exception types shared across the package."""


class FormatError(ValueError):
    """A CSV file does not follow the documented schema."""


class DuplicateIdError(ValueError):
    """A sample id appears more than once in an embedding source."""


class CapacityError(ValueError):
    """A store cannot satisfy an episode request (too few classes or samples)."""


class EmptySetError(ValueError):
    """An operation that needs at least one element received none."""


class DegenerateVectorError(ValueError):
    """Cosine similarity was requested for a zero-norm vector."""


class DegenerateStatError(ValueError):
    """A statistic is undefined for the given inputs (e.g. constant scores)."""


class UnsupportedDiagnosticError(ValueError):
    """A ground-truth diagnostic was requested for a store without ground truth."""
