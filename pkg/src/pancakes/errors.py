class PancakesError(Exception):
    """Base class for errors raised by this package."""


class InvalidInputError(PancakesError, ValueError):
    pass


class DataError(PancakesError, ValueError):
    """Malformed input file or dataset."""


class IntegrityError(PancakesError):
    """A compressed index failed to decode."""

    def __init__(self, message: str, node: int | None = None):
        if node is not None:
            message = f"node {node}: {message}"
        super().__init__(message)
        self.node = node


class UnsupportedMetricError(PancakesError, ValueError):
    pass
