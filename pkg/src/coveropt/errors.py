"""Exception types shared across the package."""


class CoverOptError(Exception):
    """Base class for all coveropt errors."""


class InvalidInputError(CoverOptError, ValueError):
    """A value violates a precondition (bad coordinate, negative radius, ...)."""


class SchemaError(CoverOptError, ValueError):
    """An input file does not conform to its declared schema."""

    def __init__(self, message: str, row: int | None = None, field: str | None = None):
        self.row = row
        self.field = field
        loc = []
        if row is not None:
            loc.append(f"row {row}")
        if field is not None:
            loc.append(f"field {field!r}")
        if loc:
            message = f"{message} ({', '.join(loc)})"
        super().__init__(message)
