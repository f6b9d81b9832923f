"""Exception types shared across the pipeline."""


class LidkitError(Exception):
    """Base class for all errors raised by lidkit."""


class ParseError(LidkitError, ValueError):
    """A landmark, ELA or blink file could not be parsed.

    Attributes:
        line: 1-based line number of the offending record, if known.
        field: name of the offending field, if known.
    """

    def __init__(self, message, line=None, field=None):
        self.line = line
        self.field = field
        where = []
        if line is not None:
            where.append(f"line {line}")
        if field is not None:
            where.append(f"field '{field}'")
        prefix = f"{', '.join(where)}: " if where else ""
        super().__init__(prefix + message)


class DegenerateGeometryError(LidkitError, ValueError):
    """Points are coincident or collinear, so no plane is defined."""


class DegenerateBlinkError(LidkitError, ValueError):
    """A blink's tangents or levels do not define valid phase boundaries."""


class InsufficientDataError(LidkitError, ValueError):
    """Too few samples, peaks or training vectors for the requested operation."""


class NoSampleError(LidkitError, ValueError):
    """Neither eye produced a usable angle."""


class NotFittedError(LidkitError, RuntimeError):
    """A model was used before being fitted."""
