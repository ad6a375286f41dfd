"""Exception types shared across the toolkit."""


class DimensionError(ValueError):
    """Operand shapes are incompatible with the requested operation."""


class DomainError(ValueError):
    """An argument is outside the operation's valid domain."""


class ConfigError(ValueError):
    """A configuration value is invalid."""


class AlignmentError(ValueError):
    """Per-token records (labels, POS, contextual rows) do not line up."""


class TrainingError(RuntimeError):
    """Training failed, e.g. the loss diverged."""


class ParseError(ValueError):
    """An input file violates its format contract."""

    def __init__(self, message: str, path: str | None = None, line: int | None = None):
        where = ""
        if path is not None:
            where = f"{path}:" if line is None else f"{path}:{line}:"
        elif line is not None:
            where = f"line {line}:"
        super().__init__(f"{where} {message}" if where else message)
        self.path = path
        self.line = line
