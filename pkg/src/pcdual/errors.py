"""Exception types shared across the package."""


class DimensionError(ValueError):
    """Raised when an operand has the wrong shape.

    ``operand`` names the offending argument so callers can tell which of
    several inputs was malformed.
    """

    def __init__(self, operand: str, message: str):
        self.operand = operand
        super().__init__(f"{operand}: {message}")


class ParseError(ValueError):
    def __init__(self, path, line: int, message: str):
        self.path = path
        self.line = line
        super().__init__(f"{path}:{line}: {message}")


class CheckpointError(ValueError):
    pass


class ConfigError(ValueError):
    pass
