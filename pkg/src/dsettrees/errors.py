"""Exception types shared across the package."""


class ArgumentError(ValueError):
    """An operation was called with arguments violating its precondition."""


class DataError(ValueError):
    """Input data fails a structural invariant (carries a refutation message)."""


class InconsistencyError(RuntimeError):
    """An internal consistency guarantee was violated; treated as a test alarm."""


class ParseError(ValueError):
    """A serialized document is malformed; `location` is a JSON-pointer-like path."""

    def __init__(self, message: str, location: str = ""):
        super().__init__(f"{location}: {message}" if location else message)
        self.location = location
        self.reason = message
