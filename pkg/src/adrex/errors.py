"""Exception hierarchy.

Everything raised for bad input data derives from :class:`DataError`, which the
command-line front end maps to exit status 2.
"""


class AdrexError(Exception):
    pass


class DataError(AdrexError):
    pass


class ParseError(DataError):
    def __init__(self, message: str, line: int | None = None, source: str | None = None):
        self.line = line
        self.source = source
        where = ""
        if source:
            where += f"{source}:"
        if line is not None:
            where += f"line {line}: "
        elif where:
            where += " "
        super().__init__(where + message)


class IntegrityError(DataError):
    """Surface text or hash does not agree with the data it describes."""


class ValidationError(DataError):
    """A structural invariant (offsets, overlap rule, tag alphabet) is violated."""


class TrainingError(AdrexError):
    pass
