"""Exception hierarchy shared by every stage of the pipeline."""


class FeatDiscError(Exception):
    """Base class for all errors raised by featdisc."""


class DataError(FeatDiscError):
    """Input data could not be read or has the wrong structure."""


class ParseError(DataError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class StructureError(DataError):
    """Inconsistent column counts, row-length mismatches, index overflow."""


class EmptyInputError(DataError):
    pass


class ConfigurationError(FeatDiscError):
    """A configuration cannot be satisfied (bad fractions, empty partition...)."""


class DegenerateAUCError(FeatDiscError):
    """AUC is undefined because only one class is present."""


class EncoderMismatchError(StructureError):
    """A model or encoded dataset does not belong to the given encoder."""
