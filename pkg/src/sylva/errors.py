"""Exception hierarchy shared across the pipeline.

The CLI maps these onto its documented exit codes: configuration problems
(bad parameters, missing assets, unmapped groups) exit with 2, data problems
(malformed or truncated files, unmapped labels) with 3, anything else with 4.
"""


class SylvaError(Exception):
    """Base class for all errors raised by this package."""


class ConfigurationError(SylvaError):
    """Invalid parameters, unknown references, or unusable configuration."""


class ValidationError(ConfigurationError):
    """An operation precondition was violated by the caller."""


class DataError(SylvaError):
    """Input data is structurally valid but semantically unusable."""


class ParseError(DataError):
    """A file could not be parsed; carries a location when known."""

    def __init__(self, message, *, path=None, line=None, offset=None):
        loc = []
        if path is not None:
            loc.append(str(path))
        if line is not None:
            loc.append(f"line {line}")
        if offset is not None:
            loc.append(f"byte {offset}")
        if loc:
            message = f"{message} ({', '.join(loc)})"
        super().__init__(message)
        self.path = path
        self.line = line
        self.offset = offset


class AugmentationError(DataError):
    """An augmentation could not be applied; callers fall back to the raw sample."""
