"""Exception hierarchy shared across the package."""


class PatchDCTError(Exception):
    """Base class for every error raised by this package."""


class LengthError(PatchDCTError, ValueError):
    """A coefficient count is outside the valid range for a resolution."""


class ConfigError(PatchDCTError, ValueError):
    """Incompatible configuration, e.g. a patch size that does not divide K."""


class PatchClassError(PatchDCTError, ValueError):
    """An operation was applied to a patch of the wrong class."""


class ContractError(PatchDCTError, ValueError):
    """Structurally inconsistent input (vector presence vs class, shape mismatch)."""


class InputError(PatchDCTError, ValueError):
    """Invalid user-supplied data."""


class ParseError(InputError):
    """Malformed document; ``location`` points at the offending spot."""

    def __init__(self, message, location=None):
        self.location = location
        if location is not None:
            message = f"{message} (at {location})"
        super().__init__(message)


class RecordError(InputError):
    """A single annotation record is invalid."""

    def __init__(self, message, index=None, record_id=None):
        self.index = index
        self.record_id = record_id
        super().__init__(message)
