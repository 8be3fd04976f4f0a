"""Shared exception taxonomy.

Every module raises one of these four instead of bare ValueError so callers
(and the CLI exit-code mapping) can tell configuration mistakes apart from
runtime contract violations and corrupt files.
"""


class RadarBodyError(Exception):
    pass


class DimensionError(RadarBodyError):
    """Array extents incompatible with the operation."""


class ConfigurationError(RadarBodyError):
    """A config value outside its documented range, or an unknown option."""


class ContractError(RadarBodyError):
    """A caller violated a documented precondition."""


class FormatError(RadarBodyError):
    """A serialized file is corrupt or has an unexpected layout.

    ``offset`` is the byte position at which reading failed, when known.
    """

    def __init__(self, message: str, offset: int | None = None):
        if offset is not None:
            message = f"{message} (at byte offset {offset})"
        super().__init__(message)
        self.offset = offset


class DegenerateRotationError(ContractError):
    """6D rotation input too close to a singular configuration."""
