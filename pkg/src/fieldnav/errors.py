"""Exception taxonomy shared across the package.

CLI exit-code mapping: ConfigError and usage problems exit 1,
SceneRejectedError and other domain rejections exit 2.
"""


class FieldNavError(Exception):
    """Base class for all fieldnav errors."""


class CapacityError(FieldNavError):
    """Grid dimensions exceed the configured voxel budget."""


class DomainError(FieldNavError):
    """A query point lies outside the field's sampling domain."""

    def __init__(self, message: str, point=None):
        super().__init__(message)
        self.point = point


class InvalidGoalError(FieldNavError):
    """Goal is out of bounds or inside an obstacle."""


class ArityError(FieldNavError):
    """Mismatched number of body parts, priors, or samples."""


class ValidationError(FieldNavError):
    """Input violates a numeric precondition (non-unit vector, bad norm, ...)."""


class SceneRejectedError(FieldNavError):
    """Scene generation could not produce a certified scene within budget."""


class ConfigError(FieldNavError):
    """Malformed or unknown configuration."""
