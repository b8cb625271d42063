"""Exception hierarchy shared across the package."""


class HsmgnnError(Exception):
    """Base class for all package errors."""


class ShapeError(HsmgnnError):
    """Operand shapes are incompatible for the requested operation."""


class ConfigError(HsmgnnError):
    """A configuration value violates its documented constraints."""


class ContractError(HsmgnnError):
    """A runtime precondition was violated (bad caller, not bad config)."""


class FormatError(HsmgnnError):
    """An input file does not match its expected on-disk format."""


class NumericsError(HsmgnnError):
    """Training produced NaN or another non-finite value."""
