"""Shared exception types."""


class GastwinError(Exception):
    """Base class for package errors."""


class DomainBoundsError(GastwinError, ValueError):
    """A coordinate or time lies outside the valid domain."""


class InsufficientDataError(GastwinError, ValueError):
    """An estimator was given fewer samples than it needs."""


class ConfigurationError(GastwinError, ValueError):
    """A solver or service was configured with unusable parameters."""


class SchemaError(GastwinError, ValueError):
    """A message or file does not match its declared schema."""


class RegistryError(GastwinError, KeyError):
    """An id was not found in the asset registry."""


class ScenarioValidationError(GastwinError, ValueError):
    """A scenario file failed invariant validation."""

    def __init__(self, violations: list[str]):
        self.violations = list(violations)
        super().__init__("; ".join(violations))
