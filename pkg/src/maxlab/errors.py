"""Exception types shared across the package."""


class LabError(Exception):
    """Base class for all maxlab errors."""


class GeometryError(LabError):
    """Invalid geometric input (dimension mismatch, bad shape parameters)."""


class DegenerateBodyError(GeometryError):
    """Body has zero volume or its vertices do not span the space."""


class SingularMatrixError(GeometryError):
    """Linear map is singular or beyond the configured condition cap."""


class IsotropyError(LabError):
    """Operation requires an isotropic body and the input is not one."""


class FieldGeometryError(LabError):
    """Grid geometry mismatch or invalid grid parameters."""


class ConfigError(LabError):
    """Invalid experiment configuration."""
