"""Exception types shared across the package."""


class EnstabError(Exception):
    """Base class for all package-specific errors."""


class ConfigError(EnstabError):
    """Malformed or inconsistent run configuration."""


class PoleProximityError(EnstabError):
    """An evaluation point is too close to an open-loop pole."""


class WindingError(EnstabError):
    """A contour integral did not snap to an integer winding number."""


class NonNormalizableError(EnstabError):
    """Candidate eigenvector cannot be normalized against the gain functional."""


class StepSizeError(EnstabError):
    """Requested integrator step violates the stability bound."""


class CertificateError(EnstabError):
    """A certificate cannot be derived from the available evidence."""
