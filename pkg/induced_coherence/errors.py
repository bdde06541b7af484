"""
Exception hierarchy for the induced-coherence toolkit.

Every error carries a short machine-readable ``error_code``, a ``details``
mapping and the process exit code the CLI uses when the error escapes a
subcommand (0 success, 1 validation/computation failure, 2 configuration
error, 3 resource or truncation error).
"""

from typing import Any, Dict, Optional


class InterferometerError(Exception):
    """Base class for all toolkit errors."""

    error_code = "interferometer_error"
    exit_code = 1

    def __init__(self, message: str, details: Optional[Dict[str, Any]] = None):
        super().__init__(message)
        self.message = message
        self.details = details or {}

    def to_report(self):
        """Structured form used by the MCP server and the CLI."""
        from .models import ErrorReport

        return ErrorReport(
            error_code=self.error_code, message=self.message, details=self.details
        )


class RangeError(InterferometerError, ValueError):
    """A parameter lies outside its allowed range."""

    error_code = "range_error"
    exit_code = 2

    def __init__(self, field: str, value: Any, allowed: str):
        super().__init__(
            f"{field}={value!r} outside allowed range {allowed}",
            {"field": field, "value": value, "allowed": allowed},
        )
        self.field = field
        self.value = value
        self.allowed = allowed


class ConfigError(InterferometerError):
    """Malformed configuration file, unknown key or bad CLI descriptor."""

    error_code = "config_error"
    exit_code = 2


class ZeroGain(InterferometerError, ValueError):
    """Second-order correlations requested on the vacuum (|V|^2 = 0)."""

    error_code = "zero_gain"


class ZeroPhoton(InterferometerError, ValueError):
    """A normalized correlation needs a mode with zero mean photon number."""

    error_code = "zero_photon"


class DomainError(InterferometerError, ValueError):
    """Inputs are mutually inconsistent (e.g. g13 > g23 beyond tolerance)."""

    error_code = "domain_error"


class DimensionMismatch(InterferometerError, ValueError):
    """A map and a state act on different numbers of modes."""

    error_code = "dimension_mismatch"


class BogoliubovViolation(InterferometerError):
    """A linear map breaks the bosonic commutation relations."""

    error_code = "bogoliubov_violation"


class PhysicalityError(InterferometerError):
    """A moment state has a non-positive moment matrix."""

    error_code = "physicality_error"


class TruncationError(InterferometerError):
    """Fock-space truncation lost more norm than the tolerance allows."""

    error_code = "truncation_error"
    exit_code = 3


class ResourceError(InterferometerError):
    """The requested Fock basis exceeds the configured size cap."""

    error_code = "resource_error"
    exit_code = 3


class RegimeError(InterferometerError):
    """The event-level model is used outside the low-gain regime."""

    error_code = "regime_error"


class InsufficientCounts(InterferometerError):
    """Too few coincidences for a meaningful estimate."""

    error_code = "insufficient_counts"
