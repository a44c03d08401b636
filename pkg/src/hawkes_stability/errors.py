"""Exception types shared across the package."""


class HawkesError(Exception):
    """Base class for all package errors."""


class DomainError(HawkesError, ValueError):
    """Argument outside the domain of a function (e.g. negative time)."""


class EnvelopeViolation(HawkesError, RuntimeError):
    """The thinning envelope was found below the true rate."""

    def __init__(self, time, rate, envelope):
        self.time = time
        self.rate = rate
        self.envelope = envelope
        super().__init__(
            f"envelope violation at t={time!r}: rate {rate!r} > envelope {envelope!r}"
        )


class ExplosionError(HawkesError, RuntimeError):
    """More events than the configured cap; usually a supercritical model."""


class AttributionError(HawkesError, ArithmeticError):
    """Parent probabilities failed to sum to one within tolerance."""


class PreconditionError(HawkesError, ValueError):
    """A hypothesis required by an operation does not hold."""


class ConfigError(HawkesError, ValueError):
    """Invalid experiment configuration."""
