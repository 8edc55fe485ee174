"""Exception hierarchy shared by every etmas module."""


class EtmasError(Exception):
    """Base class for all library errors."""


class NonFiniteState(EtmasError):
    """A flow step produced NaN or infinity (model blow-up or step too large)."""


class DimensionMismatch(EtmasError, ValueError):
    """A vector does not match the declared node partition."""


class DegenerateDenominator(EtmasError, ZeroDivisionError):
    """The denominator 1 - rho * Lbar0 is not positive."""


class MissingStateLyapunov(EtmasError):
    """A centralized trigger was requested without a state Lyapunov function V."""


class InfeasibleInitialization(EtmasError):
    """Initial values or slack constants for the Riccati ODE lie outside the admissible window."""


class MissingJacobian(EtmasError):
    """Analytic derivatives were requested but no Jacobian was supplied."""


class TauOutOfRange(EtmasError):
    """A timer value lies outside the solved grid of a Riccati solution."""


class ConfigViolation(EtmasError):
    """Sampling or delay timing breaks the bounds eps <= h <= T, 0 <= d <= min(Delta, h)."""


class ConfigError(EtmasError, ValueError):
    """A declarative configuration file is malformed or inconsistent."""
