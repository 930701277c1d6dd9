"""Exception types shared across the package."""


class DdeidError(Exception):
    """Base class for all package errors."""


class ParameterError(DdeidError):
    """A model or configuration parameter violates its constraints."""


class DomainError(DdeidError):
    """An evaluation point lies outside the supported range."""


class UnsupportedError(DdeidError):
    """The requested operation is not supported for the given inputs."""


class ConfigError(DdeidError):
    """An experiment configuration is malformed or inconsistent."""


class DivergenceError(DdeidError):
    """A simulated trajectory left the finite range.

    Carries the time at which the state first became non-finite.
    """

    def __init__(self, t, message=None):
        self.t = float(t)
        super().__init__(message or f"solution diverged (non-finite state) at t = {t:.6g}")


class NumericalError(DdeidError):
    """A numerical routine failed in a way that is not a divergence."""
