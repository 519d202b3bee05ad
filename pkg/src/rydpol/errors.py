"""Exception types raised across the package."""


class RydpolError(Exception):
    """Base class for all package errors."""


class UnconfinedTrap(RydpolError, ValueError):
    """A secular-frequency radicand is not positive."""


class InconsistentFrequencies(RydpolError, ValueError):
    """Secular frequencies cannot be produced by any valid trap."""


class TruncationOverflow(RydpolError):
    """The joint phonon support exceeds the configured term limit."""


class InvalidSideband(RydpolError, ValueError):
    """A sideband transition would end below the motional ground state."""


class NonConvergence(RydpolError):
    """No start of a multi-start fit converged."""


class AmbiguousFit(RydpolError):
    """Two distinct parameter basins describe the data equally well."""

    def __init__(self, message, candidates=()):
        super().__init__(message)
        self.candidates = list(candidates)


class ConfigError(RydpolError, ValueError):
    """An experiment configuration is malformed or inconsistent."""


class MissingInput(RydpolError, FileNotFoundError):
    """A figure-data product was requested without its inputs."""
