"""Exception hierarchy shared by the library and the CLI."""
from __future__ import annotations


class PabanditsError(Exception):
    """Base class for every error raised deliberately by this package."""


class InstanceError(PabanditsError, ValueError):
    """An instance, offer or input violates its invariants."""


class ConfigError(PabanditsError, ValueError):
    """An experiment or algorithm configuration is unusable."""


class ProtocolViolation(PabanditsError, RuntimeError):
    """The simulated game left the behaviour the algorithms rely on."""


class InternalError(PabanditsError, RuntimeError):
    """A numerical routine failed in a way that should be impossible."""
