"""Exception hierarchy shared by every proxkit module."""


class ProxkitError(Exception):
    """Base class for all proxkit errors."""


class InputError(ProxkitError, ValueError):
    """Malformed input: wrong dimension, non-finite entries, bad shape."""


class ZeroOperatorError(ProxkitError, ValueError):
    """A linear operator that must be nonzero is identically zero."""


class CapabilityError(ProxkitError):
    """The requested operation is outside what the catalog supports."""


class DomainError(ProxkitError, ValueError):
    """A starting point lies outside the domain of the nonsmooth term."""


class ConfigError(ProxkitError, ValueError):
    """Solver or problem configuration violates a hypothesis."""


class ReferenceValueError(ProxkitError, ValueError):
    """A reference optimal value is inconsistent with the observed trace."""


class SamplingError(ProxkitError):
    """No admissible sample could be drawn for a verification check."""
