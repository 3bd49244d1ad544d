"""Exception hierarchy shared by the library and the CLI exit-code contract."""


class CoreGaugeError(Exception):
    """Base class for all errors raised by this package."""

    exit_code = 1


class ConfigurationError(CoreGaugeError):
    """A market or experiment configuration violates its invariants."""

    exit_code = 2


class UsageError(CoreGaugeError):
    """An operation was called with arguments outside its contract."""

    exit_code = 2


class CapabilityError(CoreGaugeError):
    """The instance is too large for an intentionally small-scale operation."""

    exit_code = 3


class InternalInconsistencyError(CoreGaugeError):
    """An invariant that should hold by construction failed (likely a bug upstream)."""

    exit_code = 4
