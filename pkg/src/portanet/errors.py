"""Exception types raised across the framework."""


class PortanetError(Exception):
    """Base class for every error the framework raises on purpose."""


class ShapeError(PortanetError, ValueError):
    """Invalid shape, or shapes that do not conform for an operation."""


class InputError(PortanetError, ValueError):
    """Bad user-provided values, e.g. a label outside the class range."""


class ConfigError(PortanetError, ValueError):
    pass


class FormatError(PortanetError, ValueError):
    """A binary file (snapshot, IDX, CIFAR batch) is corrupt or truncated."""


class ContractError(PortanetError, RuntimeError):
    """An engine usage rule was broken (policy change inside a region, aliasing)."""


class EngineError(PortanetError, RuntimeError):
    """A kernel raised while running under the engine; the original is chained."""
