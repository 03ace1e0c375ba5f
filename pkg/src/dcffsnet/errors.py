"""Exception types shared across the package."""


class FormatError(ValueError):
    """A serialized artifact (NTF tensor, PGM mask, DCFW weight file) is malformed."""


class ShapeMismatch(ValueError):
    """Operands have incompatible shapes for the requested operation."""


class ConfigError(ValueError):
    """A network configuration violates one of its invariants."""


class WeightMismatch(ValueError):
    """A weight store does not line up with the configuration that consumes it."""
