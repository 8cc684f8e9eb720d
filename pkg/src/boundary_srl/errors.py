"""Shared exception types. The CLI maps all of these to exit code 2."""


class ParseError(ValueError):
    """Malformed input text (corpus files, vector files, config files)."""


class StructureError(ValueError):
    """Structurally inconsistent data, e.g. predicate/column count mismatch."""


class ConfigError(ValueError):
    """Invalid configuration value or combination."""


class ShapeError(ValueError):
    """Tensor shape mismatch."""


class DataError(ValueError):
    """Runtime data problem: non-finite values, missing vectors, misaligned keys."""
