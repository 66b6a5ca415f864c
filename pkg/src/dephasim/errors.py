"""Exception types shared across the package."""


class ConfigError(ValueError):
    """Invalid or inconsistent configuration input."""


class PreconditionError(ValueError):
    """An operation was called outside its stated domain of validity."""


class NumericError(RuntimeError):
    """A numerical procedure failed to converge or produced invalid output."""


class SchemaError(ConfigError):
    """A persisted record has an unrecognized schema version or layout."""
