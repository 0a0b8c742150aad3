"""Error taxonomy shared across the package.

The CLI maps these onto exit codes: configuration 1, data/format 2,
numeric 3. LogicError marks internal contract violations and is left
unmapped so the run aborts loudly.
"""


class ConfigurationError(ValueError):
    """Invalid user-supplied configuration (sizes, budgets, schema)."""


class FormatError(ValueError):
    """Malformed data file (bad magic, truncation, invalid labels)."""


class NumericError(RuntimeError):
    """Non-finite value encountered during optimization."""


class LogicError(RuntimeError):
    """Broken internal invariant, e.g. querying a non-unlabeled index."""
