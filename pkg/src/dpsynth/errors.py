"""Exception taxonomy shared across the library and mapped to CLI exit codes."""


class DpSynthError(Exception):
    """Base class for all library errors."""


class InvalidArgument(DpSynthError, ValueError):
    """An argument violates a documented precondition."""


class ParseError(DpSynthError):
    """A domain document or data file does not match its schema."""


class ValidationError(DpSynthError):
    """Data and domain disagree (schema drift, unknown column, ...)."""


class CorruptData(DpSynthError):
    """An encoded dataset holds a cell outside its column's range."""


class EncodingError(DpSynthError):
    """A raw value cannot be encoded (e.g. undeclared category)."""

    def __init__(self, column: str, value, reason: str = "undeclared value"):
        self.column = column
        self.value = value
        super().__init__(f"column {column!r}: {reason}: {value!r}")


class BudgetExhausted(DpSynthError):
    """A ledger charge would exceed the total privacy budget."""


class BudgetRequired(DpSynthError):
    """DP preprocessing work is needed but no budget was provided."""


class ConsistencyError(DpSynthError):
    """Measurements reference cliques the inference structure cannot host."""


class UnsupportedQuery(DpSynthError):
    """A marginal query spans no single junction-tree node."""


class InfeasibleCondition(DpSynthError):
    """A generation condition has zero probability under the model."""


class InvalidConfiguration(DpSynthError):
    """A configuration is self-contradictory (e.g. fully zeroed column)."""


class LoadError(DpSynthError):
    """A model container is corrupt, truncated, or version-mismatched."""
