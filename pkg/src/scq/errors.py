"""Exception hierarchy shared by every scq module."""


class ScqError(Exception):
    pass


class DataError(ScqError, ValueError):
    """Malformed input data (CSV parse failures, arity mismatches)."""


class NaNValue(DataError):
    pass


class QueryError(ScqError, ValueError):
    """Malformed query specification."""


class CyclicQuery(ScqError):
    pass


class WrongClass(ScqError):
    """Index kind does not support the classified query."""


class BadBudget(ScqError, ValueError):
    pass


class BudgetExceeded(ScqError):
    pass


class DimensionMismatch(ScqError, ValueError):
    pass


class ModeMismatch(ScqError):
    pass


class EmptyResult(ScqError):
    pass


class EmptySet(ScqError):
    pass


class NotCovered(ScqError):
    pass


class NotHierarchical(ScqError):
    pass


class InvalidGhd(ScqError, ValueError):
    def __init__(self, condition: str, detail: str = ""):
        self.condition = condition
        super().__init__(f"{condition}: {detail}" if detail else condition)


class NotHierarchicalDecomposition(ScqError):
    pass
