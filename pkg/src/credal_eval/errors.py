"""Exception hierarchy shared by every module."""


class CredalError(Exception):
    """Base class for all errors raised by credal_eval."""


class ContractViolation(CredalError, ValueError):
    """An argument broke a documented precondition."""


class StructuralError(CredalError):
    """A set-function family is missing values it refers to."""


class DegenerateInputError(CredalError):
    """Input collapses to something that cannot be normalized."""


class CapacityError(CredalError):
    """Problem size exceeds an enumeration cap."""


class InfeasibleInputError(CredalError):
    """Constraints describe an empty credal set."""


class LoadError(CredalError):
    """A manifest or labels file could not be loaded."""


class RowError(CredalError):
    """A single record of a predictions file is malformed."""

    def __init__(self, row: int, message: str, instance_id: int | None = None):
        super().__init__(f"row {row}: {message}")
        self.row = row
        self.message = message
        self.instance_id = instance_id
