"""Exception hierarchy shared by every hybridplan module."""


class PlannerError(Exception):
    """Base class for all hybridplan errors."""


class ConfigParseError(PlannerError):
    """A property file line could not be parsed."""

    def __init__(self, path, line_no: int, message: str):
        self.path = path
        self.line_no = line_no
        super().__init__(f"{path}:{line_no}: {message}")


class ConfigTypeError(ConfigParseError):
    """A property value has the wrong type for its key."""


class ConfigValueError(PlannerError, ValueError):
    """A configuration value violates a domain invariant."""


class FleetBoundsError(PlannerError, ValueError):
    pass


class EmptyFleetError(PlannerError, ValueError):
    pass


class PolicyMismatchError(PlannerError, ValueError):
    """The fleet shape is not allowed for the requested execution policy."""


class StorageError(PlannerError, OSError):
    pass


class TrainingError(PlannerError):
    pass


class ModelStateError(PlannerError):
    """Raised when a model is used before it has been trained."""


class EmptyInputError(PlannerError, ValueError):
    pass


class DomainError(PlannerError, ValueError):
    """An argument lies outside the mathematical domain of an operation."""


class SearchConfigError(PlannerError, ValueError):
    pass


class UnparseableQueryError(PlannerError, ValueError):
    pass


class UndefinedSimilarityError(PlannerError, ValueError):
    pass


class NoKnownQueriesError(PlannerError, LookupError):
    pass


class PlanningError(PlannerError):
    pass
