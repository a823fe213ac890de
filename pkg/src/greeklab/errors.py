"""Exception hierarchy; every error carries a short machine-readable kind."""


class GreeklabError(Exception):
    kind = "error"


class DomainError(GreeklabError, ValueError):
    kind = "domain"


class NormalizationError(GreeklabError, ValueError):
    kind = "normalization"


class ResourceError(GreeklabError, MemoryError):
    kind = "resource"


class BudgetError(GreeklabError, RuntimeError):
    kind = "budget"


class AliasingError(GreeklabError, ValueError):
    kind = "aliasing"


class AmbiguityError(GreeklabError, RuntimeError):
    kind = "ambiguity"


class InfeasibleError(GreeklabError, RuntimeError):
    kind = "infeasible"


class ConfigError(GreeklabError, ValueError):
    kind = "config"
