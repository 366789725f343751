"""Exception hierarchy. Every error carries a machine-parsable category string."""


class TrajCriticError(Exception):
    category = "error"


class InvalidInputError(TrajCriticError):
    category = "invalid-input"


class OutOfRangeError(TrajCriticError):
    category = "out-of-range"


class InfeasibleError(TrajCriticError):
    category = "infeasible"


class InconsistentReportError(TrajCriticError):
    category = "inconsistent-report"


class TrackingLostError(TrajCriticError):
    category = "tracking-lost"


class SchemaError(TrajCriticError):
    category = "schema"


class UndefinedEstimateError(TrajCriticError):
    category = "undefined-estimate"
