"""Exception types shared across the package.

The CLI maps these onto exit code 1 with a single-line machine-parsable
message; everything else is an internal bug and escapes as a traceback.
"""


class InfolabError(Exception):
    """Base class for all errors raised by this package."""

    code = "error"


class FormatError(InfolabError):
    """Malformed EMB1 binary payload."""

    code = "format"


class SchemaError(InfolabError):
    """Sidecar JSON missing required structure."""

    code = "schema"


class DomainError(InfolabError):
    """Input violates an operation's precondition."""

    code = "domain"


class ShapeError(InfolabError):
    """Array dimensions incompatible with the requested operation."""

    code = "shape"


class ConvergenceError(InfolabError):
    """Iterative solver exhausted its budget."""

    code = "convergence"


class SolverError(InfolabError):
    """No solution exists in the searched bracket."""

    code = "solver"


class ConfigurationError(InfolabError):
    """Mutually inconsistent run options."""

    code = "config"


class NumericalError(InfolabError):
    """A quantity left its mathematically guaranteed range by more than round-off."""

    code = "numerical"
