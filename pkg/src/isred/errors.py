"""Exception hierarchy shared by all modules."""


class IsredError(Exception):
    """Base class for every error raised by the package."""


class StructuralError(IsredError):
    """Malformed game: bad dimensions, cyclic precedence, unresolved names."""


class UnsupportedError(IsredError):
    """The requested operation is outside the supported model families."""


class ArgumentError(IsredError, ValueError):
    """Invalid argument value (out of range, wrong kind, empty sample)."""


class ReductionRefused(IsredError):
    """A reduction's validity conditions are not met."""


class SizeGuardError(IsredError):
    """Exhaustive enumeration would exceed the configured size guard."""


class PrimitiveMismatch(IsredError):
    """Two games that should share primitives do not."""


class SolverError(IsredError):
    """A solver could not produce a result (second-order failure, singularity)."""
