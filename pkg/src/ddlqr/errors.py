"""Exception types shared across the package."""


class DdlqrError(Exception):
    """Base class for all package errors."""


class InvalidInput(DdlqrError):
    """Argument violates a documented precondition (shape, finiteness, range)."""


class NotSchur(DdlqrError):
    """A matrix required to have spectral radius < 1 does not."""


class NotStabilizable(DdlqrError):
    """Riccati iteration failed to converge; the pair is treated as not stabilizable."""


class NotIdentifiable(DdlqrError):
    """Data matrix W0 is rank deficient; the dynamics cannot be identified."""


class Infeasible(DdlqrError):
    """The synthesis program admits no feasible point."""


class DegenerateRecovery(DdlqrError):
    """Gain recovery would invert a numerically singular matrix."""


class OracleRequired(DdlqrError):
    """The operation needs the recorded disturbance D0, which is absent."""
