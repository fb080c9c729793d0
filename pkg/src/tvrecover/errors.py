"""Exception hierarchy shared by every module."""


class TVRecoverError(Exception):
    """Base class for all package errors."""


class InvalidArgument(TVRecoverError, ValueError):
    """A precondition on an argument was violated."""


class DegenerateEnsemble(TVRecoverError):
    """The measurement matrix is rank deficient."""


class SparsityTooLarge(InvalidArgument):
    """Support too large for the index construction to apply."""


class UnsupportedLength(InvalidArgument):
    """Signal length (or side) is not a power of two."""


class OutOfRegime(InvalidArgument):
    """Arguments fall outside the range where a bound is stated."""


class ScaleGuardError(TVRecoverError):
    """An exact/exhaustive routine was asked to run beyond its size guard."""


class OracleScaleError(ScaleGuardError):
    pass


class CertificateScaleError(ScaleGuardError):
    pass


class InfeasibleProblem(TVRecoverError):
    """The linear program has no feasible point."""


class UnboundedProblem(TVRecoverError):
    """The linear program is unbounded."""


class EstimatorUnstable(TVRecoverError):
    """Too many Monte Carlo samples were rejected by the inner solver."""


class SaturationError(TVRecoverError):
    """Empirical success never reached the target rate."""
