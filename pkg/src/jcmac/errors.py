"""Exception hierarchy shared by the solvers, oracles and CLI."""


class JCMACError(Exception):
    """Base class for all package errors."""


class DimensionMismatch(JCMACError, ValueError):
    pass


class NotPSD(JCMACError, ValueError):
    pass


class ZeroEnergyUser(JCMACError, ValueError):
    pass


class ModelFormatError(JCMACError, ValueError):
    """A model, covariance or sample file failed to parse or cross-check."""


class PreconditionViolated(JCMACError, ValueError):
    pass


class NoConvergence(JCMACError, RuntimeError):
    def __init__(self, max_iters, residual, partial=None):
        super().__init__(
            f"fixed point not reached after {max_iters} iterations "
            f"(residual {residual:.3e})"
        )
        self.max_iters = max_iters
        self.residual = residual
        self.partial = partial


class SingularIteration(JCMACError, ArithmeticError):
    pass


class NonHermitianLogDet(JCMACError, ArithmeticError):
    pass


class FactorizationFailure(JCMACError, ArithmeticError):
    pass


class DegenerateSamples(JCMACError, ValueError):
    pass
