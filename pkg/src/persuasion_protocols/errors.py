"""Exception types raised across the package."""


class ProtocolError(Exception):
    """Base class for all package errors."""


class IterationCapExceeded(ProtocolError):
    def __init__(self, sweeps, residual):
        super().__init__(f"value iteration did not converge in {sweeps} sweeps (residual {residual:.3e})")
        self.sweeps = sweeps
        self.residual = residual


class TooLarge(ProtocolError):
    pass


class SingularSystem(ProtocolError):
    def __init__(self, message, trapped_mass=None):
        super().__init__(message)
        self.trapped_mass = trapped_mass


class PreconditionFailed(ProtocolError):
    pass


class KnifeEdge(ProtocolError):
    pass


class ShapeError(ProtocolError):
    pass


class ParamOutOfRange(ProtocolError):
    pass


class RegimeError(ProtocolError):
    pass


class NoIntermediate(ProtocolError):
    pass


class ZeroMass(ProtocolError):
    pass


class LpInfeasible(ProtocolError):
    """The action-symmetrization program was infeasible; the current action rule is
    always feasible, so this indicates an internal bug."""


class TieBreakWarning(UserWarning):
    """Two transient states share the same hitting-frequency likelihood ratio."""
