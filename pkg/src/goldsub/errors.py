"""Exception types shared by the solver, the inner searches, and the CLI."""


class GoldsubError(Exception):
    """Base class for everything this package raises on purpose."""


class OracleError(GoldsubError):
    """An oracle returned NaN/Inf or otherwise broke its contract."""


class UsageError(GoldsubError):
    """A caller violated a documented precondition (bad arguments, infeasible
    anchor handed to an inner search, unknown problem name, missing direction)."""


class InfeasibleStartError(UsageError):
    """The starting point violates a constraint: g(x0) > 0."""


class BudgetExceededError(GoldsubError):
    """An oracle-call or outer-iteration cap was exhausted.

    ``partial`` carries whatever state was available when the cap was hit
    (current zeta, combination, counters) for post-mortem inspection.
    """

    def __init__(self, message: str, partial: dict | None = None):
        super().__init__(message)
        self.partial = partial or {}


class ModulusError(GoldsubError):
    """The ray bisection exhausted its step cap.

    This signals that the nonconvexity-modulus metadata understates the
    function's actual modulus, or that the directional oracle violates its
    contract.
    """


class CertificationError(GoldsubError):
    """Certificate assembly found an internal contract violation."""
