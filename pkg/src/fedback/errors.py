"""Exception types shared across the package."""


class ContractViolationError(ValueError):
    """An argument or state violates a documented precondition."""


class SolverFailureError(RuntimeError):
    """An inner solver exhausted its iteration budget.

    Carries the final gradient residual so callers can see how far the
    solve ended from the requested tolerance.
    """

    def __init__(self, message: str, residual: float):
        super().__init__(f"{message} (final residual {residual:.6e})")
        self.residual = float(residual)


class TraceFormatError(ValueError):
    """A trace file failed to parse; the message names the offending row."""
