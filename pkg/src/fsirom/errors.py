"""Exception types shared across the package."""


class ParameterError(ValueError):
    """A physical or numerical parameter violates its admissibility constraints."""


class UsageError(ValueError):
    """An operation was called with inconsistent or malformed arguments."""


class SolverError(RuntimeError):
    """A linear solve failed (singular matrix, zero pivot, or residual blow-up)."""


class NonConvergence(RuntimeError):
    """The implicit coupling loop hit the iteration cap before the stopping test."""

    def __init__(self, step, iterations, residual):
        self.step = step
        self.iterations = iterations
        self.residual = residual
        super().__init__(
            f"implicit loop did not converge at step {step}: "
            f"{iterations} iterations, last residual {residual:.3e}"
        )


class SingularSaddle(SolverError):
    """The reduced saddle-point system is singular for the requested basis sizes."""

    def __init__(self, n_vel, n_lam):
        self.n_vel = n_vel
        self.n_lam = n_lam
        super().__init__(
            f"singular reduced saddle system (velocity modes {n_vel}, "
            f"multiplier modes {n_lam})"
        )


class EmptySpectrum(ValueError):
    """POD was asked for modes of an all-zero snapshot set."""
