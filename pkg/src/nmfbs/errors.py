"""Exception types."""


class NumericError(RuntimeError):
    """Non-finite values, failed nonlinear solves, or state blow-up."""


class NewtonDivergedError(NumericError):
    """Newton iteration for a state equation did not reach its tolerance."""
