"""Exception hierarchy shared by all higgsflow modules."""


class HiggsFlowError(Exception):
    """Base class for all errors raised by this package."""


class ValidationError(HiggsFlowError, ValueError):
    """Invalid input data: shapes, twists, parameter ranges, file formats."""


class PositivityError(HiggsFlowError):
    """A metric lost pointwise positive definiteness."""


class SolverError(HiggsFlowError):
    """A linear or eigenvalue solver failed to meet its certified tolerance."""


class CflError(HiggsFlowError):
    """Requested time step exceeds the explicit-scheme stability cap."""


class FlowAbortError(HiggsFlowError):
    """The heat-flow integrator aborted (positivity loss or monotonicity failure)."""
