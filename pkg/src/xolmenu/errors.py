"""Exception hierarchy shared across the package."""


class XolMenuError(Exception):
    """Base error for this package."""


class ParameterError(XolMenuError, ValueError):
    """A distribution or problem parameter is outside its admissible range."""


class MomentError(XolMenuError):
    """A requested moment does not exist (e.g. infinite second moment)."""


class UnsupportedOperationError(XolMenuError):
    """Operation not defined for this family (e.g. theta-derivative of a fixed family)."""


class NumericsError(XolMenuError):
    """A numerical kernel failed to reach its tolerance."""


class BracketError(NumericsError):
    """Root bracketing failed: no sign change on the given interval."""


class FixedPointError(NumericsError):
    """Fixed-point iteration did not converge; carries the residual history."""

    def __init__(self, message, residual_history=None):
        super().__init__(message)
        self.residual_history = list(residual_history or [])


class SingularityError(XolMenuError):
    """Ratio Psi_theta / Psi hit a genuine singularity (zero mass, nonzero sensitivity)."""


class InfeasibleCError(XolMenuError):
    """The integration constant C yields no admissible loading curve."""


class NoContractError(XolMenuError):
    """No feasible integration constant exists: the insurer offers no contract."""


class UndefinedCoverageError(XolMenuError):
    """Pointwise optimal coverage is undefined (zero true-type density)."""


class ConfigError(XolMenuError):
    """Experiment configuration file is malformed; names the offending key."""

    def __init__(self, message, key=None):
        super().__init__(message)
        self.key = key
