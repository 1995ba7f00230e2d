"""Exception hierarchy for wehrlflux."""


class WehrlFluxError(Exception):
    """Base class for all package errors."""


class DimensionError(WehrlFluxError, ValueError):
    """Operator or state dimension is invalid or mismatched."""


class TruncationError(WehrlFluxError, ValueError):
    """Requested amplitude does not fit in the Fock cutoff.

    Carries ``required_n_max``, an estimate of a cutoff that would.
    """

    def __init__(self, msg, required_n_max=None):
        super().__init__(msg)
        self.required_n_max = required_n_max


class CutoffError(WehrlFluxError, ValueError):
    """Fock cutoff below the recommended value for the given parameters."""

    def __init__(self, msg, recommended=None):
        super().__init__(msg)
        self.recommended = recommended


class StateValidationError(WehrlFluxError, ValueError):
    """A density matrix violates hermiticity, trace or positivity bounds."""


class SolverConvergenceError(WehrlFluxError, RuntimeError):
    """An eigensolver or linear solver failed to converge to tolerance."""


class DegenerateSteadyStateError(WehrlFluxError, RuntimeError):
    """More than one eigenvalue of the generator sits at zero."""


class StepSizeError(WehrlFluxError, ValueError):
    """Fixed-step propagation is unstable or drifted beyond tolerance."""


class MassDeficitError(WehrlFluxError, ValueError):
    """Quadrature grid does not capture the state's phase-space mass."""


class QuadratureError(WehrlFluxError, RuntimeError):
    """A phase-space integral failed an internal consistency check."""


class UnstableSystemError(WehrlFluxError, ValueError):
    """Drift matrix is not Hurwitz; carries the offending eigenvalue."""

    def __init__(self, msg, eigenvalue=None):
        super().__init__(msg)
        self.eigenvalue = eigenvalue


class InvalidCovarianceError(WehrlFluxError, ValueError):
    """Covariance matrix violates symmetry, physicality or positivity."""


class SingularExpansionError(WehrlFluxError, ValueError):
    """Coefficient expansion requested at a singular point (zero mean field)."""


class SingularBranchError(WehrlFluxError, ValueError):
    """Bosonization branch is singular (fully inverted spin)."""


class ConfigError(WehrlFluxError, ValueError):
    """Run configuration is malformed or fails validation."""
