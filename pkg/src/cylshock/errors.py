"""Exception types shared across the solver."""


class CylShockError(Exception):
    """Base class for all solver errors."""


class InvalidStateError(CylShockError):
    """A thermodynamic state is outside its domain (rho <= 0, p <= 0, S <= 0)."""


class VacuumError(CylShockError):
    """|q|^2 >= 2*B0: the density closure has no solution (cavitation)."""


class PreconditionError(CylShockError):
    """An operation's admissibility precondition fails (e.g. subsonic upstream)."""


class AmplitudeError(CylShockError):
    """Inflow perturbation too large: constructed profile leaves the supersonic regime."""


class ShockEscapeError(CylShockError):
    """Shock update left the bracket (-1/4, 1/4) or the monotonicity guard failed."""


class DegeneracyError(CylShockError):
    """A smallness hypothesis failed at runtime (mass-flux floor, axial-velocity
    floor, stream-function monotonicity, mass-flux imbalance)."""


class LinearSolverError(CylShockError):
    """The sparse linear solver did not reach the requested residual."""


class DivergenceError(CylShockError):
    """A fixed-point loop exceeded its sweep cap.  Carries the partial report."""

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


class ConfigError(CylShockError):
    """Invalid run configuration.  ``errors`` lists every violation found."""

    def __init__(self, errors):
        if isinstance(errors, str):
            errors = [errors]
        self.errors = list(errors)
        super().__init__("; ".join(self.errors))
