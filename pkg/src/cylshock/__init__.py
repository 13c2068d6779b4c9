"""cylshock: shock-fitting solver for steady axisymmetric transonic flow with
swirl in a finite cylinder.

The solver finds a shock surface x = f(r) and the subsonic flow behind it for
a prescribed supersonic inflow, by iterating a velocity-decomposition scheme:
potential solve, shock-curve update, entropy/swirl transport along stream
surfaces, and a swirl-potential solve.
"""

from .errors import (
    AmplitudeError,
    ConfigError,
    CylShockError,
    DegeneracyError,
    DivergenceError,
    InvalidStateError,
    LinearSolverError,
    PreconditionError,
    ShockEscapeError,
    VacuumError,
)
from .gasdyn import (
    REF,
    BackgroundShock,
    GasConstants,
    GasState,
    background_downstream,
    bernoulli,
    density_H,
    ks,
    post_shock_state,
    rh_residual,
    s_sh,
    sound_speed,
)

from .upstream import (
    InflowSpec,
    UpstreamSolution,
    build_parallel_swirl_inflow,
    helmholtz_decompose_upstream,
)
from .driver import (
    Solution,
    SolverConfig,
    sigma_scaling_study,
    solve_transonic_shock,
)

__version__ = "0.1.0"
