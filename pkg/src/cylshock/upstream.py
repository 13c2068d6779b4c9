"""Exact supersonic inflow solutions with variable entropy and swirl.

The inflow family is x-independent with u_r = 0 ("parallel swirl"): the
angular momentum density and entropy are prescribed radial profiles, the
pressure integrates the radial momentum balance p' = rho * Lambda^2 / r^3,
and the axial velocity is defined to hold the Bernoulli invariant at B0
exactly.  Every field then satisfies the steady axisymmetric equations
pointwise, which makes the inflow an error-free oracle for the downstream
solver.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
from scipy.linalg import solve_banded

from .errors import AmplitudeError, InvalidStateError
from .gasdyn import BackgroundShock

__all__ = [
    "InflowSpec",
    "UpstreamSolution",
    "build_parallel_swirl_inflow",
    "helmholtz_decompose_upstream",
    "sigma_measure",
]

SWIRL_PROFILES = ("quartic",)
ENTROPY_PROFILES = ("cosine",)


@dataclass(frozen=True)
class InflowSpec:
    """Perturbation amplitudes, profile names, and radial resolution."""

    eps_swirl: float = 0.0
    eps_entropy: float = 0.0
    swirl_profile: str = "quartic"
    entropy_profile: str = "cosine"
    n_r: int = 65

    def __post_init__(self):
        if self.eps_swirl < 0.0 or self.eps_entropy < 0.0:
            raise InvalidStateError("perturbation amplitudes must be >= 0")
        if self.swirl_profile not in SWIRL_PROFILES:
            raise InvalidStateError(f"unknown swirl profile {self.swirl_profile!r}")
        if self.entropy_profile not in ENTROPY_PROFILES:
            raise InvalidStateError(f"unknown entropy profile {self.entropy_profile!r}")
        if self.n_r < 9:
            raise InvalidStateError("n_r must be at least 9")


@dataclass(frozen=True)
class UpstreamSolution:
    """Radial samples of the inflow and its velocity decomposition.

    ``phi_slope`` is the x-slope of the scalar potential: phi(x, r) =
    x * phi_slope(r).  ``t_x`` is the curl-part axial component
    (1/r) d_r(r psi).  ``psi`` and the derivative arrays are None until
    ``helmholtz_decompose_upstream`` has run.
    """

    background: BackgroundShock
    spec: InflowSpec
    r: np.ndarray
    u_x: np.ndarray
    u_theta: np.ndarray
    rho: np.ndarray
    p: np.ndarray
    entropy: np.ndarray
    lam: np.ndarray
    sigma: float
    psi: np.ndarray | None = None
    dpsi_dr: np.ndarray | None = None
    t_x: np.ndarray | None = None
    phi_slope: np.ndarray | None = None

    @property
    def h(self) -> float:
        return float(self.r[1] - self.r[0])

    def state_arrays(self):
        return self.u_x, np.zeros_like(self.u_x), self.u_theta, self.rho, self.p

    def lam_profile(self, r):
        """Analytic angular momentum density at arbitrary radii."""
        return self.spec.eps_swirl * r**2 * (1.0 - r**2)

    def entropy_profile(self, r):
        """Analytic entropy at arbitrary radii."""
        return self.background.s0m * (1.0 + self.spec.eps_entropy * np.cos(np.pi * r))


def _rk4_pressure(r: np.ndarray, lam_of, entropy_of, p0: float, gamma: float) -> np.ndarray:
    """Integrate p' = rho * Lambda^2/r^3 with rho = (p/S)^(1/gamma), p(0) = p0.

    Lambda^2/r^3 is supplied analytically as r*(1-r^2)^2 * eps^2 via lam_of,
    so the axis point is regular.
    """

    def rhs(rr, pp):
        s = entropy_of(rr)
        if np.any(s <= 0.0) or pp <= 0.0:
            raise AmplitudeError("entropy or pressure lost positivity during integration")
        rho = (pp / s) ** (1.0 / gamma)
        lam = lam_of(rr)
        # Lambda^2 / r^3 with the r -> 0 limit folded in analytically.
        if rr == 0.0:
            return 0.0
        return rho * lam**2 / rr**3

    p = np.empty_like(r)
    p[0] = p0
    for j in range(len(r) - 1):
        h = r[j + 1] - r[j]
        rj, pj = r[j], p[j]
        k1 = rhs(rj, pj)
        k2 = rhs(rj + 0.5 * h, pj + 0.5 * h * k1)
        k3 = rhs(rj + 0.5 * h, pj + 0.5 * h * k2)
        k4 = rhs(rj + h, pj + h * k3)
        p[j + 1] = pj + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    return p


def build_parallel_swirl_inflow(spec: InflowSpec, background: BackgroundShock) -> UpstreamSolution:
    """Construct the exact x-independent inflow for the given spec.

    Raises AmplitudeError if the perturbation destroys supersonicity or the
    axial-velocity radicand.
    """
    g = background.gamma
    b0 = background.b0
    r = np.linspace(0.0, 1.0, spec.n_r)

    def lam_of(rr):
        return spec.eps_swirl * rr**2 * (1.0 - rr**2)

    def entropy_of(rr):
        return background.s0m * (1.0 + spec.eps_entropy * np.cos(np.pi * rr))

    entropy = entropy_of(r)
    if np.any(entropy <= 0.0):
        raise AmplitudeError("entropy amplitude too large: S <= 0 somewhere")

    p = _rk4_pressure(r, lam_of, entropy_of, background.p0m, g)
    rho = (p / entropy) ** (1.0 / g)
    lam = lam_of(r)

    # u_theta^2 = Lambda^2 / r^2 = eps^2 r^2 (1-r^2)^2, regular at the axis.
    u_theta = spec.eps_swirl * r * (1.0 - r**2)
    radicand = 2.0 * (b0 - g * p / ((g - 1.0) * rho)) - u_theta**2
    if np.any(radicand <= 0.0):
        raise AmplitudeError("amplitude too large: axial velocity radicand <= 0")
    u_x = np.sqrt(radicand)

    speed2 = u_x**2 + u_theta**2
    c2 = g * p / rho
    margin = np.min(speed2 - c2)
    if margin <= 0.0:
        raise AmplitudeError(f"amplitude too large: flow not supersonic (margin {margin:.3e})")

    sol = UpstreamSolution(
        background=background,
        spec=spec,
        r=r,
        u_x=u_x,
        u_theta=u_theta,
        rho=rho,
        p=p,
        entropy=entropy,
        lam=lam,
        sigma=0.0,
    )
    return replace(sol, sigma=sigma_measure(sol))


def helmholtz_decompose_upstream(sol: UpstreamSolution) -> UpstreamSolution:
    """Split the inflow velocity into a potential slope and a curl part.

    psi solves the two-point boundary value problem

        psi'' + psi'/r - psi/r^2 = d_r u_x,   psi(0) = psi(1) = 0,

    written conservatively in w = r*psi as ((1/r) w')' = d_r u_x and
    discretized with centered flux differences (tridiagonal).  The flux
    (1/r) d_r(r psi) then telescopes against the face-averaged u_x exactly,
    so the potential slope u_x - (1/r) d_r(r psi) is smooth to O(h^2) up to
    both boundaries and the reconstruction identities hold at second order.
    """
    r, u_x = sol.r, sol.u_x
    n = len(r)
    h = sol.h

    # Faces r_{j+1/2}, j = 0..n-2; flux_j := (w_{j+1} - w_j) / (h r_{j+1/2}).
    r_half = 0.5 * (r[:-1] + r[1:])
    inv = 1.0 / (h * r_half)
    # Row j (j = 1..n-2): flux_j - flux_{j-1} = (u_{j+1} - u_{j-1}) / 2.
    ab = np.zeros((3, n - 2))
    ab[0, 1:] = inv[1:-1]                      # coefficient of w_{j+1}
    ab[1, :] = -(inv[1:] + inv[:-1])           # coefficient of w_j
    ab[2, :-1] = inv[1:-1]                     # coefficient of w_{j-1}
    rhs = 0.5 * (u_x[2:] - u_x[:-2])
    w = np.zeros(n)
    w[1:-1] = solve_banded((1, 1), ab, rhs)

    psi = np.zeros(n)
    psi[1:] = w[1:] / r[1:]

    dpsi = np.empty(n)
    dpsi[1:-1] = (psi[2:] - psi[:-2]) / (2.0 * h)
    dpsi[0] = (-3.0 * psi[0] + 4.0 * psi[1] - psi[2]) / (2.0 * h)
    dpsi[-1] = (3.0 * psi[-1] - 4.0 * psi[-2] + psi[-3]) / (2.0 * h)

    # t_x = (1/r) d_r(r psi) from the face fluxes, averaged at interior
    # nodes.  End closures are chosen so u_x - t_x keeps the interior
    # truncation structure -(h^2/4) u_x'' up to both boundaries (a plain
    # extrapolation flips its sign and costs an order in the roundtrip).
    flux = (w[1:] - w[:-1]) * inv
    t_x = np.empty(n)
    t_x[1:-1] = 0.5 * (flux[:-1] + flux[1:])
    t_x[0] = flux[0] + 0.25 * (3.0 * u_x[0] - 4.0 * u_x[1] + u_x[2])
    t_x[-1] = flux[-1] + 0.25 * (3.0 * u_x[-1] - 4.0 * u_x[-2] + u_x[-3])

    return replace(sol, psi=psi, dpsi_dr=dpsi, t_x=t_x, phi_slope=u_x - t_x)


def sigma_measure(sol: UpstreamSolution) -> float:
    """Deviation of the inflow from the uniform background: max norm of the
    field deviations plus the max norm of their first divided differences."""
    bg = sol.background
    h = sol.h
    total = 0.0
    for field, ref in (
        (sol.u_x, bg.u0m),
        (sol.u_theta, 0.0),
        (sol.rho, bg.rho0m),
        (sol.p, bg.p0m),
    ):
        dev = field - ref
        c0 = float(np.max(np.abs(dev)))
        c1 = float(np.max(np.abs(np.diff(dev)))) / h
        total = max(total, c0 + c1)
    return total
