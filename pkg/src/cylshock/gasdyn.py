"""Ideal-gas thermodynamics, the Bernoulli density closure, and normal/oblique
shock jump algebra for a polytropic gas.

All quantities are nondimensional.  Meridional vectors are (x, r) pairs; the
azimuthal component is carried separately.  Shock normals follow the
orientation n = (1, -f') / sqrt(1 + f'^2), pointing downstream.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidStateError, PreconditionError, VacuumError

__all__ = [
    "GasConstants",
    "GasState",
    "BackgroundShock",
    "REF",
    "sound_speed",
    "bernoulli",
    "density_H",
    "background_downstream",
    "ks",
    "s_sh",
    "post_shock_state",
    "rh_residual",
]


@dataclass(frozen=True)
class GasConstants:
    """Adiabatic exponent and the global Bernoulli constant B0."""

    gamma: float
    b0: float

    def __post_init__(self):
        if not self.gamma > 1.0:
            raise InvalidStateError(f"gamma must exceed 1, got {self.gamma}")
        if not self.b0 > 0.0:
            raise InvalidStateError(f"b0 must be positive, got {self.b0}")


@dataclass(frozen=True)
class GasState:
    """Primitive flow state (u_x, u_r, u_theta, rho, p) at a point."""

    u_x: float
    u_r: float
    u_theta: float
    rho: float
    p: float

    def speed2(self) -> float:
        return self.u_x**2 + self.u_r**2 + self.u_theta**2

    def velocity(self) -> np.ndarray:
        return np.array([self.u_x, self.u_r, self.u_theta])


@dataclass(frozen=True)
class BackgroundShock:
    """The planar x=0 reference shock: constant states, entropies, and the
    potential slopes u0 on each side."""

    gamma: float
    u0m: float
    rho0m: float
    p0m: float
    u0p: float
    rho0p: float
    p0p: float
    s0m: float
    s0p: float
    b0: float

    def constants(self) -> GasConstants:
        return GasConstants(self.gamma, self.b0)

    def upstream_state(self) -> GasState:
        return GasState(self.u0m, 0.0, 0.0, self.rho0m, self.p0m)

    def downstream_state(self) -> GasState:
        return GasState(self.u0p, 0.0, 0.0, self.rho0p, self.p0p)


def sound_speed(state: GasState, gamma: float) -> float:
    """c = sqrt(gamma * p / rho)."""
    if state.rho <= 0.0 or state.p <= 0.0:
        raise InvalidStateError(f"need rho > 0 and p > 0, got rho={state.rho}, p={state.p}")
    return math.sqrt(gamma * state.p / state.rho)


def bernoulli(state: GasState, gamma: float) -> float:
    """B = |u|^2/2 + gamma*p / ((gamma-1)*rho)."""
    if state.rho <= 0.0:
        raise InvalidStateError(f"need rho > 0, got rho={state.rho}")
    return 0.5 * state.speed2() + gamma * state.p / ((gamma - 1.0) * state.rho)


def density_H(entropy, q, consts: GasConstants):
    """Density from entropy and velocity under the Bernoulli constraint:

        H(S, q) = [ (gamma-1)/(gamma*S) * (B0 - |q|^2/2) ]^(1/(gamma-1))

    Accepts scalars or broadcastable arrays for ``entropy`` and the three
    components of ``q``.  Raises VacuumError when |q|^2 >= 2*B0 anywhere:
    the driver treats that as iteration blow-up, never clamps.
    """
    g = consts.gamma
    qx, qr, qt = q
    s = np.asarray(entropy, dtype=float)
    if np.any(s <= 0.0):
        raise InvalidStateError("entropy must be positive")
    head = consts.b0 - 0.5 * (np.asarray(qx) ** 2 + np.asarray(qr) ** 2 + np.asarray(qt) ** 2)
    if np.any(head <= 0.0):
        raise VacuumError(
            f"|q|^2 >= 2*B0 (min head {float(np.min(head)):.3e}): no density exists"
        )
    rho = ((g - 1.0) / (g * s) * head) ** (1.0 / (g - 1.0))
    if np.ndim(entropy) == 0 and all(np.ndim(c) == 0 for c in q):
        return float(rho)
    return rho


def background_downstream(u0m: float, rho0m: float, p0m: float, gamma: float) -> BackgroundShock:
    """Subsonic state behind a planar normal shock with the given supersonic
    upstream, and both sides' entropies and Bernoulli constant."""
    if u0m <= 0.0 or rho0m <= 0.0 or p0m <= 0.0:
        raise InvalidStateError("upstream state must be positive")
    c0m = math.sqrt(gamma * p0m / rho0m)
    if u0m <= c0m:
        raise PreconditionError(f"upstream must be supersonic: u={u0m} <= c={c0m}")
    b0 = 0.5 * u0m**2 + gamma * p0m / ((gamma - 1.0) * rho0m)
    u0p = 2.0 * (gamma - 1.0) / ((gamma + 1.0) * u0m) * b0
    rho0p = rho0m * u0m / u0p
    p0p = rho0m * u0m**2 + p0m - rho0p * u0p**2
    return BackgroundShock(
        gamma=gamma,
        u0m=u0m,
        rho0m=rho0m,
        p0m=p0m,
        u0p=u0p,
        rho0p=rho0p,
        p0p=p0p,
        s0m=p0m / rho0m**gamma,
        s0p=p0p / rho0p**gamma,
        b0=b0,
    )


#: Canonical test fixture: upstream Mach exactly 2, exact rational jump values.
REF = background_downstream(2.0, 1.0, 1.0 / 1.4, 1.4)


def _normal_tangent(normal) -> tuple[np.ndarray, np.ndarray]:
    n = np.asarray(normal, dtype=float)
    n = n / math.hypot(n[0], n[1])
    tau = np.array([-n[1], n[0]])
    return n, tau


def ks(upstream_state: GasState, normal, gamma: float) -> float:
    """Energy-flux scalar of the shock conditions:

        K_s = 2(gamma-1)/(gamma+1) * ( |u-.n|^2/2 + gamma*p-/((gamma-1)*rho-) )

    Equals (u-.n)(u+.n) across the shock (Prandtl relation).
    """
    n, _ = _normal_tangent(normal)
    un = upstream_state.u_x * n[0] + upstream_state.u_r * n[1]
    if un <= 0.0:
        raise PreconditionError(f"need u-.n > 0, got {un}")
    return (
        2.0
        * (gamma - 1.0)
        / (gamma + 1.0)
        * (0.5 * un**2 + gamma * upstream_state.p / ((gamma - 1.0) * upstream_state.rho))
    )


def s_sh(upstream_state: GasState, normal, gamma: float) -> float:
    """Post-shock entropy from the upstream trace and shock tilt:

        S_sh = (rho-(u-.n)^2 + p- - rho-*K_s) * (rho-(u-.n)^2 / K_s)^(-gamma)
    """
    n, _ = _normal_tangent(normal)
    un = upstream_state.u_x * n[0] + upstream_state.u_r * n[1]
    k = ks(upstream_state, normal, gamma)
    if k > un**2:
        # K_s = (u.n)^2 is the sonic limit (vanishing shock) and stays valid.
        raise PreconditionError(
            f"normal component subsonic (K_s={k:.6g} > (u.n)^2={un**2:.6g})"
        )
    rho, p = upstream_state.rho, upstream_state.p
    return (rho * un**2 + p - rho * k) * (rho * un**2 / k) ** (-gamma)


def post_shock_state(upstream_state: GasState, normal, gamma: float) -> GasState:
    """Downstream state satisfying all Rankine-Hugoniot conditions:
    normal velocity K_s/(u-.n), continuous tangential and azimuthal velocity,
    density rho-(u-.n)^2/K_s, pressure S_sh * rho^gamma."""
    n, tau = _normal_tangent(normal)
    un = upstream_state.u_x * n[0] + upstream_state.u_r * n[1]
    ut = upstream_state.u_x * tau[0] + upstream_state.u_r * tau[1]
    k = ks(upstream_state, normal, gamma)
    entropy = s_sh(upstream_state, normal, gamma)
    un_post = k / un
    rho_post = upstream_state.rho * un**2 / k
    p_post = entropy * rho_post**gamma
    return GasState(
        u_x=un_post * n[0] + ut * tau[0],
        u_r=un_post * n[1] + ut * tau[1],
        u_theta=upstream_state.u_theta,
        rho=rho_post,
        p=p_post,
    )


def rh_residual(left: GasState, right: GasState, normal, gamma: float) -> np.ndarray:
    """Jumps of (rho u.n, rho (u.n)^2 + p, rho u.n B, u.tau, u_theta) across
    the surface with the given normal; all-zero iff Rankine-Hugoniot holds."""
    n, tau = _normal_tangent(normal)

    def fluxes(s: GasState):
        un = s.u_x * n[0] + s.u_r * n[1]
        ut = s.u_x * tau[0] + s.u_r * tau[1]
        return np.array(
            [
                s.rho * un,
                s.rho * un**2 + s.p,
                s.rho * un * bernoulli(s, gamma),
                ut,
                s.u_theta,
            ]
        )

    return fluxes(left) - fluxes(right)
