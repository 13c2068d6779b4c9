"""Exact-characteristic transport of entropy and swirl from the shock into
the downstream domain via the mass-flux stream function.

w(y, t) = int_0^t z N_y(y, z) dz is constant along streamlines, so composing
shock data with the inverse of the shock-column table G(r) = w(0, r)
transports (S, Lambda) without integrating characteristic ODEs.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.interpolate import PchipInterpolator

from .errors import DegeneracyError
from .elliptic import curl_part, grad_physical, transform_flux
from .gasdyn import BackgroundShock, density_H
from .geometry import FlattenedGrid, ShockCurve

__all__ = [
    "MassFlux",
    "StreamTrace",
    "mass_flux",
    "stream_function",
    "trace_to_shock",
    "transport_from_shock",
]


@dataclass(frozen=True)
class MassFlux:
    """Flattened mass-flux components on the grid.  n_y_flux stays above
    rho0+ u0+ / 2 (enforced); n_t_flux vanishes on the axis and wall rows."""

    n_y_flux: np.ndarray
    n_t_flux: np.ndarray


@dataclass(frozen=True)
class StreamTrace:
    """Stream function w, the monotone shock-column table G, and the clamp
    tolerance separating quadrature noise from mass-flux imbalance."""

    w: np.ndarray
    g_table: np.ndarray
    r_nodes: np.ndarray
    clamp_tol: float


def mass_flux(
    S: np.ndarray,
    phi: np.ndarray,
    psi: np.ndarray,
    lam: np.ndarray,
    grid: FlattenedGrid,
    shock: ShockCurve,
    background: BackgroundShock,
) -> MassFlux:
    """Assemble the flattened mass flux from the current fields.

    The meridional mass flux is H(S, q) q with q reconstructed from
    (phi, psi, Lambda); the flattening map turns it into
    N_y = M_x + (y-1) f' M_r and N_t = (1-f) M_r.  The axis and wall rows
    of N_t are exactly zero by the boundary conditions.
    """
    t_x, t_r, t_theta = curl_part(psi, lam, grid, shock)
    dphi_x, dphi_r = grad_physical(phi, grid, shock)
    qx = background.u0p + dphi_x + t_x
    qr = dphi_r + t_r
    rho = density_H(S, (qx, qr, t_theta), background.constants())
    n_y, n_t = transform_flux(rho * qx, rho * qr, grid, shock)
    n_t[:, 0] = 0.0
    n_t[:, -1] = 0.0
    floor = background.rho0p * background.u0p / 2.0
    lo = float(np.min(n_y))
    if lo < floor:
        raise DegeneracyError(f"axial mass flux fell to {lo:.4f} < rho0+ u0+/2 = {floor:.4f}")
    return MassFlux(n_y, n_t)


def stream_function(flux: MassFlux, grid: FlattenedGrid) -> StreamTrace:
    """Cumulative trapezoidal w(y, t) per column, with strict monotonicity
    in t verified; G is the shock-column table."""
    z = grid.t[None, :]
    integrand = z * flux.n_y_flux
    increments = 0.5 * grid.h_t * (integrand[:, :-1] + integrand[:, 1:])
    if np.min(increments) <= 0.0:
        raise DegeneracyError("stream function is not strictly increasing in t")
    w = np.zeros_like(flux.n_y_flux)
    w[:, 1:] = np.cumsum(increments, axis=1)
    tol = 5.0 * grid.h_t**2 * float(np.max(np.abs(flux.n_y_flux)))
    return StreamTrace(w=w, g_table=w[0, :].copy(), r_nodes=grid.t.copy(), clamp_tol=tol)


def trace_to_shock(trace: StreamTrace) -> np.ndarray:
    """Invert G through monotone piecewise-cubic interpolation to find the
    shock-foot radius of the streamline through every node.

    Values of w outside the range of G are clamped when within the
    quadrature tolerance and rejected as mass-flux imbalance otherwise.
    """
    g = trace.g_table
    over = float(np.max(trace.w) - g[-1])
    under = float(g[0] - np.min(trace.w))
    if over > trace.clamp_tol or under > trace.clamp_tol:
        raise DegeneracyError(
            f"stream function leaves the shock-column range by {max(over, under):.3e} "
            f"(tolerance {trace.clamp_tol:.3e}): mass-flux imbalance"
        )
    ginv = PchipInterpolator(g, trace.r_nodes)
    return ginv(np.clip(trace.w, g[0], g[-1]))


def transport_from_shock(
    shock_entropy: np.ndarray,
    shock_lam: np.ndarray,
    r_sh: np.ndarray,
    r_nodes: np.ndarray,
):
    """Compose shock data with the streamline foot map: monotone cubic
    interpolants of the nodal shock data evaluated at R_sh."""
    s_interp = PchipInterpolator(r_nodes, shock_entropy)
    lam_interp = PchipInterpolator(r_nodes, shock_lam)
    return s_interp(r_sh), lam_interp(r_sh)
