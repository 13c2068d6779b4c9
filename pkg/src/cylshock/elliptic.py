"""Assembly and solution of the two linear elliptic problems on the
shock-flattened grid: the potential equation in divergence form and the
swirl (azimuthal vector-potential) equation with its 1/r^2 zeroth-order term.

Discretization: vertex-centered finite volumes on the unit (y, t) square
with r-weighted face fluxes.  The coordinate map folds into face
coefficients; the O(f') mixed-derivative fluxes are lagged into the right
hand side so the solved operator stays 5-point symmetric positive definite.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import spsolve

from .errors import DegeneracyError, LinearSolverError, PreconditionError
from .gasdyn import BackgroundShock, GasConstants, GasState, density_H, ks
from .geometry import FlattenedGrid, ShockCurve
from .upstream import UpstreamSolution

__all__ = [
    "LinearizedCoefficients",
    "EllipticProblem",
    "LinearStats",
    "linearized_coefficients",
    "assemble_F",
    "assemble_B",
    "assemble_G",
    "assemble_A",
    "solve_potential",
    "solve_swirl",
    "assemble_system",
    "d_dy",
    "d_dt",
    "grad_physical",
    "curl_part",
    "transform_flux",
    "face_coefficients",
    "cell_weights",
]

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(8)
_GL_NODES = 0.5 * (_GL_NODES + 1.0)  # map to [0, 1]
_GL_WEIGHTS = 0.5 * _GL_WEIGHTS


@dataclass(frozen=True)
class LinearizedCoefficients:
    """Diagonal coefficients of the linearized mass-flux operator at the
    subsonic background: a11 = rho0+(1 - M0+^2), a22 = a33 = rho0+."""

    a11: float
    a22: float
    a33: float


@dataclass
class LinearStats:
    """Linear-solver telemetry for one solve."""

    method: str
    iterations: int
    rel_residual: float
    n_unknowns: int


@dataclass
class EllipticProblem:
    """One elliptic solve: interior data, per-side boundary data, operator tag.

    ``shock_neumann`` prescribes the full conormal (a_ii d_i u) . (-n_f) at
    y = 0.  ``flux`` is a physical (F_x, F_r) node field whose divergence
    sources the potential equation; ``source`` is the scalar source of the
    swirl equation.  ``lag_field`` supplies the previous iterate for the
    lagged mixed-derivative fluxes.
    """

    operator: str  # "potential" | "swirl"
    shock_neumann: np.ndarray
    flux: tuple | None = None
    source: np.ndarray | None = None
    wall: tuple | None = None  # ("neumann"|"dirichlet", values over y)
    exit: tuple | None = None  # ("dirichlet"|"neumann", values over t)
    lag_field: np.ndarray | None = None
    rtol: float = 1e-11
    maxiter: int = 0  # 0: choose from problem size


def linearized_coefficients(
    background: BackgroundShock, consts: GasConstants
) -> LinearizedCoefficients:
    """Differentiate the axial mass flux H(S, q) q1 at the background state."""
    c0p2 = consts.gamma * background.p0p / background.rho0p
    m2 = background.u0p**2 / c0p2
    if m2 >= 1.0:
        raise PreconditionError(f"background not subsonic: M0+^2 = {m2:.4f}")
    a11 = background.rho0p * (1.0 - m2)
    if a11 <= 0.0:
        raise PreconditionError("lost ellipticity: a11 <= 0")
    return LinearizedCoefficients(a11=a11, a22=background.rho0p, a33=background.rho0p)


# ---------------------------------------------------------------------------
# grid calculus on the flattened rectangle


def d_dy(field: np.ndarray, grid: FlattenedGrid) -> np.ndarray:
    """d/dy, centered interior, second-order one-sided at y = 0, 1."""
    h = grid.h_y
    out = np.empty_like(field)
    out[1:-1] = (field[2:] - field[:-2]) / (2.0 * h)
    out[0] = (-3.0 * field[0] + 4.0 * field[1] - field[2]) / (2.0 * h)
    out[-1] = (3.0 * field[-1] - 4.0 * field[-2] + field[-3]) / (2.0 * h)
    return out


def d_dt(field: np.ndarray, grid: FlattenedGrid) -> np.ndarray:
    """d/dt, centered interior, second-order one-sided at t = 0, 1."""
    h = grid.h_t
    out = np.empty_like(field)
    out[:, 1:-1] = (field[:, 2:] - field[:, :-2]) / (2.0 * h)
    out[:, 0] = (-3.0 * field[:, 0] + 4.0 * field[:, 1] - field[:, 2]) / (2.0 * h)
    out[:, -1] = (3.0 * field[:, -1] - 4.0 * field[:, -2] + field[:, -3]) / (2.0 * h)
    return out


def _metric(grid: FlattenedGrid, shock: ShockCurve):
    """(1 - f(t)) and beta(y, t) = (y - 1) f'(t) / (1 - f(t)) on the grid."""
    f = shock(grid.t)
    fp = shock.fprime(grid.t)
    one_m_f = 1.0 - f
    beta = (grid.y[:, None] - 1.0) * fp[None, :] / one_m_f[None, :]
    return one_m_f, fp, beta


def grad_physical(field: np.ndarray, grid: FlattenedGrid, shock: ShockCurve):
    """Physical (d_x, d_r) of a flattened field via the chain rule."""
    one_m_f, _, beta = _metric(grid, shock)
    fy = d_dy(field, grid)
    ft = d_dt(field, grid)
    dx = fy / one_m_f[None, :]
    dr = ft + beta * fy
    return dx, dr


def curl_part(psi: np.ndarray, lam: np.ndarray, grid: FlattenedGrid, shock: ShockCurve):
    """Rotational velocity components (t_x, t_r, t_theta) from psi and Lambda:
    t_x = (1/r) d_r(r psi), t_r = -d_x psi, t_theta = Lambda / r, with axis
    values by their r -> 0 limits (psi and Lambda vanish on the axis)."""
    dpsi_dx, dpsi_dr = grad_physical(psi, grid, shock)
    t = grid.t
    t_x = np.empty_like(psi)
    t_x[:, 1:] = dpsi_dr[:, 1:] + psi[:, 1:] / t[None, 1:]
    t_x[:, 0] = 2.0 * dpsi_dr[:, 0]
    t_r = -dpsi_dx
    dlam_dx, dlam_dr = grad_physical(lam, grid, shock)
    t_theta = np.empty_like(lam)
    t_theta[:, 1:] = lam[:, 1:] / t[None, 1:]
    t_theta[:, 0] = dlam_dr[:, 0]
    return t_x, t_r, t_theta


# ---------------------------------------------------------------------------
# right-hand-side assemblers


def assemble_F(S_dev, dphi, t_fields, background: BackgroundShock, coeffs: LinearizedCoefficients):
    """Nonlinear remainder flux of the linearized mass-flux equation.

    Arguments are node fields: the entropy deviation xi = S - S0+, the
    potential-deviation gradient s = (d_x phi, d_r phi), and the curl part
    v = (t_x, t_r, t_theta).  The two parameter integrals over the segment
    V0 + tau Q, tau in [0, 1], use fixed 8-point Gauss-Legendre.  Returns
    physical (F_x, F_r).
    """
    g = background.gamma
    consts = background.constants()
    xi = np.asarray(S_dev, dtype=float)
    s1, s2 = dphi
    v1, v2, v3 = t_fields
    s3 = np.zeros_like(s1)

    a_diag = (coeffs.a11, coeffs.a22)
    # accumulated Gauss-Legendre sums of the two directional-derivative
    # integrands, per flux component
    acc = [np.zeros_like(xi), np.zeros_like(xi)]
    for tau, wgl in zip(_GL_NODES, _GL_WEIGHTS):
        s_arg = (background.u0p + tau * s1, tau * s2, tau * s3)
        q = (s_arg[0] + tau * v1, s_arg[1] + tau * v2, s_arg[2] + tau * v3)
        s_tau = background.s0p + tau * xi
        h_tau = density_H(s_tau, q, consts)
        c2 = (g - 1.0) * (background.b0 - 0.5 * (q[0] ** 2 + q[1] ** 2 + q[2] ** 2))
        dh_dxi = -h_tau / ((g - 1.0) * s_tau)
        dh_dq = tuple(-qk * h_tau / c2 for qk in q)
        # D_{xi,v} A_i . (xi, v) = s_i * (dH/dxi xi + sum_k dH/dq_k v_k)
        dir_xi_v = dh_dxi * xi + dh_dq[0] * v1 + dh_dq[1] * v2 + dh_dq[2] * v3
        # s . D_s A_i = H s_i + s_arg_i * sum_k dH/dq_k s_k
        dir_s = dh_dq[0] * s1 + dh_dq[1] * s2
        for i in range(2):
            acc[i] += wgl * (s_arg[i] * dir_xi_v + h_tau * (s1, s2)[i] + s_arg[i] * dir_s)

    q_full = (background.u0p + s1 + v1, s2 + v2, s3 + v3)
    h_full = density_H(background.s0p + xi, q_full, consts)
    fx = -h_full * v1 - acc[0] + coeffs.a11 * s1
    fr = -h_full * v2 - acc[1] + coeffs.a22 * s2
    return fx, fr


def assemble_B(
    t_shock,
    fprime: np.ndarray,
    dphi_prev_shock,
    upstream: UpstreamSolution,
    coeffs: LinearizedCoefficients,
    background: BackgroundShock,
) -> np.ndarray:
    """Shock Neumann data for the potential:

    B = a11 (-K_s(f')/(u-.n) + t.n + u0+ n_x) + (a11 - a22) d_r phi* n_r
    """
    g = background.gamma
    t_x, t_r = t_shock[0], t_shock[1]
    dphi_r = dphi_prev_shock[1]
    n_t = len(fprime)
    root = np.sqrt(1.0 + fprime**2)
    n_x, n_r = 1.0 / root, -fprime / root

    out = np.empty(n_t)
    for j in range(n_t):
        state = GasState(upstream.u_x[j], 0.0, upstream.u_theta[j], upstream.rho[j], upstream.p[j])
        n = (n_x[j], n_r[j])
        un = state.u_x * n[0] + state.u_r * n[1]
        k = ks(state, n, g)
        t_dot_n = t_x[j] * n[0] + t_r[j] * n[1]
        out[j] = coeffs.a11 * (-k / un + t_dot_n + background.u0p * n[0])
        out[j] += (coeffs.a11 - coeffs.a22) * dphi_r[j] * n[1]
    return out


def assemble_G(
    S,
    lam,
    dS_dr,
    dlam_dr,
    t_fields,
    dphi,
    grid: FlattenedGrid,
    background: BackgroundShock,
) -> np.ndarray:
    """Swirl source G = [H^(gamma-1)/(gamma-1) dS/dr + (Lambda/r^2) dLambda/dr] / u_x.

    The axis-singular swirl term is evaluated through V = Lambda/r as
    V^2/r + V dV/dr, with V/r -> dV/dr in the axis row.
    """
    g = background.gamma
    consts = background.constants()
    t_x, t_r, t_theta = t_fields
    u_x = background.u0p + dphi[0] + t_x
    floor = background.u0p / 2.0
    if np.min(u_x) <= floor:
        raise DegeneracyError(f"axial velocity fell to {np.min(u_x):.4f} <= u0+/2")
    q = (u_x, dphi[1] + t_r, t_theta)
    h = density_H(S, q, consts)

    t = grid.t
    v = np.empty_like(lam)
    v[:, 1:] = lam[:, 1:] / t[None, 1:]
    v[:, 0] = dlam_dr[:, 0]
    dv_dr = np.empty_like(lam)
    # dV/dr = (dLambda/dr - V)/r away from the axis; one-sided at the axis
    dv_dr[:, 1:] = (dlam_dr[:, 1:] - v[:, 1:]) / t[None, 1:]
    dv_dr[:, 0] = (v[:, 1] - v[:, 0]) / grid.h_t
    v_over_r = np.empty_like(lam)
    v_over_r[:, 1:] = v[:, 1:] / t[None, 1:]
    v_over_r[:, 0] = dv_dr[:, 0]
    swirl_term = v * v_over_r + v * dv_dr

    return (h ** (g - 1.0) / (g - 1.0) * dS_dr + swirl_term) / u_x


def assemble_A(psi_prev_shock, upstream_psi, fprime, r) -> np.ndarray:
    """Shock Neumann data for the swirl potential:

    A = [(-psi/r + psi-/r + d_r psi-) f' - d_x psi-] / sqrt(1 + f'^2)

    with psi/r replaced by d_r psi at the axis.  ``upstream_psi`` is the
    triple (psi-, d_r psi-, d_x psi-) sampled on the shock.
    """
    psi_m, dpsi_m_dr, dpsi_m_dx = upstream_psi
    r = np.asarray(r, dtype=float)
    h = r[1] - r[0]
    term = np.empty_like(r)
    term[1:] = (-psi_prev_shock[1:] + psi_m[1:]) / r[1:] + dpsi_m_dr[1:]
    # axis limit: psi/r -> d_r psi for both fields
    dpsi_star_axis = (-3.0 * psi_prev_shock[0] + 4.0 * psi_prev_shock[1] - psi_prev_shock[2]) / (
        2.0 * h
    )
    term[0] = -dpsi_star_axis + 2.0 * dpsi_m_dr[0]
    return (term * fprime - dpsi_m_dx) / np.sqrt(1.0 + fprime**2)


# ---------------------------------------------------------------------------
# finite-volume engine


def transform_flux(w_x, w_r, grid: FlattenedGrid, shock: ShockCurve):
    """Physical meridional flux (W_x, W_r) to flattened components:
    W_y = W_x + (y-1) f'(t) W_r, W_t = (1-f(t)) W_r; the t-weighted pair
    satisfies d_y(t W_y) + d_t(t W_t) = 0 whenever div(W) = 0."""
    f = shock(grid.t)
    fp = shock.fprime(grid.t)
    w_y = w_x + (grid.y[:, None] - 1.0) * fp[None, :] * w_r
    w_t = (1.0 - f)[None, :] * w_r
    return w_y, w_t


def face_coefficients(grid: FlattenedGrid, shock: ShockCurve, a11: float, a22: float):
    """Implicit FV face conductances: (c_y, c_t) for the y- and t-faces."""
    tw, yw, _ = _cell_weights(grid)
    f_nodes = shock(grid.t)
    fp_nodes = shock.fprime(grid.t)
    t_half = 0.5 * (grid.t[:-1] + grid.t[1:])
    f_half = shock(t_half)
    y_half = 0.5 * (grid.y[:-1] + grid.y[1:])
    one_m_f = 1.0 - f_nodes
    beta_yface = (y_half[:, None] - 1.0) * fp_nodes[None, :] / one_m_f[None, :]
    k11 = a11 / one_m_f[None, :] + a22 * beta_yface**2 * one_m_f[None, :]
    c_y = tw[None, :] * k11 / grid.h_y
    k22 = a22 * (1.0 - f_half)
    c_t = t_half[None, :] * yw[:, None] * k22[None, :] / grid.h_t
    return c_y, c_t


def cell_weights(grid: FlattenedGrid):
    """Public access to (tw, yw): the r-weight of each cell row's t-extent
    and the y-extent of each cell column."""
    tw, yw, _ = _cell_weights(grid)
    return tw, yw


def _cell_weights(grid: FlattenedGrid):
    """tw[j] = integral of t over row j's cell extent; yw[i] = cell y-extent;
    lw[j] = midpoint weight of the 1/r^2 term.  Near the axis psi varies as
    fast as 1/t, so the zeroth term integrates the smooth product psi/t by
    midpoint (an exact-log weight against nodal psi loses an order there).
    The axis row never carries a 1/r^2 term (it is Dirichlet for the swirl)."""
    hy, ht = grid.h_y, grid.h_t
    t = grid.t
    tw = t * ht
    tw[0] = ht**2 / 8.0
    tw[-1] = 0.5 * ht * (1.0 - 0.25 * ht)
    yw = np.full(grid.n_y, hy)
    yw[0] = yw[-1] = 0.5 * hy
    lw = np.zeros(grid.n_t)
    lw[1:-1] = ht / t[1:-1]
    lw[-1] = 0.5 * ht / t[-1]
    return tw, yw, lw


def _face_values(node_values: np.ndarray, axis: int) -> np.ndarray:
    if axis == 0:
        return 0.5 * (node_values[:-1, :] + node_values[1:, :])
    return 0.5 * (node_values[:, :-1] + node_values[:, 1:])


def _assemble_fv(
    problem: EllipticProblem,
    grid: FlattenedGrid,
    shock: ShockCurve,
    a11: float,
    a22: float,
    zeroth: bool,
    dirichlet_mask: np.ndarray,
    dirichlet_values: np.ndarray,
):
    """Assemble one 5-point FV system.  Returns (matrix, rhs, unknown mask)."""
    n_y, n_t = grid.n_y, grid.n_t
    tw, yw, lw = _cell_weights(grid)

    f_nodes = shock(grid.t)
    fp_nodes = shock.fprime(grid.t)
    t_half = 0.5 * (grid.t[:-1] + grid.t[1:])
    fp_half = shock.fprime(t_half)
    y_half = 0.5 * (grid.y[:-1] + grid.y[1:])
    one_m_f = 1.0 - f_nodes

    c_y, c_t = face_coefficients(grid, shock, a11, a22)

    # explicit (known) face fluxes: transformed source flux plus lagged
    # mixed-derivative fluxes, all integrated over the face
    flux_y = np.zeros((n_y - 1, n_t))
    flux_t = np.zeros((n_y, n_t - 1))
    bnd_shock_flux = np.zeros(n_t)  # outward at y=0, from the source flux
    bnd_wall_flux = np.zeros(n_y)  # outward at t=1
    if problem.flux is not None:
        fhat_y, fhat_t = transform_flux(problem.flux[0], problem.flux[1], grid, shock)
        flux_y += tw[None, :] * _face_values(fhat_y, axis=0)
        flux_t += t_half[None, :] * yw[:, None] * _face_values(fhat_t, axis=1)
        bnd_shock_flux += -fhat_y[0, :] * tw
        bnd_wall_flux += fhat_t[:, -1] * yw
    if problem.lag_field is not None:
        # lagged fluxes belong to the operator side: they enter the right
        # hand side with the opposite sign to the source flux
        lag = problem.lag_field
        dlag_dt = d_dt(lag, grid)
        dlag_dy = d_dy(lag, grid)
        k12 = a22 * (y_half[:, None] - 1.0) * fp_nodes[None, :]
        flux_y -= tw[None, :] * k12 * _face_values(dlag_dt, axis=0)
        k21 = a22 * (grid.y[:, None] - 1.0) * fp_half[None, :]
        flux_t -= t_half[None, :] * yw[:, None] * k21 * _face_values(dlag_dy, axis=1)

    # right-hand side per cell
    b_cell = np.zeros((n_y, n_t))
    # divergence of the explicit fluxes
    b_cell[:-1, :] -= flux_y
    b_cell[1:, :] += flux_y
    b_cell[:, :-1] -= flux_t
    b_cell[:, 1:] += flux_t
    b_cell[0, :] -= bnd_shock_flux
    b_cell[:, -1] -= bnd_wall_flux
    # shock Neumann data: outward conormal flux with the surface element
    b_cell[0, :] += problem.shock_neumann * np.sqrt(1.0 + fp_nodes**2) * tw
    # wall data
    if problem.wall is not None and problem.wall[0] == "neumann":
        b_cell[:, -1] += (1.0 - f_nodes[-1]) * np.asarray(problem.wall[1]) * yw
    # exit Neumann data (conormal d_x at y=1)
    if problem.exit is not None and problem.exit[0] == "neumann":
        b_cell[-1, :] += np.asarray(problem.exit[1]) * tw
    # scalar source
    if problem.source is not None:
        b_cell += problem.source * one_m_f[None, :] * tw[None, :] * yw[:, None]

    # assemble the reduced SPD system
    unknown = ~dirichlet_mask
    idx = -np.ones((n_y, n_t), dtype=np.int64)
    idx[unknown] = np.arange(int(unknown.sum()))
    n_unk = int(unknown.sum())
    diag = np.zeros((n_y, n_t))
    if zeroth:
        diag += one_m_f[None, :] * lw[None, :] * yw[:, None]

    rows, cols, vals = [], [], []
    b = b_cell.copy()

    def add_faces(c_face, p_idx, q_idx):
        p_unk = idx[p_idx] >= 0
        q_unk = idx[q_idx] >= 0
        both = p_unk & q_unk
        if np.any(both):
            rows.append(idx[p_idx][both])
            cols.append(idx[q_idx][both])
            vals.append(-c_face[both])
            rows.append(idx[q_idx][both])
            cols.append(idx[p_idx][both])
            vals.append(-c_face[both])
        np.add.at(diag, tuple(a[p_unk] for a in p_idx), c_face[p_unk])
        np.add.at(diag, tuple(a[q_unk] for a in q_idx), c_face[q_unk])
        pd = p_unk & ~q_unk
        if np.any(pd):
            np.add.at(b, tuple(a[pd] for a in p_idx), c_face[pd] * dirichlet_values[tuple(a[pd] for a in q_idx)])
        qd = q_unk & ~p_unk
        if np.any(qd):
            np.add.at(b, tuple(a[qd] for a in q_idx), c_face[qd] * dirichlet_values[tuple(a[qd] for a in p_idx)])

    ii, jj = np.meshgrid(np.arange(n_y - 1), np.arange(n_t), indexing="ij")
    add_faces(c_y, (ii, jj), (ii + 1, jj))
    ii, jj = np.meshgrid(np.arange(n_y), np.arange(n_t - 1), indexing="ij")
    add_faces(c_t, (ii, jj), (ii, jj + 1))

    rows.append(idx[unknown])
    cols.append(idx[unknown])
    vals.append(diag[unknown])
    mat = sp.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(n_unk, n_unk),
    ).tocsr()
    return mat, b[unknown], unknown


def _solve_fv(
    problem: EllipticProblem,
    grid: FlattenedGrid,
    shock: ShockCurve,
    a11: float,
    a22: float,
    zeroth: bool,
    dirichlet_mask: np.ndarray,
    dirichlet_values: np.ndarray,
    x0: np.ndarray | None = None,
):
    """Assemble and solve one 5-point FV system.  Returns (field, stats)."""
    mat, rhs, unknown = _assemble_fv(
        problem, grid, shock, a11, a22, zeroth, dirichlet_mask, dirichlet_values
    )
    guess = None
    if x0 is not None:
        guess = x0[unknown]
    sol_vec, stats = _pcg_solve(mat, rhs, guess, problem.rtol, problem.maxiter)

    out = dirichlet_values.astype(float).copy()
    out[unknown] = sol_vec
    return out, stats


def _boundary_setup(problem: EllipticProblem, grid: FlattenedGrid):
    """Dirichlet mask and values for the problem's operator tag."""
    n_y, n_t = grid.n_y, grid.n_t
    mask = np.zeros((n_y, n_t), dtype=bool)
    values = np.zeros((n_y, n_t))
    if problem.operator == "potential":
        mask[-1, :] = True
        if problem.exit is not None:
            kind, data = problem.exit
            if kind != "dirichlet":
                raise ValueError("potential solve requires a Dirichlet exit")
            values[-1, :] = data
    elif problem.operator == "swirl":
        mask[:, 0] = True
        mask[:, -1] = True
        if problem.wall is not None and problem.wall[0] == "dirichlet":
            values[:, -1] = problem.wall[1]
    else:
        raise ValueError(f"unknown operator tag {problem.operator!r}")
    return mask, values


def assemble_system(
    problem: EllipticProblem,
    grid: FlattenedGrid,
    shock: ShockCurve,
    coeffs: LinearizedCoefficients | None = None,
):
    """Assemble the reduced linear system of a problem without solving it
    (matrix-market debug dumps, external verification)."""
    if problem.operator == "potential":
        if coeffs is None:
            raise ValueError("potential assembly needs the linearized coefficients")
        a11, a22, zeroth = coeffs.a11, coeffs.a22, False
    else:
        a11, a22, zeroth = 1.0, 1.0, True
    mask, values = _boundary_setup(problem, grid)
    mat, rhs, _ = _assemble_fv(problem, grid, shock, a11, a22, zeroth, mask, values)
    return mat, rhs


def _pcg_solve(mat, rhs, x0, rtol, maxiter):
    """Jacobi-preconditioned conjugate gradients with a direct-solve fallback."""
    n = mat.shape[0]
    bnorm = float(np.linalg.norm(rhs))
    if bnorm == 0.0:
        return np.zeros(n), LinearStats("trivial", 0, 0.0, n)
    if maxiter <= 0:
        maxiter = max(2000, 12 * int(np.sqrt(n) + 1) * 14)
    inv_diag = 1.0 / mat.diagonal()
    x = np.zeros(n) if x0 is None else x0.astype(float).copy()
    r = rhs - mat @ x
    z = inv_diag * r
    p = z.copy()
    rz = float(r @ z)
    it = 0
    while it < maxiter:
        rnorm = float(np.linalg.norm(r))
        if rnorm <= rtol * bnorm:
            return x, LinearStats("pcg", it, rnorm / bnorm, n)
        ap = mat @ p
        alpha = rz / float(p @ ap)
        x += alpha * p
        r -= alpha * ap
        z = inv_diag * r
        rz_new = float(r @ z)
        p = z + (rz_new / rz) * p
        rz = rz_new
        it += 1
    # fallback: direct sparse solve, residual verified
    x = spsolve(mat.tocsc(), rhs)
    rnorm = float(np.linalg.norm(rhs - mat @ x))
    if rnorm > rtol * bnorm * 100.0:
        raise LinearSolverError(
            f"CG stalled after {maxiter} iterations and the direct fallback "
            f"left relative residual {rnorm / bnorm:.3e}"
        )
    return x, LinearStats("direct", maxiter, rnorm / bnorm, n)


def solve_potential(
    problem: EllipticProblem,
    grid: FlattenedGrid,
    shock: ShockCurve,
    coeffs: LinearizedCoefficients,
    x0: np.ndarray | None = None,
):
    """Potential deviation: divergence-form operator with coefficients
    (a11, a22), symmetry at the axis, Neumann wall, Dirichlet exit that pins
    the constant, and the shock conormal data."""
    mask, values = _boundary_setup(problem, grid)
    return _solve_fv(
        problem, grid, shock, coeffs.a11, coeffs.a22, False, mask, values, x0=x0
    )


def solve_swirl(
    problem: EllipticProblem,
    grid: FlattenedGrid,
    shock: ShockCurve,
    x0: np.ndarray | None = None,
):
    """Swirl potential: axisymmetric Laplacian with the 1/r^2 zeroth-order
    term, Dirichlet zero at axis and wall, natural (Neumann) exit, and the
    shock conormal data."""
    mask, values = _boundary_setup(problem, grid)
    return _solve_fv(problem, grid, shock, 1.0, 1.0, True, mask, values, x0=x0)
