"""Nested fixed-point driver: potential/shock inner loop inside the
entropy-swirl transport loop inside the swirl-potential outer loop, plus
primitive-variable reconstruction and the diagnostic suite.

The iteration starts at the uniform subsonic background, which is an exact
discrete fixed point, and under-relaxes the shock update.  Divergence is
reported (sweep cap, shock escape, vacuum, mass-flux floor), never clamped.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field as dc_field

import numpy as np

from .elliptic import (
    EllipticProblem,
    assemble_A,
    assemble_B,
    assemble_F,
    assemble_G,
    curl_part,
    d_dt,
    d_dy,
    grad_physical,
    linearized_coefficients,
    solve_potential,
    solve_swirl,
)
from .errors import CylShockError, DivergenceError, InvalidStateError
from .gasdyn import REF, GasState, density_H, rh_residual, s_sh
from .geometry import FlattenedGrid, ShockCurve, resample_field, update_shock
from .transport import mass_flux, stream_function, trace_to_shock, transport_from_shock
from .upstream import (
    InflowSpec,
    UpstreamSolution,
    build_parallel_swirl_inflow,
    helmholtz_decompose_upstream,
)

__all__ = [
    "SolverConfig",
    "FlowFields",
    "IterationReport",
    "Solution",
    "solve_transonic_shock",
    "reconstruct_primitive",
    "diagnostics",
    "sigma_scaling_study",
    "build_potential_problem",
    "build_swirl_problem",
]

MODES = ("nested", "flattened-picard")


@dataclass(frozen=True)
class SolverConfig:
    """Grid sizes, per-level tolerances (relative change in max norm),
    sweep caps, relaxation factors, and the nesting mode."""

    n_y: int = 129
    n_t: int = 65
    tol_phi: float = 1e-9
    tol_f: float = 1e-9
    tol_sl: float = 1e-9
    tol_psi: float = 1e-9
    max_sweeps: int = 200
    relax_f: float = 0.7
    relax_field: float = 1.0
    mode: str = "nested"
    linear_rtol: float = 1e-11
    linear_maxiter: int = 0
    threads: int = 1

    def __post_init__(self):
        if self.n_y < 9 or self.n_t < 9:
            raise InvalidStateError("grid sizes must be at least 9")
        if self.threads < 1:
            raise InvalidStateError("threads must be at least 1")
        for name in ("tol_phi", "tol_f", "tol_sl", "tol_psi"):
            if getattr(self, name) <= 0.0:
                raise InvalidStateError(f"{name} must be positive")
        if self.mode not in MODES:
            raise InvalidStateError(f"mode must be one of {MODES}")
        if not 0.0 < self.relax_f <= 1.0 or not 0.0 < self.relax_field <= 1.0:
            raise InvalidStateError("relaxation factors must lie in (0, 1]")
        if self.max_sweeps < 1:
            raise InvalidStateError("max_sweeps must be at least 1")


@dataclass
class FlowFields:
    """Discrete unknowns on the shock-flattened grid: potential deviation,
    swirl potential, entropy, angular momentum density."""

    phi: np.ndarray
    psi: np.ndarray
    entropy: np.ndarray
    lam: np.ndarray


@dataclass
class IterationReport:
    """Per-sweep numeric history plus end-of-run diagnostics.  Wall-clock
    data lives in ``timings`` only, so the numeric content is reproducible
    bit for bit between identical runs."""

    sweeps: list = dc_field(default_factory=list)
    converged: bool = False
    outer_sweeps: int = 0
    failure: str | None = None
    diagnostics: dict = dc_field(default_factory=dict)
    inner_contraction: dict = dc_field(default_factory=dict)
    timings: dict = dc_field(default_factory=dict)

    def numeric_content(self) -> dict:
        return {
            "sweeps": self.sweeps,
            "converged": self.converged,
            "outer_sweeps": self.outer_sweeps,
            "failure": self.failure,
            "diagnostics": self.diagnostics,
            "inner_contraction": self.inner_contraction,
        }


@dataclass
class Solution:
    """Converged state: shock curve, flattened unknowns, reconstructed
    primitive fields, and the iteration report."""

    grid: FlattenedGrid
    shock: ShockCurve
    fields: FlowFields
    primitive: dict
    report: IterationReport
    upstream: UpstreamSolution


def _rel_change(new: np.ndarray, old: np.ndarray) -> float:
    return float(np.max(np.abs(new - old)) / (1.0 + np.max(np.abs(new))))


def build_potential_problem(
    fields: FlowFields,
    grid: FlattenedGrid,
    shock: ShockCurve,
    upstream: UpstreamSolution,
    coeffs,
    rtol: float = 1e-11,
    maxiter: int = 0,
) -> EllipticProblem:
    """The linearized potential problem at the current iterate: nonlinear
    remainder flux in the interior, shock mass-flux data, lagged mixed terms."""
    bg = upstream.background
    t_fields = curl_part(fields.psi, fields.lam, grid, shock)
    dphi = grad_physical(fields.phi, grid, shock)
    fx, fr = assemble_F(fields.entropy - bg.s0p, dphi, t_fields, bg, coeffs)
    shock_data = assemble_B(
        (t_fields[0][0, :], t_fields[1][0, :]),
        shock.fprime_nodes,
        (dphi[0][0, :], dphi[1][0, :]),
        upstream,
        coeffs,
        bg,
    )
    return EllipticProblem(
        "potential",
        shock_neumann=shock_data,
        flux=(fx, fr),
        lag_field=fields.phi,
        rtol=rtol,
        maxiter=maxiter,
    )


def build_swirl_problem(
    fields: FlowFields,
    grid: FlattenedGrid,
    shock: ShockCurve,
    upstream: UpstreamSolution,
    rtol: float = 1e-11,
    maxiter: int = 0,
) -> EllipticProblem:
    """The swirl problem at the current iterate: entropy/swirl-gradient
    source and the upstream-trace shock data."""
    bg = upstream.background
    t_fields = curl_part(fields.psi, fields.lam, grid, shock)
    dphi = grad_physical(fields.phi, grid, shock)
    ds_dr = grad_physical(fields.entropy, grid, shock)[1]
    dlam_dr = grad_physical(fields.lam, grid, shock)[1]
    source = assemble_G(
        fields.entropy, fields.lam, ds_dr, dlam_dr, t_fields, dphi, grid, bg
    )
    shock_data = assemble_A(
        fields.psi[0, :],
        (upstream.psi, upstream.dpsi_dr, np.zeros(grid.n_t)),
        shock.fprime_nodes,
        grid.t,
    )
    return EllipticProblem(
        "swirl",
        shock_neumann=shock_data,
        source=source,
        lag_field=fields.psi,
        rtol=rtol,
        maxiter=maxiter,
    )


class _Driver:
    def __init__(self, upstream: UpstreamSolution, config: SolverConfig):
        if upstream.phi_slope is None:
            upstream = helmholtz_decompose_upstream(upstream)
        if len(upstream.r) != config.n_t:
            raise InvalidStateError(
                f"upstream radial resolution {len(upstream.r)} must equal n_t={config.n_t}"
            )
        self.upstream = upstream
        self.config = config
        self.bg = upstream.background
        self.coeffs = linearized_coefficients(self.bg, self.bg.constants())
        self.grid = FlattenedGrid(config.n_y, config.n_t)
        self.shock = ShockCurve.flat(config.n_t)
        shape = (config.n_y, config.n_t)
        self.fields = FlowFields(
            phi=np.zeros(shape),
            psi=np.zeros(shape),
            entropy=np.full(shape, self.bg.s0p),
            lam=np.zeros(shape),
        )
        self.report = IterationReport()

    # -- one sweep of each level ------------------------------------------

    def inner_step(self):
        """Assemble the potential problem, solve, update the shock, and
        re-express every field on the new shock's grid."""
        cfg, grid, shock = self.config, self.grid, self.shock
        flds = self.fields
        problem = build_potential_problem(
            flds, grid, shock, self.upstream, self.coeffs, cfg.linear_rtol, cfg.linear_maxiter
        )
        phi_new, stats = solve_potential(problem, grid, shock, self.coeffs, x0=flds.phi)
        if cfg.relax_field < 1.0:
            phi_new = (1.0 - cfg.relax_field) * flds.phi + cfg.relax_field * phi_new
        change_phi = _rel_change(phi_new, flds.phi)

        shock_new = update_shock(
            phi_new, grid, shock, self.upstream, relax=cfg.relax_f, threads=cfg.threads
        )
        change_f = float(np.max(np.abs(shock_new.f - shock.f)))

        flds.phi = resample_field(phi_new, grid, shock, shock_new)
        flds.psi = resample_field(flds.psi, grid, shock, shock_new)
        flds.lam = resample_field(flds.lam, grid, shock, shock_new)
        dev = resample_field(flds.entropy - self.bg.s0p, grid, shock, shock_new)
        flds.entropy = self.bg.s0p + dev
        self.shock = shock_new
        return {"change_phi": change_phi, "change_f": change_f, "linear": vars(stats)}

    def middle_step(self):
        """Transport entropy and swirl from the current shock data along the
        stream surfaces of the current mass flux."""
        grid, shock, flds = self.grid, self.shock, self.fields
        flux = mass_flux(
            flds.entropy, flds.phi, flds.psi, flds.lam, grid, shock, self.bg
        )
        trace = stream_function(flux, grid)
        r_sh = trace_to_shock(trace)
        fprime = shock.fprime_nodes
        s_data = np.empty(grid.n_t)
        for j in range(grid.n_t):
            state = GasState(
                self.upstream.u_x[j],
                0.0,
                self.upstream.u_theta[j],
                self.upstream.rho[j],
                self.upstream.p[j],
            )
            root = np.hypot(1.0, fprime[j])
            s_data[j] = s_sh(state, (1.0 / root, -fprime[j] / root), self.bg.gamma)
        s_new, lam_new = transport_from_shock(s_data, self.upstream.lam, r_sh, grid.t)
        if self.config.relax_field < 1.0:
            w = self.config.relax_field
            s_new = (1.0 - w) * flds.entropy + w * s_new
            lam_new = (1.0 - w) * flds.lam + w * lam_new
        change = max(_rel_change(s_new, flds.entropy), _rel_change(lam_new, flds.lam))
        flds.entropy = s_new
        flds.lam = lam_new
        return {"change_sl": change}

    def outer_step(self):
        """Assemble the swirl problem from the current fields and solve."""
        cfg, grid, shock, flds = self.config, self.grid, self.shock, self.fields
        problem = build_swirl_problem(
            flds, grid, shock, self.upstream, cfg.linear_rtol, cfg.linear_maxiter
        )
        psi_new, stats = solve_swirl(problem, grid, shock, x0=flds.psi)
        if cfg.relax_field < 1.0:
            psi_new = (1.0 - cfg.relax_field) * flds.psi + cfg.relax_field * psi_new
        change = _rel_change(psi_new, flds.psi)
        flds.psi = psi_new
        return {"change_psi": change, "linear": vars(stats)}

    # -- loops --------------------------------------------------------------

    def record(self, level, counters, payload):
        entry = {"level": level, **counters, "max_f": self.shock.max_abs(), **payload}
        self.report.sweeps.append(entry)
        return entry

    def run_nested(self):
        cfg = self.config
        for outer in range(1, cfg.max_sweeps + 1):
            for middle in range(1, cfg.max_sweeps + 1):
                for inner in range(1, cfg.max_sweeps + 1):
                    counters = {"outer": outer, "middle": middle, "inner": inner}
                    rec = self.record("inner", counters, self.inner_step())
                    if rec["change_phi"] <= cfg.tol_phi and rec["change_f"] <= cfg.tol_f:
                        break
                else:
                    raise DivergenceError("inner loop exceeded sweep cap", self.report)
                counters = {"outer": outer, "middle": middle}
                rec = self.record("middle", counters, self.middle_step())
                if rec["change_sl"] <= cfg.tol_sl:
                    break
            else:
                raise DivergenceError("middle loop exceeded sweep cap", self.report)
            rec = self.record("outer", {"outer": outer}, self.outer_step())
            if rec["change_psi"] <= cfg.tol_psi:
                self.report.converged = True
                self.report.outer_sweeps = outer
                return
        raise DivergenceError("outer loop exceeded sweep cap", self.report)

    def run_flat(self):
        cfg = self.config
        for sweep in range(1, cfg.max_sweeps + 1):
            counters = {"sweep": sweep}
            rec_i = self.record("inner", counters, self.inner_step())
            rec_m = self.record("middle", counters, self.middle_step())
            rec_o = self.record("outer", counters, self.outer_step())
            if (
                rec_i["change_phi"] <= cfg.tol_phi
                and rec_i["change_f"] <= cfg.tol_f
                and rec_m["change_sl"] <= cfg.tol_sl
                and rec_o["change_psi"] <= cfg.tol_psi
            ):
                self.report.converged = True
                self.report.outer_sweeps = sweep
                return
        raise DivergenceError("flattened loop exceeded sweep cap", self.report)

    def contraction_telemetry(self):
        """Geometric-contraction proxy: over the longest inner-sweep run,
        the change must drop by >= 10x across its last three sweeps (ignored
        below the 1e-13 noise floor)."""
        runs, current = [], []
        for rec in self.report.sweeps:
            if rec["level"] == "inner":
                current.append(rec["change_phi"] + rec["change_f"])
            elif current:
                runs.append(current)
                current = []
        if current:
            runs.append(current)
        longest = max(runs, key=len) if runs else []
        info = {"length": len(longest)}
        if len(longest) >= 3:
            last, first = longest[-1], longest[-3]
            if last < 1e-13:
                info.update(ratio=float("inf"), ok=True)
            else:
                info.update(ratio=first / last, ok=first / last >= 10.0)
        else:
            info.update(ratio=float("inf"), ok=True)
        self.report.inner_contraction = info


def solve_transonic_shock(
    upstream: UpstreamSolution, config: SolverConfig
) -> Solution:
    """Run the full iteration from the background state.

    Raises DivergenceError when a sweep cap is hit; vacuum, shock-escape,
    and degeneracy errors propagate with the failing level recorded in the
    report.
    """
    driver = _Driver(upstream, config)
    start = time.perf_counter()
    try:
        if config.mode == "nested":
            driver.run_nested()
        else:
            driver.run_flat()
    except DivergenceError:
        driver.report.failure = "sweep cap exceeded"
        raise
    except CylShockError as exc:
        driver.report.failure = f"{type(exc).__name__}: {exc}"
        raise
    finally:
        driver.report.timings["solve_seconds"] = time.perf_counter() - start

    driver.contraction_telemetry()
    primitive = reconstruct_primitive(driver.fields, driver.grid, driver.shock, driver.upstream)
    solution = Solution(
        grid=driver.grid,
        shock=driver.shock,
        fields=driver.fields,
        primitive=primitive,
        report=driver.report,
        upstream=driver.upstream,
    )
    driver.report.diagnostics = diagnostics(solution, driver.upstream)
    return solution


def reconstruct_primitive(
    fields: FlowFields, grid: FlattenedGrid, shock: ShockCurve, upstream: UpstreamSolution
) -> dict:
    """Primitive variables from the decomposition:
    u = grad(phi0+ + phi) + curl part, rho = H(S, u), p = S rho^gamma."""
    bg = upstream.background
    t_x, t_r, t_theta = curl_part(fields.psi, fields.lam, grid, shock)
    dphi_x, dphi_r = grad_physical(fields.phi, grid, shock)
    u_x = bg.u0p + dphi_x + t_x
    u_r = dphi_r + t_r
    u_theta = t_theta
    rho = density_H(fields.entropy, (u_x, u_r, u_theta), bg.constants())
    p = fields.entropy * rho**bg.gamma
    c = np.sqrt(bg.gamma * p / rho)
    mach = np.sqrt(u_x**2 + u_r**2 + u_theta**2) / c
    return {
        "u_x": u_x,
        "u_r": u_r,
        "u_theta": u_theta,
        "rho": rho,
        "p": p,
        "mach": mach,
    }


def diagnostics(solution: Solution, upstream: UpstreamSolution) -> dict:
    """Measure every weak-solution property of the reconstructed state:
    interior equation residuals, shock jump residuals, Bernoulli deviation,
    transonic classification, admissibility, positivity, streamline
    constancy, and cross-section mass-flux conservation."""
    grid, shock, fields = solution.grid, solution.shock, solution.fields
    bg = upstream.background
    prim = solution.primitive
    u_x, u_r, u_theta = prim["u_x"], prim["u_r"], prim["u_theta"]
    rho, p = prim["rho"], prim["p"]

    def grad(fld):
        return grad_physical(fld, grid, shock)

    # residual norms exclude a 3-node boundary layer, where the one-sided
    # closures of the measurement stencil dominate the fields' own error
    inner = (slice(3, -3), slice(3, -3))
    r = grid.t[None, :]

    dmx = grad(rho * u_x)[0]
    dmr = grad(rho * u_r)[1]
    res_mass = dmx + dmr + np.divide(
        rho * u_r, r, out=np.zeros_like(u_r), where=r > 0.0
    )
    dux = grad(u_r)
    dp_r = grad(p)[1]
    res_rmom = (
        rho * (u_x * dux[0] + u_r * dux[1])
        - np.divide(rho * u_theta**2, r, out=np.zeros_like(u_r), where=r > 0.0)
        + dp_r
    )
    ds = grad(fields.entropy)
    res_entropy = rho * (u_x * ds[0] + u_r * ds[1])
    dl = grad(fields.lam)
    res_swirl = rho * (u_x * dl[0] + u_r * dl[1])

    def norms(resfield):
        v = resfield[inner]
        return {"max": float(np.max(np.abs(v))), "rms": float(np.sqrt(np.mean(v**2)))}

    euler = {
        "mass": norms(res_mass),
        "r_momentum": norms(res_rmom),
        "entropy_transport": norms(res_entropy),
        "swirl_transport": norms(res_swirl),
    }

    # shock jump residuals: exact upstream trace vs the downstream boundary row
    fprime = shock.fprime_nodes
    rh_max = np.zeros(5)
    admissible = True
    un_margin = np.inf
    for j in range(grid.n_t):
        root = np.hypot(1.0, fprime[j])
        n = (1.0 / root, -fprime[j] / root)
        pre = GasState(
            upstream.u_x[j], 0.0, upstream.u_theta[j], upstream.rho[j], upstream.p[j]
        )
        post = GasState(
            u_x[0, j], u_r[0, j], u_theta[0, j], rho[0, j], p[0, j]
        )
        res = np.abs(rh_residual(pre, post, n, bg.gamma))
        rh_max = np.maximum(rh_max, res)
        un_pre = pre.u_x * n[0] + pre.u_r * n[1]
        un_post = post.u_x * n[0] + post.u_r * n[1]
        admissible &= un_pre > un_post > 0.0
        un_margin = min(un_margin, un_pre - un_post, un_post)

    bern = 0.5 * (u_x**2 + u_r**2 + u_theta**2) + bg.gamma * p / ((bg.gamma - 1.0) * rho)
    c2_up = bg.gamma * upstream.p / upstream.rho
    mach_up_min = float(
        np.sqrt(np.min((upstream.u_x**2 + upstream.u_theta**2) / c2_up))
    )

    # diagnostics never raise: a degenerate mass flux is itself a finding
    try:
        flux = mass_flux(
            fields.entropy, fields.phi, fields.psi, fields.lam, grid, shock, bg
        )
        stream_res = flux.n_y_flux * d_dy(fields.entropy, grid) + flux.n_t_flux * d_dt(
            fields.entropy, grid
        )
        trace = stream_function(flux, grid)
        w_spread = float(np.max(np.abs(trace.w[:, -1] - trace.w[0, -1])))
        stream_max = float(np.max(np.abs(stream_res[inner])))
    except CylShockError:
        w_spread = float("inf")
        stream_max = float("inf")

    ht = grid.h_t
    psi_rr_axis = float(
        np.max(
            np.abs(
                (fields.psi[:, 2] - 2.0 * fields.psi[:, 1] + fields.psi[:, 0]) / ht**2
            )
        )
    )

    return {
        "euler_residuals": euler,
        "rh_residual_max": {
            "mass": float(rh_max[0]),
            "normal_momentum": float(rh_max[1]),
            "energy": float(rh_max[2]),
            "tangential_velocity": float(rh_max[3]),
            "swirl_velocity": float(rh_max[4]),
            "overall": float(np.max(rh_max)),
        },
        "bernoulli_deviation": float(np.max(np.abs(bern - bg.b0))),
        "mach_downstream_max": float(np.max(prim["mach"])),
        "mach_upstream_min": mach_up_min,
        "admissible": bool(admissible),
        "admissibility_margin": float(un_margin),
        "rho_min": float(np.min(rho)),
        "u_x_margin": float(np.min(u_x) - bg.u0p / 2.0),
        "streamline_constancy_max": stream_max,
        "cross_section_flux_spread": w_spread,
        "psi_rr_axis": psi_rr_axis,
        "max_f": shock.max_abs(),
        "shock_displacement_max": float(np.max(np.abs(shock.f))),
    }


def sigma_scaling_study(
    spec_base: InflowSpec, factors, config: SolverConfig
) -> dict:
    """Linear-response study: scale the inflow amplitudes, solve, and table
    sigma, the shock norm, the downstream deviation norm, and their ratios."""
    rows = []
    for factor in factors:
        spec = InflowSpec(
            eps_swirl=spec_base.eps_swirl * factor,
            eps_entropy=spec_base.eps_entropy * factor,
            swirl_profile=spec_base.swirl_profile,
            entropy_profile=spec_base.entropy_profile,
            n_r=config.n_t,
        )
        ups = helmholtz_decompose_upstream(build_parallel_swirl_inflow(spec, REF))
        if ups.sigma < 1e-14:  # zero amplitude up to rounding
            rows.append(
                {"factor": factor, "sigma": 0.0, "f_norm": 0.0, "dev_norm": 0.0}
            )
            continue
        sol = solve_transonic_shock(ups, config)
        bg = ups.background
        dev = max(
            float(np.max(np.abs(sol.primitive["u_x"] - bg.u0p))),
            float(np.max(np.abs(sol.primitive["u_r"]))),
            float(np.max(np.abs(sol.primitive["u_theta"]))),
            float(np.max(np.abs(sol.primitive["rho"] - bg.rho0p))),
            float(np.max(np.abs(sol.primitive["p"] - bg.p0p))),
        )
        rows.append(
            {
                "factor": factor,
                "sigma": ups.sigma,
                "f_norm": sol.shock.max_abs(),
                "dev_norm": dev,
                "f_over_sigma": sol.shock.max_abs() / ups.sigma,
                "dev_over_sigma": dev / ups.sigma,
            }
        )
    ratios_f = [row["f_over_sigma"] for row in rows if row.get("f_over_sigma")]
    ratios_d = [row["dev_over_sigma"] for row in rows if row.get("dev_over_sigma")]

    def spread(vals):
        if not vals:
            return 0.0
        return max(vals) / min(vals) - 1.0

    return {
        "rows": rows,
        "f_ratio_spread": spread(ratios_f),
        "dev_ratio_spread": spread(ratios_d),
    }
