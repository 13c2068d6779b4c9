"""Built-in oracle batteries: shock-jump algebra against normal-shock
tables, reflection-extension identities, manufactured-solution convergence
of both elliptic solvers, inflow exactness, the background fixed point, and
the linear-response scaling study.

Each battery returns (name, passed, detail) rows; the CLI prints them as a
table and the acceptance suite asserts them.
"""

from __future__ import annotations

import math

import numpy as np

from .driver import SolverConfig, sigma_scaling_study, solve_transonic_shock
from .elliptic import (
    EllipticProblem,
    linearized_coefficients,
    solve_potential,
    solve_swirl,
)
from .gasdyn import REF, GasState, post_shock_state, rh_residual, s_sh
from .geometry import EXTENSION_COEFFS, FlattenedGrid, ShockCurve, extend_field
from .upstream import InflowSpec, build_parallel_swirl_inflow, helmholtz_decompose_upstream

__all__ = [
    "BATTERIES",
    "curved_test_shock",
    "mms_potential",
    "mms_swirl",
    "run_batteries",
    "battery_jump",
    "battery_extension",
    "battery_mms",
    "battery_upstream",
    "battery_background",
    "battery_scaling",
]

_COEFFS = linearized_coefficients(REF, REF.constants())


def curved_test_shock(n_t: int, amplitude: float) -> ShockCurve:
    """f(t) = amplitude (1 - t^2)^2: zero slope at axis and wall."""
    t = np.linspace(0.0, 1.0, n_t)
    return ShockCurve(t, amplitude * (1.0 - t**2) ** 2)


def mms_potential(n_y: int, n_t: int, shock_amplitude: float = 0.0):
    """Max-norm error of the potential solve manufactured around
    phi_m = cos(pi y)(1 - t^2)^2 with F = a grad(phi_m)."""
    grid = FlattenedGrid(n_y, n_t)
    shock = (
        curved_test_shock(n_t, shock_amplitude) if shock_amplitude else ShockCurve.flat(n_t)
    )
    yy, tt = grid.mesh()
    phi_m = np.cos(np.pi * yy) * (1.0 - tt**2) ** 2
    dphi_dy = -np.pi * np.sin(np.pi * yy) * (1.0 - tt**2) ** 2
    dphi_dt = -4.0 * tt * (1.0 - tt**2) * np.cos(np.pi * yy)
    f = shock(tt)
    fp = shock.fprime(tt)
    beta = (yy - 1.0) * fp / (1.0 - f)
    fx = _COEFFS.a11 * dphi_dy / (1.0 - f)
    fr = _COEFFS.a22 * (dphi_dt + beta * dphi_dy)
    fpn = shock.fprime(grid.t)
    root = np.sqrt(1.0 + fpn**2)
    shock_data = -(fx[0, :] / root + fr[0, :] * (-fpn / root))
    problem = EllipticProblem(
        "potential",
        shock_neumann=shock_data,
        flux=(fx, fr),
        wall=("neumann", fr[:, -1]),
        exit=("dirichlet", phi_m[-1, :]),
        lag_field=phi_m if shock_amplitude else None,
    )
    sol, stats = solve_potential(problem, grid, shock, _COEFFS)
    return float(np.max(np.abs(sol - phi_m))), stats, sol


def mms_swirl(n_y: int, n_t: int):
    """Max-norm error of the swirl solve manufactured around
    psi_m = t (1 - t^2) cos(pi (y - 1/4))."""
    grid = FlattenedGrid(n_y, n_t)
    shock = ShockCurve.flat(n_t)
    yy, tt = grid.mesh()
    radial = tt * (1.0 - tt**2)
    cy = np.cos(np.pi * (yy - 0.25))
    cyp = -np.pi * np.sin(np.pi * (yy - 0.25))
    psi_m = radial * cy
    source = np.pi**2 * radial * cy + 8.0 * tt * cy
    problem = EllipticProblem(
        "swirl",
        shock_neumann=-radial[0, :] * cyp[0, 0],
        source=source,
        exit=("neumann", radial[-1, :] * cyp[-1, 0]),
    )
    sol, stats = solve_swirl(problem, grid, shock)
    return float(np.max(np.abs(sol - psi_m))), stats, sol


def battery_jump():
    rows = []
    m2 = 4.0
    g = 1.4
    rho_ratio = (g + 1.0) * m2 / ((g - 1.0) * m2 + 2.0)
    p_ratio = (2.0 * g * m2 - (g - 1.0)) / (g + 1.0)
    ok = (
        abs(REF.u0p - 0.75) < 1e-12
        and abs(REF.rho0p - rho_ratio) < 1e-12
        and abs(REF.p0p - p_ratio / 1.4) < 1e-12
    )
    rows.append(
        (
            "jump: Mach-2 closed forms vs normal-shock table",
            ok,
            f"u0+={REF.u0p!r} rho0+={REF.rho0p!r} p0+={REF.p0p!r}",
        )
    )
    m2_post = ((g - 1.0) * m2 + 2.0) / (2.0 * g * m2 - (g - 1.0))
    c2 = g * REF.p0p / REF.rho0p
    rows.append(
        (
            "jump: downstream Mach^2 = 1/3",
            abs(REF.u0p**2 / c2 - m2_post) < 1e-12,
            f"M2^2={REF.u0p ** 2 / c2!r}",
        )
    )
    worst = 0.0
    entropy_ok = True
    s_minus = (1.0 / g) / 1.0**g
    for mach in np.linspace(1.05, 4.0, 20):
        for fp in np.linspace(-0.3, 0.3, 20):
            n = np.array([1.0, -fp]) / math.hypot(1.0, fp)
            pre = GasState(mach * n[0], mach * n[1], 0.0, 1.0, 1.0 / g)
            post = post_shock_state(pre, n, g)
            res = rh_residual(pre, post, n, g)
            scale = max(1.0, pre.rho * pre.speed2() + pre.p)
            worst = max(worst, float(np.max(np.abs(res))) / scale)
            entropy_ok &= s_sh(pre, n, g) >= s_minus - 1e-14
    rows.append(
        ("jump: RH self-consistency over 20x20 sweep", worst < 1e-12, f"worst={worst:.3e}")
    )
    rows.append(("jump: entropy increase over sweep", entropy_ok, ""))
    return rows


def battery_extension():
    rows = []
    sums = [
        sum(c * (-1.0 / i) ** m for i, c in enumerate(EXTENSION_COEFFS, 1))
        for m in range(4)
    ]
    rows.append(
        (
            "extension: weight sums m=0,1,2 equal 1",
            all(abs(s - 1.0) < 1e-12 for s in sums[:3]),
            f"sums={sums[:3]}",
        )
    )
    rows.append(
        ("extension: cubic defect equals -3", abs(sums[3] + 3.0) < 1e-12, f"m=3 sum={sums[3]!r}")
    )
    grid = FlattenedGrid(17, 9)
    quad = np.tile((grid.y**2)[:, None], (1, 9))
    y_ext, ext = extend_field(quad, grid)
    err_quad = float(np.max(np.abs(ext - y_ext[:, None] ** 2)))
    rows.append(("extension: quadratics reproduced", err_quad < 1e-12, f"err={err_quad:.2e}"))
    cub = np.tile((grid.y**3)[:, None], (1, 9))
    y_ext, ext = extend_field(cub, grid)
    neg = y_ext < 0
    err_cub = float(np.max(np.abs(ext[neg] - (-3.0) * y_ext[neg][:, None] ** 3)))
    rows.append(
        ("extension: cubics scaled by -3 on the reflection", err_cub < 1e-12, f"err={err_cub:.2e}")
    )
    return rows


def battery_mms(columns=(65, 129, 257), window=(3.4, 4.6)):
    rows = []
    for label, runner in (
        ("potential (straight shock)", lambda n: mms_potential(n, (n + 1) // 2)[0]),
        ("potential (curved shock)", lambda n: mms_potential(n, (n + 1) // 2, 0.12)[0]),
        ("swirl", lambda n: mms_swirl(n, (n + 1) // 2)[0]),
    ):
        errs = [runner(n) for n in columns]
        ratios = [errs[i] / errs[i + 1] for i in range(len(errs) - 1)]
        ok = all(window[0] <= r <= window[1] for r in ratios)
        rows.append(
            (
                f"mms: {label} order-2 ratios",
                ok,
                f"errs={['%.3e' % e for e in errs]} ratios={['%.2f' % r for r in ratios]}",
            )
        )
    return rows


def battery_upstream():
    rows = []
    sol = build_parallel_swirl_inflow(InflowSpec(0.05, 0.02, n_r=513), REF)
    h = sol.h
    p, rho, r = sol.p, sol.rho, sol.r
    dp = (p[:-4] - 8.0 * p[1:-3] + 8.0 * p[3:-1] - p[4:]) / (12.0 * h)
    res = float(np.max(np.abs(dp - (rho * sol.lam**2)[2:-2] / r[2:-2] ** 3)))
    rows.append(("upstream: radial momentum residual < 1e-8", res < 1e-8, f"res={res:.3e}"))
    fine = build_parallel_swirl_inflow(InflowSpec(0.05, 0.02, n_r=1025), REF)
    rich = float(np.max(np.abs(fine.p[::2] - sol.p)))
    rows.append(("upstream: RK4 double-resolution agreement", rich < 1e-12, f"diff={rich:.3e}"))
    g = REF.gamma
    bern = 0.5 * (sol.u_x**2 + sol.u_theta**2) + g * sol.p / ((g - 1.0) * sol.rho)
    bdev = float(np.max(np.abs(bern - REF.b0)))
    rows.append(("upstream: Bernoulli held to 1e-10", bdev < 1e-10, f"dev={bdev:.2e}"))

    errs = []
    for n in (65, 129, 257):
        dec = helmholtz_decompose_upstream(
            build_parallel_swirl_inflow(InflowSpec(0.03, 0.02, n_r=n), REF)
        )
        slope = dec.phi_slope
        d = np.empty(n)
        d[1:-1] = (slope[2:] - slope[:-2]) / (2.0 * dec.h)
        d[0] = (-3.0 * slope[0] + 4.0 * slope[1] - slope[2]) / (2.0 * dec.h)
        d[-1] = (3.0 * slope[-1] - 4.0 * slope[-2] + slope[-3]) / (2.0 * dec.h)
        errs.append(float(np.max(np.abs(d))))
    ratios = [errs[i] / errs[i + 1] for i in range(2)]
    ok = all(3.0 <= r <= 5.0 for r in ratios)
    rows.append(
        (
            "upstream: decomposition roundtrip O(h^2)",
            ok,
            f"errs={['%.3e' % e for e in errs]} ratios={['%.2f' % r for r in ratios]}",
        )
    )
    return rows


def battery_background(n_y=129, n_t=65):
    ups = helmholtz_decompose_upstream(build_parallel_swirl_inflow(InflowSpec(0, 0, n_r=n_t), REF))
    sol = solve_transonic_shock(ups, SolverConfig(n_y=n_y, n_t=n_t))
    worst = max(
        sol.shock.max_abs(),
        float(np.max(np.abs(sol.fields.phi))),
        float(np.max(np.abs(sol.fields.psi))),
        float(np.max(np.abs(sol.fields.lam))),
        float(np.max(np.abs(sol.fields.entropy - REF.s0p))),
    )
    return [
        (
            f"background: {n_y}x{n_t} fixed point to 1e-10",
            sol.report.converged and sol.report.outer_sweeps <= 2 and worst <= 1e-10,
            f"outer={sol.report.outer_sweeps} worst deviation={worst:.2e}",
        )
    ]


def battery_scaling(factors=(1.0, 0.5, 0.25), n_y=129, n_t=65):
    study = sigma_scaling_study(
        InflowSpec(0.02, 0.01), factors, SolverConfig(n_y=n_y, n_t=n_t)
    )
    ok = study["f_ratio_spread"] < 0.20 and study["dev_ratio_spread"] < 0.20
    return [
        (
            "scaling: shock and deviation norms linear in sigma (20%)",
            ok,
            f"f spread={study['f_ratio_spread']:.3f} dev spread={study['dev_ratio_spread']:.3f}",
        )
    ]


BATTERIES = {
    "jump": battery_jump,
    "extension": battery_extension,
    "mms": battery_mms,
    "upstream": battery_upstream,
    "background": battery_background,
    "scaling": battery_scaling,
}


def run_batteries(names=None, scaling_factors=None):
    """Run the selected batteries (all by default) and return result rows."""
    rows = []
    for name, fn in BATTERIES.items():
        if names and name not in names:
            continue
        if name == "scaling" and scaling_factors:
            rows.extend(fn(factors=tuple(scaling_factors)))
        else:
            rows.extend(fn())
    return rows
