"""Linearized coefficients, nonlinear flux/boundary assemblers, and the two
finite-volume solvers, checked against finite-difference oracles, closed
forms, manufactured solutions, and the discrete divergence theorem."""

import numpy as np
import pytest

from cylshock import REF, DegeneracyError, PreconditionError, background_downstream
from cylshock.elliptic import (
    EllipticProblem,
    assemble_A,
    assemble_B,
    assemble_F,
    assemble_G,
    cell_weights,
    face_coefficients,
    linearized_coefficients,
    solve_potential,
    solve_swirl,
    transform_flux,
)
from cylshock.gasdyn import density_H
from cylshock.geometry import FlattenedGrid, ShockCurve
from cylshock.upstream import InflowSpec, build_parallel_swirl_inflow, helmholtz_decompose_upstream
from cylshock.verification import mms_potential, mms_swirl

COEFFS = linearized_coefficients(REF, REF.constants())

GAMMA = REF.gamma
CONSTS = REF.constants()


class TestLinearizedCoefficients:
    def test_ref_values(self):
        assert COEFFS.a11 == pytest.approx(16.0 / 9.0, abs=1e-12)
        assert COEFFS.a22 == pytest.approx(8.0 / 3.0, abs=1e-12)
        assert COEFFS.a33 == COEFFS.a22

    def test_finite_difference_oracle(self):
        # centered difference of A_i(s) = H(S0+, s) s_i at the background
        def flux_component(i, s):
            return density_H(REF.s0p, tuple(s), CONSTS) * s[i]

        s0 = np.array([REF.u0p, 0.0, 0.0])
        eps = 1e-6
        analytic = (COEFFS.a11, COEFFS.a22, COEFFS.a33)
        for i in range(3):
            sp, sm = s0.copy(), s0.copy()
            sp[i] += eps
            sm[i] -= eps
            fd = (flux_component(i, sp) - flux_component(i, sm)) / (2.0 * eps)
            assert abs(fd - analytic[i]) < 1e-8

    def test_a11_below_a22_for_subsonic(self):
        for u0m in (1.5, 2.0, 3.0):
            bg = background_downstream(u0m, 1.0, 1.0 / 1.4, GAMMA)
            c = linearized_coefficients(bg, bg.constants())
            assert 0.0 < c.a11 < c.a22

    def test_ellipticity_error(self):
        # a fake background with supersonic downstream state
        bad = REF.__class__(**{**REF.__dict__, "u0p": 2.0, "p0p": REF.p0p, "rho0p": REF.rho0p})
        with pytest.raises(PreconditionError):
            linearized_coefficients(bad, bad.constants())


class TestAssembleF:
    shape = (9, 7)

    def zeros(self):
        return np.zeros(self.shape)

    def closed_form(self, xi, s, v):
        """F_i = a_ii s_i + A_i(V0) - A_i(V0+Q) - H(V0+Q) v_i, the collapsed
        form of the two parameter integrals."""
        s_arg = (REF.u0p + s[0], s[1], 0.0)
        q = (s_arg[0] + v[0], s_arg[1] + v[1], s_arg[2] + v[2])
        h = density_H(REF.s0p + xi, q, CONSTS)
        base = (REF.rho0p * REF.u0p, 0.0)
        return tuple(
            aii * si + a0 - h * sa - h * vi
            for aii, si, a0, sa, vi in zip(
                (COEFFS.a11, COEFFS.a22), s, base, s_arg[:2], v[:2]
            )
        )

    def test_zero_at_base_point(self):
        z = self.zeros()
        fx, fr = assemble_F(z, (z, z), (z, z, z), REF, COEFFS)
        assert np.all(fx == 0.0) and np.all(fr == 0.0)

    def test_matches_closed_form(self):
        rng = np.random.default_rng(0)
        xi = 0.03 * (rng.random(self.shape) - 0.5)
        s = tuple(0.05 * (rng.random(self.shape) - 0.5) for _ in range(2))
        v = tuple(0.05 * (rng.random(self.shape) - 0.5) for _ in range(3))
        fx, fr = assemble_F(xi, s, v, REF, COEFFS)
        for idx in np.ndindex(self.shape):
            cx, cr = self.closed_form(
                xi[idx], (s[0][idx], s[1][idx]), tuple(c[idx] for c in v)
            )
            assert abs(fx[idx] - cx) < 1e-10
            assert abs(fr[idx] - cr) < 1e-10

    def test_quadratic_in_potential_gradient(self):
        # the remainder is second order in the potential gradient alone
        rng = np.random.default_rng(1)
        z = self.zeros()
        s = tuple(0.05 * (rng.random(self.shape) - 0.5) for _ in range(2))
        big = assemble_F(z, s, (z, z, z), REF, COEFFS)
        small = assemble_F(z, tuple(c / 2 for c in s), (z, z, z), REF, COEFFS)
        ratio = max(np.max(np.abs(c)) for c in big) / max(np.max(np.abs(c)) for c in small)
        assert ratio == pytest.approx(4.0, abs=0.4)

    def test_pure_curl_perturbation(self):
        # t-part only: F_1 = -H v_1 plus the linear correction of the
        # parameter integral; cross-checked against the closed form
        rng = np.random.default_rng(2)
        z = self.zeros()
        v = tuple(0.04 * (rng.random(self.shape) - 0.5) for _ in range(3))
        fx, fr = assemble_F(z, (z, z), v, REF, COEFFS)
        for idx in np.ndindex(self.shape):
            cx, cr = self.closed_form(0.0, (0.0, 0.0), tuple(c[idx] for c in v))
            assert abs(fx[idx] - cx) < 1e-10
            assert abs(fr[idx] - cr) < 1e-10


def decomposed(spec_args, n_t):
    return helmholtz_decompose_upstream(
        build_parallel_swirl_inflow(InflowSpec(*spec_args, n_r=n_t), REF)
    )


class TestAssembleB:
    n_t = 17

    def test_background_is_zero(self):
        ups = decomposed((0.0, 0.0), self.n_t)
        z = np.zeros(self.n_t)
        b = assemble_B((z, z), z, (z, z), ups, COEFFS, REF)
        assert np.max(np.abs(b)) < 1e-14

    def test_near_linear_in_upstream_amplitude(self):
        z = np.zeros(self.n_t)
        norms = []
        for amp in (0.04, 0.02):
            ups = decomposed((amp, amp / 2), self.n_t)
            b = assemble_B((z, z), z, (z, z), ups, COEFFS, REF)
            norms.append(np.max(np.abs(b)))
        assert norms[0] / norms[1] == pytest.approx(2.0, rel=0.10)

    def test_straight_shock_ignores_radial_gradient(self):
        # with f' = 0 the (a11 - a22) correction has zero normal projection
        ups = decomposed((0.0, 0.0), self.n_t)
        z = np.zeros(self.n_t)
        rng = np.random.default_rng(3)
        dphi_r = rng.random(self.n_t)
        b1 = assemble_B((z, z), z, (z, z), ups, COEFFS, REF)
        b2 = assemble_B((z, z), z, (z, dphi_r), ups, COEFFS, REF)
        assert np.allclose(b1, b2, atol=1e-15)


class TestAssembleG:
    def test_constant_fields_give_zero(self):
        grid = FlattenedGrid(9, 9)
        z = np.zeros((9, 9))
        g = assemble_G(np.full((9, 9), REF.s0p), z, z, z, (z, z, z), (z, z), grid, REF)
        assert np.all(g == 0.0)

    def test_entropy_gradient_formula(self):
        grid = FlattenedGrid(9, 9)
        z = np.zeros((9, 9))
        ds = np.full((9, 9), 0.01)
        g = assemble_G(np.full((9, 9), REF.s0p), z, ds, z, (z, z, z), (z, z), grid, REF)
        expect = REF.rho0p ** (GAMMA - 1.0) / (GAMMA - 1.0) * 0.01 / REF.u0p
        assert np.max(np.abs(g - expect)) < 1e-12

    def test_axis_regular_for_linear_swirl_velocity(self):
        # Lambda = a r^2, so V = a r: the swirl source is 2 a^2 r / u_x,
        # finite and vanishing on the axis
        grid = FlattenedGrid(9, 9)
        a = 0.3
        z = np.zeros((9, 9))
        lam = np.tile(a * grid.t[None, :] ** 2, (9, 1))
        dlam = np.tile(2.0 * a * grid.t[None, :], (9, 1))
        g = assemble_G(np.full((9, 9), REF.s0p), lam, z, dlam, (z, z, z), (z, z), grid, REF)
        assert np.max(np.abs(g[:, 0])) < 1e-12
        expect = 2.0 * a**2 * grid.t[1:] / REF.u0p
        assert np.max(np.abs(g[:, 1:] - expect[None, :])) < 0.12 * a**2

    def test_axial_velocity_floor(self):
        grid = FlattenedGrid(9, 9)
        z = np.zeros((9, 9))
        sink = np.full((9, 9), -REF.u0p * 0.7)  # drives u_x below u0+/2
        with pytest.raises(DegeneracyError):
            assemble_G(np.full((9, 9), REF.s0p), z, z, z, (sink, z, z), (z, z), grid, REF)


class TestAssembleA:
    n_t = 17

    def test_background_zero(self):
        r = np.linspace(0, 1, self.n_t)
        z = np.zeros(self.n_t)
        a = assemble_A(z, (z, z, z), z, r)
        assert np.all(a == 0.0)

    def test_straight_shock_x_independent_upstream(self):
        r = np.linspace(0, 1, self.n_t)
        z = np.zeros(self.n_t)
        rng = np.random.default_rng(4)
        psi_star = rng.random(self.n_t)
        a = assemble_A(psi_star, (0.3 * r * (1 - r), 0.3 * (1 - 2 * r), z), z, r)
        assert np.all(a == 0.0)  # f' = 0 and d_x psi- = 0 kill every term

    def test_axial_gradient_case(self):
        # psi- = r(1-r) x sampled on the shock x = 0: A = -d_x psi- = -r(1-r)
        r = np.linspace(0, 1, self.n_t)
        z = np.zeros(self.n_t)
        a = assemble_A(z, (z, z, r * (1 - r)), z, r)
        assert np.allclose(a, -r * (1 - r), atol=1e-14)


class TestSolvePotential:
    def test_homogeneous_identically_zero(self):
        grid = FlattenedGrid(17, 9)
        shock = ShockCurve.flat(9)
        prob = EllipticProblem("potential", shock_neumann=np.zeros(9))
        phi, stats = solve_potential(prob, grid, shock, COEFFS)
        assert np.all(phi == 0.0)
        assert stats.method == "trivial"

    @pytest.mark.parametrize("amplitude", [0.0, 0.12])
    def test_mms_second_order(self, amplitude):
        errs = [mms_potential(n, (n + 1) // 2, amplitude)[0] for n in (33, 65, 129)]
        assert errs[0] / errs[1] == pytest.approx(4.0, abs=0.6)
        assert errs[1] / errs[2] == pytest.approx(4.0, abs=0.6)

    def test_solver_residual_contract(self):
        _, stats, _ = mms_potential(65, 33, 0.12)
        assert stats.rel_residual <= 1e-11

    def test_discrete_flux_balance(self):
        # constant shock data, smooth interior flux: the shock input plus
        # the discrete exit absorption balances the flux field's boundary
        # integral to solver precision (conservative-form identity)
        grid = FlattenedGrid(33, 17)
        shock = ShockCurve.flat(17)
        yy, tt = grid.mesh()
        fx = np.sin(np.pi * yy) * (1 - tt**2)
        fr = 0.3 * np.cos(np.pi * yy / 2) * tt * (1 - tt)
        data = np.full(17, 0.7)
        prob = EllipticProblem("potential", shock_neumann=data, flux=(fx, fr))
        phi, _ = solve_potential(prob, grid, shock, COEFFS)

        tw, yw = cell_weights(grid)
        c_y, _ = face_coefficients(grid, shock, COEFFS.a11, COEFFS.a22)
        fhat_y, fhat_t = transform_flux(fx, fr, grid, shock)
        out_shock = np.sum(data * tw)  # f' = 0: unit surface element
        out_exit = np.sum(c_y[-1, :] * (phi[-1, :] - phi[-2, :]))
        lhs = out_shock + out_exit
        f_shock = np.sum(-fhat_y[0, :] * tw)
        f_wall = np.sum(fhat_t[:, -1] * yw)
        f_exit = np.sum(0.5 * (fhat_y[-1, :] + fhat_y[-2, :]) * tw)
        assert abs(lhs - (f_shock + f_wall + f_exit)) < 1e-10


class TestSolveSwirl:
    def test_homogeneous_identically_zero(self):
        grid = FlattenedGrid(17, 9)
        shock = ShockCurve.flat(9)
        prob = EllipticProblem("swirl", shock_neumann=np.zeros(9))
        psi, stats = solve_swirl(prob, grid, shock)
        assert np.all(psi == 0.0)

    def test_mms_second_order(self):
        errs = [mms_swirl(n, (n + 1) // 2)[0] for n in (33, 65, 129)]
        assert errs[0] / errs[1] == pytest.approx(4.0, abs=0.6)
        assert errs[1] / errs[2] == pytest.approx(4.0, abs=0.6)

    def test_dirichlet_walls(self):
        _, _, psi = mms_swirl(33, 17)
        assert np.all(psi[:, 0] == 0.0)
        assert np.all(psi[:, -1] == 0.0)

    def test_axis_second_derivative_vanishes_under_refinement(self):
        vals = []
        for n in (33, 65, 129):
            _, _, psi = mms_swirl(n, (n + 1) // 2)
            ht = 1.0 / ((n + 1) // 2 - 1)
            d2 = (psi[:, 2] - 2.0 * psi[:, 1] + psi[:, 0]) / ht**2
            vals.append(np.max(np.abs(d2)))
        assert vals[2] < vals[1] < vals[0]
        assert vals[0] / vals[2] > 3.0
