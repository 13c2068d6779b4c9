"""Stream-function transport oracles: closed-form quadratures, background
exactness, monotonicity, and the divergence-free conservation identity."""

import numpy as np
import pytest

from cylshock import REF, DegeneracyError
from cylshock.geometry import FlattenedGrid, ShockCurve
from cylshock.transport import (
    MassFlux,
    mass_flux,
    stream_function,
    trace_to_shock,
    transport_from_shock,
)


def background_fields(grid):
    shape = (grid.n_y, grid.n_t)
    return (
        np.full(shape, REF.s0p),
        np.zeros(shape),
        np.zeros(shape),
        np.zeros(shape),
    )


class TestMassFlux:
    def test_background_values(self):
        grid = FlattenedGrid(17, 13)
        shock = ShockCurve.flat(13)
        S, phi, psi, lam = background_fields(grid)
        flux = mass_flux(S, phi, psi, lam, grid, shock, REF)
        # rho0+ u0+ = (8/3)(3/4) = 2 under the reference background
        assert np.max(np.abs(flux.n_y_flux - 2.0)) < 1e-12
        assert np.max(np.abs(flux.n_t_flux)) < 1e-12

    def test_boundary_rows_exactly_zero(self):
        grid = FlattenedGrid(17, 13)
        shock = ShockCurve.flat(13)
        S, phi, psi, lam = background_fields(grid)
        yy, tt = grid.mesh()
        phi = phi + 0.01 * np.cos(np.pi * yy) * (1 - tt**2) ** 2
        flux = mass_flux(S, phi, psi, lam, grid, shock, REF)
        assert np.all(flux.n_t_flux[:, 0] == 0.0)
        assert np.all(flux.n_t_flux[:, -1] == 0.0)

    def test_floor_raises(self):
        grid = FlattenedGrid(17, 13)
        shock = ShockCurve.flat(13)
        S, phi, psi, lam = background_fields(grid)
        yy, _ = grid.mesh()
        # d_x phi ~ -0.7 u0p: the flux H q_x drops to ~0.7, under the floor 1.0
        phi = phi - 0.7 * REF.u0p * yy
        with pytest.raises(DegeneracyError):
            mass_flux(S, phi, psi, lam, grid, shock, REF)


class TestStreamFunction:
    def test_background_closed_form(self):
        grid = FlattenedGrid(17, 13)
        flux = MassFlux(np.full((17, 13), 2.0), np.zeros((17, 13)))
        trace = stream_function(flux, grid)
        # w = int_0^t 2 z dz = t^2 exactly (trapezoid is exact on linears)
        assert np.max(np.abs(trace.w - grid.t[None, :] ** 2)) < 1e-14
        assert np.max(np.abs(trace.g_table - grid.t**2)) < 1e-14

    def test_linear_flux_quadrature_order(self):
        errs = []
        for n_t in (17, 33, 65):
            grid = FlattenedGrid(9, n_t)
            n_y_flux = np.tile(2.0 + 0.5 * grid.t[None, :], (9, 1))
            trace = stream_function(MassFlux(n_y_flux, np.zeros((9, n_t))), grid)
            exact = grid.t**2 + 0.5 * grid.t**3 / 3.0
            errs.append(np.max(np.abs(trace.w - exact[None, :])))
        assert errs[0] / errs[1] == pytest.approx(4.0, abs=0.5)
        assert errs[1] / errs[2] == pytest.approx(4.0, abs=0.5)

    def test_total_flux_conservation_for_divergence_free_field(self):
        # M = ((1/r) d_r(r A_theta), -d_x A_theta) is divergence-free; the
        # cross-section integral w(y, 1) must then be y-independent to O(h^2)
        devs = []
        for n in (33, 65):
            n_t = (n + 1) // 2
            grid = FlattenedGrid(n, n_t)
            shock = ShockCurve.flat(n_t)
            yy, tt = grid.mesh()
            # A_theta = sin(pi y) t (1-t): M_x = 2 + sin(pi y)(2 - 3t),
            # M_r = -pi cos(pi y) t (1 - t); M_r = 0 at t = 0, 1
            mx = 2.0 + 0.2 * np.sin(np.pi * yy) * (2.0 - 3.0 * tt)
            mr = -0.2 * np.pi * np.cos(np.pi * yy) * tt * (1.0 - tt)
            flux = MassFlux(mx, mr)
            trace = stream_function(flux, grid)
            devs.append(np.max(np.abs(trace.w[:, -1] - trace.w[0, -1])))
        assert devs[0] / devs[1] > 3.0
        assert devs[1] < 1e-3


class TestTraceToShock:
    def test_background_identity(self):
        grid = FlattenedGrid(17, 13)
        flux = MassFlux(np.full((17, 13), 2.0), np.zeros((17, 13)))
        trace = stream_function(flux, grid)
        r_sh = trace_to_shock(trace)
        assert np.max(np.abs(r_sh - grid.t[None, :])) < 1e-13

    def test_boundary_streamlines(self):
        grid = FlattenedGrid(17, 13)
        n_y_flux = np.tile(2.0 + 0.3 * grid.t[None, :] ** 2, (17, 1))
        trace = stream_function(MassFlux(n_y_flux, np.zeros((17, 13))), grid)
        r_sh = trace_to_shock(trace)
        assert np.allclose(r_sh[:, 0], 0.0, atol=1e-15)
        assert np.allclose(r_sh[:, -1], 1.0, atol=1e-13)

    def test_monotone_in_t(self):
        grid = FlattenedGrid(17, 13)
        rng = np.random.default_rng(0)
        wiggle = 0.1 * rng.random((17, 1))
        n_y_flux = 2.0 + wiggle * np.sin(np.pi * grid.t[None, :])
        trace = stream_function(MassFlux(n_y_flux, np.zeros((17, 13))), grid)
        r_sh = trace_to_shock(trace)
        assert np.all(np.diff(r_sh, axis=1) > 0.0)

    def test_foot_ratio_bounds(self):
        # discrete form of the streamline-spread estimate: (1 - R)/(1 - t)
        # stays within the mass-flux ratio bounds
        grid = FlattenedGrid(17, 33)
        n_y_flux = np.tile(2.0 + 0.4 * np.sin(np.pi * grid.t[None, :]), (17, 1))
        trace = stream_function(MassFlux(n_y_flux, np.zeros((17, 33))), grid)
        r_sh = trace_to_shock(trace)
        mu = 2.0 / 2.4
        ratio = (1.0 - r_sh[:, :-1]) / (1.0 - grid.t[None, :-1])
        assert np.all(ratio > mu - 1e-9) and np.all(ratio < 1.0 / mu + 1e-9)

    def test_imbalance_error(self):
        grid = FlattenedGrid(17, 13)
        n_y_flux = np.full((17, 13), 2.0)
        n_y_flux[5:, :] *= 1.1  # columns carry 10% more flux than the shock
        trace = stream_function(MassFlux(n_y_flux, np.zeros((17, 13))), grid)
        with pytest.raises(DegeneracyError):
            trace_to_shock(trace)


class TestTransportFromShock:
    def grid_trace(self):
        grid = FlattenedGrid(17, 13)
        flux = MassFlux(np.full((17, 13), 2.0), np.zeros((17, 13)))
        trace = stream_function(flux, grid)
        return grid, trace_to_shock(trace)

    def test_constant_data(self):
        grid, r_sh = self.grid_trace()
        S, lam = transport_from_shock(
            np.full(13, REF.s0p), np.zeros(13), r_sh, grid.t
        )
        assert np.max(np.abs(S - REF.s0p)) < 1e-14
        assert np.max(np.abs(lam)) < 1e-15

    def test_shock_row_reproduces_data(self):
        grid, r_sh = self.grid_trace()
        rng = np.random.default_rng(1)
        data = REF.s0p + 0.01 * rng.random(13)
        S, _ = transport_from_shock(data, np.zeros(13), r_sh, grid.t)
        assert np.max(np.abs(S[0, :] - data)) < 1e-13

    def test_horizontal_streamlines_spread_data(self):
        grid, r_sh = self.grid_trace()
        data = REF.s0p + 0.02 * grid.t
        S, _ = transport_from_shock(data, np.zeros(13), r_sh, grid.t)
        assert np.max(np.abs(S - data[None, :])) < 1e-13

    def test_axis_swirl_zero(self):
        grid, r_sh = self.grid_trace()
        lam_data = 0.05 * grid.t**2 * (1 - grid.t**2)
        _, lam = transport_from_shock(np.full(13, REF.s0p), lam_data, r_sh, grid.t)
        assert np.allclose(lam[:, 0], 0.0, atol=1e-15)

    def test_no_new_extrema(self):
        grid = FlattenedGrid(17, 13)
        n_y_flux = np.tile(2.0 + 0.3 * np.cos(np.pi * grid.t[None, :]), (17, 1))
        r_sh = trace_to_shock(stream_function(MassFlux(n_y_flux, np.zeros((17, 13))), grid))
        rng = np.random.default_rng(2)
        data = REF.s0p + 0.05 * rng.random(13)
        S, _ = transport_from_shock(data, np.zeros(13), r_sh, grid.t)
        assert np.min(S) >= np.min(data) - 1e-13
        assert np.max(S) <= np.max(data) + 1e-13
