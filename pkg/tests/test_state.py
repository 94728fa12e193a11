"""State construction, reconstruction, boundary conditions, coupling fields."""

import numpy as np
import pytest

from mhdlab import (
    Field,
    IncompatibleDataError,
    SolverConfig,
    apply_boundary_conditions,
    ddx_spectral,
    ddz_fd,
    imex_step,
    initial_time_derivative,
    nonlinear_xi_eta,
    reconstruct_normal,
    state_from_tangential,
    validate_compatibility,
    zero_state,
)
from mhdlab.grid import dealias, l2_norm
from mhdlab.state import divergence_residual

from conftest import make_grid, single_mode_field, small_data_state


class TestReconstructNormal:
    def test_zero_gives_zero(self):
        g = make_grid()
        w = reconstruct_normal((Field.zeros(g),))
        assert np.abs(w.data).max() == 0.0

    def test_x_independent_gives_zero(self):
        g = make_grid()
        u = Field.from_physical(g, np.broadcast_to(g.z_levels * np.exp(-g.z_levels), g.shape).copy())
        assert np.abs(reconstruct_normal((u,)).data).max() == 0.0

    def test_matches_analytic_integral(self):
        # u = sin(kx) z^2 e^-z  =>  w = -k cos(kx) int_0^z s^2 e^-s ds
        errs = []
        for nz in (64, 128):
            g = make_grid(nz=nz, stretch=1.0, zmax=12.0)
            z = g.z_levels
            x = np.arange(g.config.Nx) * (g.config.Lx / g.config.Nx)
            k = 2 * 2 * np.pi / g.config.Lx
            u = Field.from_physical(g, np.sin(k * x)[:, None] * (z**2 * np.exp(-z))[None, :])
            exact_int = 2.0 - np.exp(-z) * (z**2 + 2 * z + 2.0)
            expect = -k * np.cos(k * x)[:, None] * exact_int[None, :]
            errs.append(np.abs(reconstruct_normal((u,)).physical() - expect).max())
        assert errs[0] / errs[1] > 3.5
        assert errs[1] < 2.5e-4 * np.abs(expect).max()

    def test_linearity(self):
        g = make_grid()
        u1 = single_mode_field(g, "sin", 1)
        u2 = single_mode_field(g, "cos", 3, lambda z: z * np.exp(-z))
        w1 = reconstruct_normal((u1,))
        w2 = reconstruct_normal((u2,))
        wc = reconstruct_normal((2.5 * u1 + (-1.25) * u2,))
        combo = 2.5 * w1.data - 1.25 * w2.data
        scale = max(np.abs(combo).max(), 1e-300)
        assert np.abs(wc.data - combo).max() <= 1e-12 * scale

    def test_discrete_divergence_free(self):
        state = small_data_state(make_grid())
        assert divergence_residual(state) <= 1e-8
        assert divergence_residual(state, magnetic=True) <= 1e-8

    def test_divergence_free_3d(self):
        g = make_grid(nx=16, nz=32, dim=3, Ny=16, Ly=2 * np.pi)
        rng = np.random.default_rng(5)
        u = dealias(Field.from_physical(g, rng.standard_normal(g.shape)))
        v = dealias(Field.from_physical(g, rng.standard_normal(g.shape)))
        s = state_from_tangential(0.0, (u, v), (Field.zeros(g), Field.zeros(g)), enforce_bc=False)
        assert divergence_residual(s) <= 1e-8


class TestBoundaryConditions:
    def test_idempotent(self):
        s = small_data_state(make_grid())
        s2 = apply_boundary_conditions(s)
        for a, b in zip(s.u_h + s.f_h, s2.u_h + s2.f_h):
            scale = max(np.abs(a.data).max(), 1e-300)
            assert np.abs(a.data - b.data).max() <= 1e-14 * scale

    def test_dirichlet_overwrites_wall_only(self):
        g = make_grid()
        raw = single_mode_field(g, "sin", 1, lambda z: np.exp(-z))  # u(0) = sin(x) != 0
        raw = Field(g, raw.data.copy())
        phys_before = raw.physical()
        s = state_from_tangential(0.0, (raw,), (Field.zeros(g),))
        phys_after = s.u_h[0].physical()
        assert np.abs(phys_after[:, 0]).max() < 1e-14
        assert np.abs(phys_after[:, -1]).max() < 1e-14
        assert np.abs(phys_after[:, 1:-1] - phys_before[:, 1:-1]).max() < 1e-14

    def test_neumann_from_linear_profile(self):
        g = make_grid()
        f = single_mode_field(g, "cos", 1, lambda z: 1.0 + 0.7 * z)  # slope 0.7 at the wall
        s = state_from_tangential(0.0, (Field.zeros(g),), (f,))
        slope = ddz_fd(s.f_h[0]).physical()
        scale = np.abs(s.f_h[0].physical()).max()
        assert np.abs(slope[:, 0]).max() <= 1e-10 * scale
        assert np.abs(slope[:, -1]).max() <= 1e-10 * scale

    def test_wall_invariants_after_bc(self):
        s = small_data_state(make_grid())
        for comp in s.u_h:
            assert np.abs(comp.data[..., 0]).max() == 0.0
        assert np.abs(s.w.data[..., 0]).max() == 0.0
        assert np.abs(s.h.data[..., 0]).max() == 0.0


class TestNonlinearXiEta:
    def test_zero_magnetic_gives_zero(self):
        g = make_grid()
        s = state_from_tangential(0.0, (single_mode_field(g, "sin", 1),), (Field.zeros(g),))
        nl = nonlinear_xi_eta(s)
        assert np.abs(nl.xi[0].data).max() == 0.0
        assert np.abs(nl.eta[0].data).max() == 0.0

    def test_x_independent_gives_zero(self):
        g = make_grid()
        prof = Field.from_physical(g, np.broadcast_to(np.exp(-g.z_levels**2), g.shape).copy())
        uprof = Field.from_physical(
            g, np.broadcast_to(g.z_levels * np.exp(-g.z_levels**2), g.shape).copy()
        )
        s = state_from_tangential(0.0, (uprof,), (prof,))
        nl = nonlinear_xi_eta(s)
        assert np.abs(nl.xi[0].data).max() < 1e-16
        assert np.abs(nl.eta[0].data).max() < 1e-16

    def test_matches_pointwise_product_oracle(self):
        # same grid factors multiplied pointwise, projected on retained modes
        g = make_grid(nx=64, nz=48)
        f = single_mode_field(g, "sin", 2, lambda z: np.exp(-(z**2)))
        u = single_mode_field(g, "cos", 3, lambda z: z * np.exp(-z))
        s = state_from_tangential(0.0, (u,), (f,))
        nl = nonlinear_xi_eta(s)
        fp = s.f_h[0].physical()
        hp = s.h.physical()
        oracle_eta = fp * ddx_spectral(s.u_h[0]).physical() + hp * ddz_fd(s.u_h[0]).physical()
        oracle = dealias(Field.from_physical(g, oracle_eta))
        scale = max(np.abs(oracle.data).max(), 1e-300)
        assert np.abs(nl.eta[0].data - oracle.data).max() <= 1e-8 * scale


class TestInitialTimeDerivative:
    def test_zero_state(self):
        g = make_grid()
        du, df = initial_time_derivative(zero_state(g))
        assert np.abs(du[0].data).max() == 0.0
        assert np.abs(df[0].data).max() == 0.0

    def test_zero_velocity_reduces_to_xi(self):
        g = make_grid()
        f = single_mode_field(g, "cos", 1, lambda z: np.exp(-(z**2)))
        s = state_from_tangential(0.0, (Field.zeros(g),), (f,))
        du, _ = initial_time_derivative(s)
        xi = nonlinear_xi_eta(s).xi[0]
        scale = max(np.abs(xi.data).max(), 1e-300)
        assert np.abs(du[0].data - xi.data).max() <= 1e-13 * scale

    def test_rejects_higher_order(self):
        g = make_grid()
        with pytest.raises(ValueError, match="order"):
            initial_time_derivative(zero_state(g), order=2)

    def test_one_step_finite_difference_oracle(self):
        # data compatible to first order at the wall (xi and nu dz^2 u vanish
        # there), so the pinned boundary rows leave no dt-independent floor
        g = make_grid(nz=96)
        u = single_mode_field(g, "sin", 1, lambda z: z * np.exp(-(z**2))) * 0.02
        f = single_mode_field(g, "cos", 1, lambda z: z**2 * np.exp(-(z**2))) * 0.02
        s = state_from_tangential(0.0, (u,), (f,))
        du, _ = initial_time_derivative(s)
        errs = []
        for dt in (2e-4, 1e-4):
            scfg = SolverConfig(dt=dt, T_final=dt)
            s1 = imex_step(s, dt, scfg)
            fd = (s1.u_h[0].data - s.u_h[0].data) / dt
            diff = fd - du[0].data
            # boundary rows enforce the BCs instead of the PDE; compare interior
            errs.append(np.abs(diff[:, 1:-1]).max())
        assert errs[0] / errs[1] > 1.5  # first order in dt


class TestCompatibility:
    def test_accepts_compatible_data(self):
        validate_compatibility(small_data_state(make_grid()))

    def test_rejects_slipping_velocity(self):
        g = make_grid()
        u = single_mode_field(g, "sin", 1, lambda z: np.exp(-z))  # u(0) != 0
        s = state_from_tangential(0.0, (u,), (Field.zeros(g),), enforce_bc=False)
        with pytest.raises(IncompatibleDataError, match="u"):
            validate_compatibility(s)

    def test_rejects_sloped_magnetic_wall(self):
        g = make_grid()
        f = single_mode_field(g, "cos", 1, lambda z: np.exp(-z))  # dz f(0) != 0
        s = state_from_tangential(0.0, (Field.zeros(g),), (f,), enforce_bc=False)
        with pytest.raises(IncompatibleDataError, match="f"):
            validate_compatibility(s)


class TestRecipes:
    def test_named_families_build_compatible_states(self):
        from mhdlab import InitialRecipe

        g = make_grid(nx=32, nz=48)
        for fam, kw in [("zero", {}), ("single_mode", {"mode": 2, "profile_u": "layer", "profile_f": "sech"})]:
            s = InitialRecipe(family=fam, **kw).build(g)
            validate_compatibility(s)

    def test_mode_outside_dealiased_band_rejected(self):
        from mhdlab import InitialRecipe

        g = make_grid(nx=32, nz=48)
        with pytest.raises(ValueError, match="dealiased band"):
            InitialRecipe(mode=11).build(g)  # Nx//3 = 10

    def test_unknown_profile_rejected(self):
        from mhdlab import InitialRecipe

        with pytest.raises(ValueError, match="profile_f"):
            InitialRecipe(profile_f="linear")

    def test_amplitude_range_enforced(self):
        from mhdlab import InitialRecipe

        with pytest.raises(ValueError, match="amplitude"):
            InitialRecipe(amplitude_u=50.0)


def test_ddy_requires_3d():
    from mhdlab import ddy_spectral

    g = make_grid()
    with pytest.raises(ValueError, match="3D"):
        ddy_spectral(single_mode_field(g))
