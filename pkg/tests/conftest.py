"""Shared fixtures: small grids and the cached small-data trajectory ladder."""

import numpy as np
import pytest

from mhdlab import (
    DomainConfig,
    Field,
    Grid,
    SolverConfig,
    run_trajectory,
    state_from_tangential,
)


def make_grid(nx=32, nz=64, zmax=10.0, stretch=2.0, ell=1.0, nu=0.05, mu=0.04, eps=0.0, **kw):
    return Grid(DomainConfig(Nx=nx, Nz=nz, Zmax=zmax, stretch=stretch, ell=ell,
                             nu=nu, mu=mu, eps=eps, **kw))


def single_mode_field(grid, kind="sin", mode=1, profile=None):
    cfg = grid.config
    x = np.arange(cfg.Nx) * (cfg.Lx / cfg.Nx)
    tang = np.sin(2 * np.pi * mode * x / cfg.Lx) if kind == "sin" else np.cos(2 * np.pi * mode * x / cfg.Lx)
    prof = profile(grid.z_levels) if profile is not None else np.exp(-grid.z_levels)
    return Field.from_physical(grid, tang[:, None] * prof[None, :])


def small_data_state(grid, amp=0.01):
    """u0 = amp sin(x) z e^{-z^2}, f0 = amp cos(x) e^{-z^2}: the standard fixture."""
    z = grid.z_levels
    u = single_mode_field(grid, "sin", 1, lambda zz: zz * np.exp(-(zz**2))) * amp
    f = single_mode_field(grid, "cos", 1, lambda zz: np.exp(-(zz**2))) * amp
    return state_from_tangential(0.0, (u,), (f,))


def small_data_trajectory(rung=0, T=0.08, with_aux=True, eps=0.0, nu=0.05, mu=0.04,
                          checkpoint_every=1, amp=0.01, nz=None, dt=None):
    """Rung r of the refinement ladder: Nz = 32 * 2^r, dt = 8e-3 / 2^r."""
    nz = 32 * (2**rung) if nz is None else nz
    dt = 8e-3 / (2**rung) if dt is None else dt
    grid = make_grid(nx=32, nz=nz, zmax=8.0, stretch=2.0, nu=nu, mu=mu, eps=eps)
    scfg = SolverConfig(dt=dt, T_final=T, checkpoint_every=checkpoint_every)
    return run_trajectory(small_data_state(grid, amp=amp), scfg, with_aux=with_aux)


@pytest.fixture(scope="session")
def traj_ladder():
    """Three rungs of the small-data run with auxiliary advance, reused broadly."""
    return [small_data_trajectory(rung=r) for r in range(3)]


@pytest.fixture(scope="session")
def traj_dt_ladder():
    """dt-halving ladder at a fixed spatial grid (Nz = 64)."""
    return [small_data_trajectory(nz=64, dt=d) for d in (8e-3, 4e-3, 2e-3)]


@pytest.fixture(scope="session")
def traj_rung0(traj_ladder):
    return traj_ladder[0]
