"""Physical unknowns and their structural constraints.

Only the tangential components (u in 2D; u, v in 3D, and likewise f, g for
the magnetic part) are prognostic.  The normal components w and h are never
stepped: they are reconstructed from the divergence-free condition as
``w = -int_0^z div_h u_h`` so that w(z=0) = 0 holds exactly by construction.

Wall conditions: u_h = 0 and w = 0 at z = 0, dz f_h = 0 and h = 0 at z = 0.
The truncated far field imposes u_h = 0 (Dirichlet) and dz f_h = 0
(Neumann, via the one-sided second-order stencil) at z = Zmax.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grid import (
    Field,
    Grid,
    ddx_spectral,
    ddz_fd,
    d2dz2_fd,
    integrate_z_cumulative,
    multiply,
    tangential_derivative,
)

__all__ = [
    "State",
    "NonlinearFields",
    "reconstruct_normal",
    "apply_boundary_conditions",
    "nonlinear_xi_eta",
    "initial_time_derivative",
    "state_from_tangential",
    "divergence_residual",
    "validate_compatibility",
    "IncompatibleDataError",
]


class IncompatibleDataError(ValueError):
    """Initial data violating the wall compatibility conditions."""


@dataclass
class State:
    """Snapshot of the unknowns at one time: prognostic u_h, f_h; derived w, h."""

    t: float
    u_h: tuple[Field, ...]
    f_h: tuple[Field, ...]
    w: Field
    h: Field

    @property
    def grid(self) -> Grid:
        return self.u_h[0].grid


@dataclass
class NonlinearFields:
    """The magnetic-convection fields xi = (f.grad)f_h and eta = (f.grad)u_h."""

    xi: tuple[Field, ...]
    eta: tuple[Field, ...]


def reconstruct_normal(components: tuple[Field, ...]) -> Field:
    """Normal component from tangential ones: -int_0^z sum_d d_{x_d} a_d dz'."""
    g = components[0].grid
    div = tangential_derivative(components[0], 0).data
    if g.dim == 3:
        div = div + tangential_derivative(components[1], 1).data
    return Field(g, -integrate_z_cumulative(Field(g, div)).data)


def _enforce_dirichlet(a: Field) -> Field:
    d = a.data.copy()
    d[..., 0] = 0.0
    d[..., -1] = 0.0
    return Field(a.grid, d)


def _enforce_neumann(a: Field) -> Field:
    # ghost-free: overwrite the wall value so the one-sided second-order
    # stencil for dz evaluates to zero there; interior values untouched
    g = a.grid
    d = a.data.copy()
    rb = g.d1_row_bot
    rt = g.d1_row_top
    d[..., 0] = -(rb[1] * d[..., 1] + rb[2] * d[..., 2]) / rb[0]
    d[..., -1] = -(rt[0] * d[..., -3] + rt[1] * d[..., -2]) / rt[2]
    return Field(g, d)


def apply_boundary_conditions(state: State) -> State:
    """Enforce the wall and far-field conditions, then refresh w and h."""
    u_h = tuple(_enforce_dirichlet(u) for u in state.u_h)
    f_h = tuple(_enforce_neumann(f) for f in state.f_h)
    return State(
        t=state.t,
        u_h=u_h,
        f_h=f_h,
        w=reconstruct_normal(u_h),
        h=reconstruct_normal(f_h),
    )


def state_from_tangential(
    t: float,
    u_h: tuple[Field, ...],
    f_h: tuple[Field, ...],
    enforce_bc: bool = True,
) -> State:
    g = u_h[0].grid
    expected = g.dim - 1
    if len(u_h) != expected or len(f_h) != expected:
        raise ValueError(f"need {expected} tangential components in {g.dim}D")
    s = State(t=t, u_h=u_h, f_h=f_h, w=reconstruct_normal(u_h), h=reconstruct_normal(f_h))
    return apply_boundary_conditions(s) if enforce_bc else s


def zero_state(grid: Grid, t: float = 0.0) -> State:
    n = grid.dim - 1
    return state_from_tangential(
        t,
        tuple(Field.zeros(grid) for _ in range(n)),
        tuple(Field.zeros(grid) for _ in range(n)),
        enforce_bc=False,
    )


def grad_dot(f_h: tuple[Field, ...], h: Field, a: Field) -> Field:
    """(f dx + g dy + h dz) a with dealiased products."""
    g = a.grid
    out = multiply(f_h[0], ddx_spectral(a))
    if g.dim == 3:
        out = out + multiply(f_h[1], tangential_derivative(a, 1))
    return out + multiply(h, ddz_fd(a))


def nonlinear_xi_eta(state: State) -> NonlinearFields:
    """xi_i = (f.grad) f_i, eta_i = (f.grad) u_i; identically zero when f_h = 0."""
    xi = tuple(grad_dot(state.f_h, state.h, f) for f in state.f_h)
    eta = tuple(grad_dot(state.f_h, state.h, u) for u in state.u_h)
    return NonlinearFields(xi=xi, eta=eta)


def initial_time_derivative(
    state: State, order: int = 1, eps: float = 0.0
) -> tuple[tuple[Field, ...], tuple[Field, ...]]:
    """First time derivative by substituting the right sides of the system.

    du/dt = nu dz^2 u - (u.grad)u + (f.grad)f  (+ eps tangential Laplacian
    when the regularized system is the one being run), and the f analog.
    Higher orders are left to checkpoint differencing in the norm module.
    """
    if order != 1:
        raise ValueError(f"only order = 1 is supported here, got {order}")
    g = state.grid
    cfg = g.config
    nl = nonlinear_xi_eta(state)
    du, df = [], []
    for i, u in enumerate(state.u_h):
        adv = grad_dot(state.u_h, state.w, u)
        visc = Field(g, cfg.nu * d2dz2_fd(u).data)
        if eps > 0:
            visc = visc + _tangential_laplacian(u, eps)
        du.append(visc - adv + nl.xi[i])
    for i, f in enumerate(state.f_h):
        adv = grad_dot(state.u_h, state.w, f)
        visc = Field(g, cfg.mu * d2dz2_fd(f).data)
        if eps > 0:
            visc = visc + _tangential_laplacian(f, eps)
        df.append(visc - adv + nl.eta[i])
    return tuple(du), tuple(df)


def _tangential_laplacian(a: Field, eps: float) -> Field:
    out = Field(a.grid, eps * ddx_spectral(a, 2).data)
    if a.grid.dim == 3:
        out = out + Field(a.grid, eps * tangential_derivative(a, 1, 2).data)
    return out


def divergence_residual(state: State, magnetic: bool = False) -> float:
    """Relative defect of the compatible discrete divergence.

    Pairs the trapezoid reconstruction with its exact discrete inverse: on
    each interval, (w_{j+1} - w_j)/dz_j must equal minus the midpoint
    average of div_h u_h.  With w reconstructed this holds to roundoff.
    ``magnetic=True`` checks the (f_h, h) pair instead.
    """
    g = state.grid
    tang = state.f_h if magnetic else state.u_h
    normal = state.h if magnetic else state.w
    div = tangential_derivative(tang[0], 0).data
    if g.dim == 3:
        div = div + tangential_derivative(tang[1], 1).data
    dz = np.diff(g.z_levels)
    dw = np.diff(normal.data, axis=-1) / dz
    avg = 0.5 * (div[..., :-1] + div[..., 1:])
    num = np.abs(dw + avg).max()
    den = max(np.abs(dw).max(), np.abs(avg).max(), 1e-300)
    return float(num / den)


def validate_compatibility(state: State, tol: float = 1e-8) -> None:
    """Hard error unless u_h(0) = 0 and dz f_h(0) = 0 hold on the grid."""
    for name, comp in zip(("u", "v"), state.u_h):
        scale = max(np.abs(comp.data).max(), 1e-300)
        wall = np.abs(comp.data[..., 0]).max()
        if wall > tol * scale:
            raise IncompatibleDataError(
                f"initial {name} violates {name}|_z=0 = 0: wall magnitude {wall:.3e}"
            )
    for name, comp in zip(("f", "g"), state.f_h):
        scale = max(np.abs(comp.data).max(), 1e-300)
        dzf = ddz_fd(comp).data[..., 0]
        wall = np.abs(dzf).max()
        if wall > tol * scale:
            raise IncompatibleDataError(
                f"initial {name} violates dz {name}|_z=0 = 0: wall slope {wall:.3e}"
            )
