"""Auxiliary fields of the cancellation apparatus.

The linear problem is posed on V = int_0^z U dz' rather than on U itself:
V = 0 at the wall is then forced by the definition, and the wall condition
dz U = 0 is consistent automatically (at z = 0 the transport coefficients
vanish and V = 0 pins dz^2 V there); it is monitored, never imposed.  The
truncated far field takes homogeneous Neumann for V at Zmax, i.e. U = 0
there -- a convergence parameter of the truncation, not a statement about
the half-line problem.

V is advanced in lockstep with the main solver by the same IMEX scheme with
transport coefficients and forcing -d_x w frozen at the step's initial
state.  U = dz V, and

    lambda = d_x u - (dz u) V,     delta = d_x f - (dz f) V,

with the eight directional combinations in 3D.  At t = 0 these reduce to
d_x u_0 and d_x f_0 exactly because V starts at zero.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import comb

import numpy as np

from .grid import (
    Field,
    Grid,
    d2dz2_fd,
    ddz_fd,
    interior_l2_norm,
    multiply,
    tangential_derivative,
)
from .series import time_derivative_at
from .solver import SolverConfig, Trajectory, implicit_z_solve
from .state import State, nonlinear_xi_eta

__all__ = [
    "AuxState",
    "initial_aux",
    "advance_U",
    "compute_lambda_delta",
    "u_equation_residual",
    "psi_m_residual",
]


@dataclass
class AuxState:
    """U, its wall integral V, and the derived lambda/delta families."""

    t: float
    U: tuple[Field, ...]
    V: tuple[Field, ...]
    lam: tuple[Field, ...]
    delta: tuple[Field, ...]

    @property
    def grid(self) -> Grid:
        return self.V[0].grid


def initial_aux(grid: Grid) -> AuxState:
    n = grid.dim - 1
    zeros = tuple(Field.zeros(grid) for _ in range(n))
    nfam = 1 if grid.dim == 2 else 4
    return AuxState(
        t=0.0,
        U=zeros,
        V=tuple(Field.zeros(grid) for _ in range(n)),
        lam=tuple(Field.zeros(grid) for _ in range(nfam)),
        delta=tuple(Field.zeros(grid) for _ in range(nfam)),
    )


def _transport(state: State, a: Field) -> Field:
    """(u dx + v dy + w dz) a with dealiased products."""
    out = multiply(state.u_h[0], tangential_derivative(a, 0))
    if state.grid.dim == 3:
        out = out + multiply(state.u_h[1], tangential_derivative(a, 1))
    return out + multiply(state.w, ddz_fd(a))


def advance_U(
    aux: AuxState,
    state_now: State,
    state_next: State,
    dt: float,
    solver_config: SolverConfig,
) -> AuxState:
    """One lockstep IMEX step of the V problem per tangential direction."""
    if abs(aux.t - state_now.t) > 1e-10 * max(1.0, abs(state_now.t)):
        raise ValueError(f"aux at t = {aux.t} desynchronized from state at t = {state_now.t}")
    g = aux.grid
    nu = g.config.nu
    new_V = []
    for d, V in enumerate(aux.V):
        forcing = -tangential_derivative(state_now.w, d)

        def rhs(vv: Field) -> Field:
            out = forcing - _transport(state_now, vv)
            if not solver_config.imex:
                out = out + Field(g, nu * d2dz2_fd(vv).data)
            return out

        k1 = rhs(V)
        v_mid = V + (0.5 * dt) * k1
        k2 = rhs(v_mid)
        v_star = V + dt * k2
        if solver_config.imex:
            v_new = Field(g, implicit_z_solve(g, v_star.data, nu * dt, "mixed"))
        else:
            v_new = v_star
            dat = v_new.data.copy()
            dat[..., 0] = 0.0
            v_new = Field(g, dat)
        new_V.append(v_new)
    new_V = tuple(new_V)
    return AuxState(
        t=state_next.t,
        U=tuple(ddz_fd(v) for v in new_V),
        V=new_V,
        lam=aux.lam,
        delta=aux.delta,
    )


def compute_lambda_delta(state: State, aux: AuxState) -> AuxState:
    """lambda = d_d a - (dz a) V_d for a in the velocity components, delta for magnetic."""
    if abs(aux.t - state.t) > 1e-10 * max(1.0, abs(state.t)):
        raise ValueError(f"aux at t = {aux.t} desynchronized from state at t = {state.t}")

    def family(components: tuple[Field, ...]) -> tuple[Field, ...]:
        out = []
        for comp in components:
            dz_comp = ddz_fd(comp)
            for d, V in enumerate(aux.V):
                out.append(tangential_derivative(comp, d) - multiply(dz_comp, V))
        return tuple(out)

    return AuxState(
        t=aux.t,
        U=aux.U,
        V=aux.V,
        lam=family(state.u_h),
        delta=family(state.f_h),
    )


def _u_equation_residual_field(state: State, aux: AuxState, dU_dt: Field, d: int) -> Field:
    """Residual of the derived U_d evolution equation at one snapshot."""
    g = state.grid
    nu = g.config.nu
    U = aux.U[d]
    V = aux.V[d]
    lhs = dU_dt + _transport(state, U) - Field(g, nu * d2dz2_fd(U).data)
    div_u = tangential_derivative(state.u_h[0], 0)
    rhs = tangential_derivative(aux.lam[d], 0)
    dz_chain = ddz_fd(tangential_derivative(state.u_h[0], 0))
    if g.dim == 3:
        rhs = rhs + tangential_derivative(aux.lam[2 + d], 1)
        div_u = div_u + tangential_derivative(state.u_h[1], 1)
        dz_chain = dz_chain + ddz_fd(tangential_derivative(state.u_h[1], 1))
    rhs = rhs + multiply(dz_chain, V) + multiply(div_u, U)
    return lhs - rhs


def u_equation_residual(traj: Trajectory, aux_traj=None) -> list[tuple[float, float]]:
    """Per-checkpoint L2 residual of the derived U equation."""
    aux_list = traj.aux if aux_traj is None else aux_traj
    if aux_list is None:
        raise ValueError("trajectory carries no auxiliary data")
    if len(traj.times) < 3:
        raise ValueError("need at least 3 checkpoints for the time derivative")
    n_dir = traj.states[0].grid.dim - 1
    out = []
    for i, (t, state, aux) in enumerate(zip(traj.times, traj.states, aux_list)):
        total = 0.0
        for d in range(n_dir):
            dU = time_derivative_at(traj.times, [a.U[d] for a in aux_list], i)
            total += interior_l2_norm(_u_equation_residual_field(state, aux, dU, d)) ** 2
        out.append((t, float(np.sqrt(total))))
    return out


def _psi_m(state: State, aux: AuxState, m: int) -> Field:
    u = state.u_h[0]
    return tangential_derivative(u, 0, m) - multiply(ddz_fd(u), tangential_derivative(aux.V[0], 0, m - 1))


def _psi_m_rhs(state: State, aux: AuxState, m: int) -> Field:
    """d_x^m xi + F_m - L_m - (dz xi) d_x^(m-1) V, Leibniz sums written literally."""
    g = state.grid
    nu = g.config.nu
    u = state.u_h[0]
    w = state.w
    V = aux.V[0]
    U = aux.U[0]
    xi = nonlinear_xi_eta(state).xi[0]
    dz_u = ddz_fd(u)

    rhs = tangential_derivative(xi, 0, m)
    # F_m
    for j in range(1, m + 1):
        rhs = rhs - comb(m, j) * multiply(
            tangential_derivative(u, 0, j), tangential_derivative(u, 0, m - j + 1)
        )
    for j in range(1, m):
        rhs = rhs - comb(m, j) * multiply(
            tangential_derivative(w, 0, j), ddz_fd(tangential_derivative(u, 0, m - j))
        )
    # -L_m
    inner = None
    for j in range(1, m):
        term = multiply(tangential_derivative(u, 0, j), tangential_derivative(V, 0, m - j)) + multiply(
            tangential_derivative(w, 0, j), tangential_derivative(U, 0, m - 1 - j)
        )
        inner = term if inner is None else inner + term
    if inner is not None:
        rhs = rhs + multiply(dz_u, inner)
    rhs = rhs + 2.0 * nu * multiply(d2dz2_fd(u), tangential_derivative(U, 0, m - 1))
    # -(dz xi) d_x^(m-1) V
    rhs = rhs - multiply(ddz_fd(xi), tangential_derivative(V, 0, m - 1))
    return rhs


def psi_m_residual(traj: Trajectory, aux_traj=None, m: int = 1) -> list[tuple[float, float]]:
    """Residual of the psi_m evolution equation, m in 1..3 (2D trajectories)."""
    if not (1 <= m <= 3):
        raise ValueError(f"m must lie in 1..3, got {m}")
    aux_list = traj.aux if aux_traj is None else aux_traj
    if aux_list is None:
        raise ValueError("trajectory carries no auxiliary data")
    if traj.states[0].grid.dim != 2:
        raise ValueError("psi_m residuals are defined for 2D trajectories")
    if len(traj.times) < 3:
        raise ValueError("need at least 3 checkpoints for the time derivative")
    g = traj.states[0].grid
    nu = g.config.nu
    psis = [_psi_m(s, a, m) for s, a in zip(traj.states, aux_list)]
    out = []
    for i, (t, state, aux) in enumerate(zip(traj.times, traj.states, aux_list)):
        dpsi = time_derivative_at(traj.times, psis, i)
        lhs = dpsi + _transport(state, psis[i]) - Field(g, nu * d2dz2_fd(psis[i]).data)
        res = lhs - _psi_m_rhs(state, aux, m)
        out.append((t, interior_l2_norm(res)))
    return out
