"""Numerical verification of the derived identities the scheme rests on.

The headline check is the coupled xi/eta system: the magnetic convection
fields satisfy evolution equations in which the derivative-losing term d_x w
drops out, with only controllable commutators left on the right side.  For
a trajectory of the eps-regularized flow the eps d_x^2 terms do not commute
through the products either; the literal commutator defect
-2 eps [(d_x f)(d_x^2 a) + (d_x h)(d_x d_z a)] is included so the residual
converges for eps > 0 runs as well and reduces to the bare identity at
eps = 0.

Tolerances are never bare constants: each report carries the refinement
metadata and a provenance note tying its threshold to a ladder prediction
or a stored regression fixture.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field

from .grid import (
    Field,
    d2dz2_fd,
    ddx_spectral,
    ddz_fd,
    inner_product,
    interior_l2_norm,
    l2_norm,
    multiply,
    tangential_derivative,
)
from .series import time_derivative_at
from .solver import Trajectory
from .state import State, grad_dot, nonlinear_xi_eta

__all__ = [
    "DiagnosticReport",
    "cancellation_inner_product",
    "xi_eta_equation_residual",
    "h_equation_residual",
    "energy_balance_report",
    "apriori_monitor",
    "write_diagnostic_csv",
]


@dataclass
class DiagnosticReport:
    name: str
    times: list[float] = dc_field(default_factory=list)
    residuals: list[float] = dc_field(default_factory=list)
    refinement: dict = dc_field(default_factory=dict)
    tolerance: float | None = None
    passed: bool | None = None
    provenance: str = ""

    @property
    def max_residual(self) -> float:
        return max(self.residuals) if self.residuals else 0.0

    def judge(self, tolerance: float, provenance: str) -> "DiagnosticReport":
        self.tolerance = tolerance
        self.provenance = provenance
        self.passed = all(r <= tolerance for r in self.residuals)
        return self


def _refinement_meta(traj: Trajectory) -> dict:
    cfg = traj.domain_config
    return {
        "Nx": cfg.Nx,
        "Nz": cfg.Nz,
        "dt": traj.solver_config.dt,
        "eps": cfg.eps,
    }


def cancellation_inner_product(state: State, phi: Field, weight_j: int = 0) -> float:
    """((f dx + h dz) <z>^(ell+j) phi, <z>^(ell+j) phi)_L2.

    Exactly zero (to roundoff) when f = 0 or when f is x-independent; for
    generic divergence-free (f, h) it converges to zero at second order in
    the normal spacing, the x-part being exact through Parseval.
    """
    g = state.grid
    wvec = (1.0 + g.z_levels**2) ** (0.5 * (g.config.ell + weight_j))
    wphi = Field(g, phi.data * wvec)
    return inner_product(grad_dot(state.f_h, state.h, wphi), wphi)


def _material(state: State, a: Field, da_dt: Field, zvisc: float, eps: float) -> Field:
    """(dt + u dx + w dz - eps dx^2 - zvisc dz^2) a for a given dt-estimate."""
    g = state.grid
    out = da_dt + grad_dot(state.u_h, state.w, a) - Field(g, zvisc * d2dz2_fd(a).data)
    if eps > 0:
        out = out - Field(g, eps * ddx_spectral(a, 2).data)
        if g.dim == 3:
            out = out - Field(g, eps * tangential_derivative(a, 1, 2).data)
    return out


def xi_eta_equation_residual(
    traj: Trajectory,
    coefficients: dict | None = None,
) -> tuple[DiagnosticReport, DiagnosticReport]:
    """L2 residuals of the derived eta and xi evolution equations per checkpoint.

    ``coefficients`` rescales individual right-side terms (keys "coupling",
    "two_nu", "mu_minus_nu", "two_mu", "eps_commutator", default 1.0) so a
    deliberately wrong identity can serve as a negative control.
    """
    if len(traj.times) < 3:
        raise ValueError("need at least 3 checkpoints")
    if traj.states[0].grid.dim != 2:
        raise ValueError("the xi/eta residual is formulated for 2D trajectories")
    c = {"coupling": 1.0, "two_nu": 1.0, "mu_minus_nu": 1.0, "two_mu": 1.0, "eps_commutator": 1.0}
    if coefficients:
        c.update(coefficients)
    g = traj.states[0].grid
    nu, mu, eps = g.config.nu, g.config.mu, g.config.eps
    nls = [nonlinear_xi_eta(s) for s in traj.states]
    etas = [nl.eta[0] for nl in nls]
    xis = [nl.xi[0] for nl in nls]
    rep_eta = DiagnosticReport(name="eta_equation", refinement=_refinement_meta(traj))
    rep_xi = DiagnosticReport(name="xi_equation", refinement=_refinement_meta(traj))
    for i, (t, state) in enumerate(zip(traj.times, traj.states)):
        u, f = state.u_h[0], state.f_h[0]
        dx_f, dz_f = ddx_spectral(f), ddz_fd(f)
        dx_u, dz_u = ddx_spectral(u), ddz_fd(u)
        dx_h = ddx_spectral(state.h)
        dzz_u, dzz_f = d2dz2_fd(u), d2dz2_fd(f)
        dxz_u, dxz_f = ddx_spectral(dz_u), ddx_spectral(dz_f)

        deta = time_derivative_at(traj.times, etas, i)
        lhs = _material(state, etas[i], deta, nu, eps)
        rhs = c["coupling"] * grad_dot(state.f_h, state.h, xis[i])
        rhs = rhs + (c["two_nu"] * 2.0 * nu) * (multiply(dx_f, dzz_u) - multiply(dz_f, dxz_u))
        rhs = rhs + (c["mu_minus_nu"] * (mu - nu)) * (multiply(dx_u, dzz_f) - multiply(dz_u, dxz_f))
        if eps > 0:
            rhs = rhs - (c["eps_commutator"] * 2.0 * eps) * (
                multiply(dx_f, ddx_spectral(u, 2)) + multiply(dx_h, dxz_u)
            )
        rep_eta.times.append(t)
        rep_eta.residuals.append(interior_l2_norm(lhs - rhs))

        dxi = time_derivative_at(traj.times, xis, i)
        lhs = _material(state, xis[i], dxi, mu, eps)
        rhs = c["coupling"] * grad_dot(state.f_h, state.h, etas[i])
        rhs = rhs + (c["two_mu"] * 2.0 * mu) * (multiply(dx_f, dzz_f) - multiply(dz_f, dxz_f))
        if eps > 0:
            rhs = rhs - (c["eps_commutator"] * 2.0 * eps) * (
                multiply(dx_f, ddx_spectral(f, 2)) + multiply(dx_h, dxz_f)
            )
        rep_xi.times.append(t)
        rep_xi.residuals.append(interior_l2_norm(lhs - rhs))
    return rep_eta, rep_xi


def h_equation_residual(traj: Trajectory) -> DiagnosticReport:
    """Residual of the normal magnetic component's own evolution equation.

    h is reconstructed from f, never stepped; its equation is an identity
    derived from the f equation, checked here at scheme order.  The eps
    term enters exactly as in the regularized system's third line.
    """
    if len(traj.times) < 3:
        raise ValueError("need at least 3 checkpoints")
    g = traj.states[0].grid
    mu, eps = g.config.mu, g.config.eps
    hs = [s.h for s in traj.states]
    rep = DiagnosticReport(name="h_equation", refinement=_refinement_meta(traj))
    for i, (t, state) in enumerate(zip(traj.times, traj.states)):
        dh = time_derivative_at(traj.times, hs, i)
        lhs = _material(state, state.h, dh, mu, eps)
        if g.dim == 2:
            rhs = multiply(state.f_h[0], ddx_spectral(state.w)) - multiply(
                state.h, ddx_spectral(state.u_h[0])
            )
        else:
            rhs = (
                multiply(state.f_h[0], tangential_derivative(state.w, 0))
                + multiply(state.f_h[1], tangential_derivative(state.w, 1))
                - multiply(state.h, tangential_derivative(state.u_h[0], 0))
                - multiply(state.h, tangential_derivative(state.u_h[1], 1))
            )
        rep.times.append(t)
        rep.residuals.append(interior_l2_norm(lhs - rhs))
    return rep


def _energy(state: State) -> float:
    return 0.5 * (
        sum(l2_norm(u) ** 2 for u in state.u_h) + sum(l2_norm(f) ** 2 for f in state.f_h)
    )


def _dissipation(state: State) -> float:
    g = state.grid
    nu, mu, eps = g.config.nu, g.config.mu, g.config.eps
    d = nu * sum(l2_norm(ddz_fd(u)) ** 2 for u in state.u_h)
    d += mu * sum(l2_norm(ddz_fd(f)) ** 2 for f in state.f_h)
    if eps > 0:
        for fl in (*state.u_h, *state.f_h):
            d += eps * l2_norm(ddx_spectral(fl)) ** 2
            if g.dim == 3:
                d += eps * l2_norm(tangential_derivative(fl, 1)) ** 2
    return d


def energy_balance_report(traj: Trajectory) -> DiagnosticReport:
    """Per-interval defect of the energy identity, relative to E(0) per unit time.

    Continuously, d/dt E = -dissipation: transport integrates to zero under
    the wall conditions and the divergence-free reconstruction, and the
    xi/eta coupling cancels pairwise -- the same mechanism the derived
    equations exploit.  Discretely the defect is O(dt) + O(dz^2) per unit
    time; the time integral uses the trapezoid over checkpoints.
    """
    if len(traj.times) < 2:
        raise ValueError("need at least 2 checkpoints")
    energies = [_energy(s) for s in traj.states]
    dissip = [_dissipation(s) for s in traj.states]
    e0 = max(energies[0], 1e-300)
    rep = DiagnosticReport(name="energy_balance", refinement=_refinement_meta(traj))
    total = 0.0
    for k in range(len(traj.times) - 1):
        dt_k = traj.times[k + 1] - traj.times[k]
        defect = energies[k + 1] - energies[k] + 0.5 * dt_k * (dissip[k] + dissip[k + 1])
        total += defect
        rep.times.append(traj.times[k + 1])
        rep.residuals.append(abs(defect) / (dt_k * e0))
    rep.refinement["total_relative_defect"] = abs(total) / e0
    return rep


def apriori_monitor(
    traj: Trajectory,
    aux_traj=None,
    rho0: float = 0.5,
    sigma: float = 1.5,
    beta: float = 0.2,
    norm_params=None,
    stride: int = 1,
) -> DiagnosticReport:
    """Composite norm along the shrinking radius rho(t) = rho0 - beta t.

    Qualitative boundedness echo only: reports whether the norm stays within
    twice its initial value over the run.  The proof's constants are not
    reproduced and no quantitative bound is claimed.
    """
    from .gevrey import GevreyParams, composite_norm_a

    aux_list = traj.aux if aux_traj is None else aux_traj
    if aux_list is None:
        raise ValueError("trajectory carries no auxiliary data")
    T = traj.times[-1]
    if rho0 - beta * T <= 0:
        raise ValueError(
            f"configuration error: rho(t) = {rho0} - {beta} t reaches zero before T = {T}"
        )
    base = norm_params or GevreyParams(rho=rho0, sigma=sigma)
    rep = DiagnosticReport(name="apriori_monitor", refinement=_refinement_meta(traj))
    indices = list(range(0, len(traj.times), stride))
    if indices[-1] != len(traj.times) - 1:
        indices.append(len(traj.times) - 1)
    for i in indices:
        t = traj.times[i]
        params = GevreyParams(
            rho=rho0 - beta * t,
            sigma=sigma,
            N=base.N,
            i_max=base.i_max,
            weighted_uf=base.weighted_uf,
        )
        val = composite_norm_a(traj, aux_list, params, t_index=i).value
        rep.times.append(t)
        rep.residuals.append(val)
    initial = rep.residuals[0]
    rep.tolerance = 2.0 * initial
    rep.passed = all(v <= 2.0 * initial for v in rep.residuals)
    rep.provenance = "qualitative bound: composite norm within 2x its initial value"
    return rep


def write_diagnostic_csv(report: DiagnosticReport, path) -> None:
    """CSV schema: time,residual rows, then a name,pass,tolerance,max_residual block."""
    lines = ["time,residual"]
    for t, r in zip(report.times, report.residuals):
        lines.append(f"{repr(float(t))},{repr(float(r))}")
    lines.append("name,pass,tolerance,max_residual")
    tol = "" if report.tolerance is None else repr(float(report.tolerance))
    passed = "" if report.passed is None else str(bool(report.passed)).lower()
    lines.append(f"{report.name},{passed},{tol},{repr(float(report.max_residual))}")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")
