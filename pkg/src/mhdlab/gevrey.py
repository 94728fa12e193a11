"""Gevrey seminorms, the composite trajectory norm, and radius estimation.

Everything is computed in the log domain: the weights rho^(n-off)/((n-off)!)^sigma
underflow around n = 40 in double precision, so each table entry is kept as

    (n - off) log rho - sigma lgamma(n - off + 1) + log || . ||,

with mode sums done by a stable log-sum-exp.  The supremum over the infinite
tangential order m is truncated at the largest order whose best per-mode
magnitude still exceeds 1e-300; past that point the factorial denominator
dominates the geometric factor rho^m |k|^m for every retained mode, so the
dropped tail is strictly below the retained maximum for any decaying
spectrum and the truncation is exact for the reported supremum.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field
from math import lgamma, log, exp, isfinite

import numpy as np

from .grid import Field, Grid, d2dz2_fd, ddz_fd, tangential_derivative
from .series import time_derivative_at
from .solver import Trajectory, rhs_regularized
from .state import State, multiply, nonlinear_xi_eta, reconstruct_normal

__all__ = [
    "GevreyParams",
    "NormReport",
    "RadiusEstimate",
    "seminorm_X",
    "composite_norm_a",
    "estimate_radius",
    "write_norm_csv",
]

LOG_FLOOR = -300.0 * log(10.0)
_M_HARD_CAP = 500

SIGMA_RANGE_TEXT = "admissible Gevrey index range is 1 < sigma <= 3/2"


@dataclass(frozen=True)
class GevreyParams:
    rho: float
    sigma: float
    N: int = 4
    i_max: int = 1
    offset_uf: int = 7
    offset_aux: int = 6
    weighted_uf: bool = True

    def __post_init__(self):
        if self.rho <= 0:
            raise ValueError(f"rho must be positive, got {self.rho}")
        if not (1.0 < self.sigma <= 1.5):
            raise ValueError(f"sigma = {self.sigma} rejected: {SIGMA_RANGE_TEXT}")
        if not (0 <= self.N <= 8):
            raise ValueError(f"N must lie in 0..8, got {self.N}")
        if not (0 <= self.i_max <= 4):
            raise ValueError(f"i_max must lie in 0..4, got {self.i_max}")


@dataclass
class NormReport:
    """Log-domain seminorm table plus the assembled value.

    ``meta`` records the provenance of the weights: rho, sigma, the offsets,
    whether the u/f entries carry the <z> weight, and the per-family powers
    of the tangential order.
    """

    entries: list[tuple[str, int, int, int, float]] = dc_field(default_factory=list)
    value: float = 0.0
    log_value: float = -np.inf
    family_sups: dict = dc_field(default_factory=dict)
    attained_family: str | None = None
    m_max: dict = dc_field(default_factory=dict)
    meta: dict = dc_field(default_factory=dict)


def _lse(values) -> float:
    arr = np.asarray(values, dtype=float)
    arr = arr[~np.isnan(arr)]
    if arr.size == 0:
        return -np.inf
    top = arr.max()
    if not isfinite(top):
        return float(top)
    return float(top + np.log(np.exp(arr - top).sum()))


def _log_mode_energy(grid: Grid, datas, zw: np.ndarray) -> np.ndarray:
    """log of per-mode squared L2 content summed over components, weighted in z."""
    q = None
    for d in datas:
        e = np.tensordot(np.abs(d) ** 2, zw, axes=([-1], [0]))
        q = e if q is None else q + e
    q = q * grid.tangential_volume
    with np.errstate(divide="ignore"):
        return np.log(q)


def _log_k(grid: Grid):
    with np.errstate(divide="ignore"):
        lkx = np.log(np.abs(grid.k_values))
        lky = np.log(np.abs(grid.ky_values)) if grid.dim == 3 else None
    return lkx, lky


def _log_deriv_norm(grid: Grid, logq: np.ndarray, m: int) -> float:
    """log || d_tangential^m . ||: sup over multi-indices of total order m in 3D."""
    lkx, lky = _log_k(grid)
    if m == 0:
        return 0.5 * _lse(logq.ravel())
    if grid.dim == 2:
        with np.errstate(invalid="ignore"):
            contrib = logq + 2.0 * m * lkx
        contrib = np.where(np.isneginf(lkx), -np.inf, contrib)
        return 0.5 * _lse(contrib)
    best = -np.inf
    for a1 in range(m + 1):
        a2 = m - a1
        cx = np.zeros_like(lkx) if a1 == 0 else 2.0 * a1 * lkx
        cy = np.zeros_like(lky) if a2 == 0 else 2.0 * a2 * lky
        cx = np.where((a1 > 0) & np.isneginf(lkx), -np.inf, cx)
        cy = np.where((a2 > 0) & np.isneginf(lky), -np.inf, cy)
        contrib = logq + cx[:, None] + cy[None, :]
        best = max(best, 0.5 * _lse(contrib.ravel()))
    return best


def _z_derivative(a: Field, j: int) -> Field:
    if j == 0:
        return a
    if j == 1:
        return ddz_fd(a)
    if j == 2:
        return d2dz2_fd(a)
    base = _z_derivative(a, j - 2)
    return d2dz2_fd(base) if j % 2 == 0 else ddz_fd(_z_derivative(a, j - 1))


def _sup_over_m(
    grid: Grid,
    lognorm_of_m,
    i: int,
    j: int,
    offset: int,
    rho: float,
    sigma: float,
    m_weight_pow: float,
    entries: list,
    family: str,
) -> tuple[float, int]:
    """High-order sup over tangential order m, automatic truncation, log domain."""
    best = -np.inf
    prev = -np.inf
    m = max(0, offset - i - j)
    m_used = m
    lr = log(rho)
    while m <= _M_HARD_CAP:
        n = m + i + j
        pre = (n - offset) * lr - sigma * lgamma(n - offset + 1)
        extra = 0.0 if m_weight_pow == 0.0 or m == 0 else m_weight_pow * log(m)
        val = pre + extra + lognorm_of_m(m)
        entries.append((family, m, i, j, val))
        if val > best:
            best = val
        m_used = m
        if val < LOG_FLOOR and val < prev:
            break
        prev = val
        m += 1
    return best, m_used


def seminorm_X(fields: tuple[Field, ...], params: GevreyParams) -> NormReport:
    """Gevrey norm of one vector-valued function: high-order sup plus low-order sup.

    Tangential derivatives are exact mode weights |k|^m; normal derivatives are
    the grid stencils; each (m, j) entry carries the <z>^(ell+j) weight.
    """
    g = fields[0].grid
    if params.N > 0 and g.config.Nz < 2 * params.N + 4:
        raise ValueError(f"Nz = {g.config.Nz} too small to difference up to order N = {params.N}")
    rep = NormReport(meta={
        "rho": params.rho, "sigma": params.sigma, "offset": params.offset_uf,
        "z_weight": "ell+j", "N": params.N,
    })
    high = -np.inf
    low = -np.inf
    m_max = 0
    for j in range(params.N + 1):
        datas = [_z_derivative(f, j).data for f in fields]
        logq = _log_mode_energy(g, datas, g.z_weight(j))
        cache: dict[int, float] = {}

        def lognorm(m: int) -> float:
            if m not in cache:
                cache[m] = _log_deriv_norm(g, logq, m)
            return cache[m]

        sup_j, mj = _sup_over_m(
            g, lognorm, 0, j, params.offset_uf, params.rho, params.sigma, 0.0, rep.entries, "high"
        )
        high = max(high, sup_j)
        m_max = max(m_max, mj)
        for m in range(0, max(-1, 6 - j) + 1):
            val = lognorm(m)
            rep.entries.append(("low", m, 0, j, val))
            low = max(low, val)
    rep.family_sups = {"high": high, "low": low}
    rep.m_max = {"high": m_max}
    rep.log_value = _lse([high, low])
    rep.value = (0.0 if np.isneginf(high) else exp(high)) + (0.0 if np.isneginf(low) else exp(low))
    rep.attained_family = "high" if high >= low else "low"
    return rep


# -- composite norm over (u, f, U, lambda, delta, xi, eta) -----------------------


def _family_snapshot(state: State, aux) -> dict:
    nl = nonlinear_xi_eta(state)
    return {
        "u": state.u_h,
        "f": state.f_h,
        "U": aux.U,
        "lam": aux.lam,
        "delta": aux.delta,
        "xi": nl.xi,
        "eta": nl.eta,
    }


def _family_time_derivative(state: State, aux, eps: float) -> dict:
    """First time derivative of every family by substitution and the chain rule."""
    g = state.grid
    cfg = g.config
    du, df = rhs_regularized(state, eps=eps)
    dth = reconstruct_normal(df)
    dtw = reconstruct_normal(du)
    nu = cfg.nu

    dV, dU = [], []
    for d, V in enumerate(aux.V):
        adv = multiply(state.u_h[0], tangential_derivative(V, 0))
        if g.dim == 3:
            adv = adv + multiply(state.u_h[1], tangential_derivative(V, 1))
        adv = adv + multiply(state.w, ddz_fd(V))
        dv = Field(g, nu * d2dz2_fd(V).data) - adv - tangential_derivative(state.w, d)
        dV.append(dv)
        dU.append(ddz_fd(dv))

    def dt_family(components, d_components):
        out = []
        for comp, dcomp in zip(components, d_components):
            dz_c = ddz_fd(comp)
            dz_dc = ddz_fd(dcomp)
            for d, V in enumerate(aux.V):
                out.append(
                    tangential_derivative(dcomp, d)
                    - multiply(dz_dc, V)
                    - multiply(dz_c, dV[d])
                )
        return tuple(out)

    def dt_convective(carriers, d_carriers, targets, d_targets):
        # d/dt of (f.grad) a with f = carriers (magnetic), a = targets
        h = state.h
        outs = []
        for a, da in zip(targets, d_targets):
            acc = None
            for d, (fd, dfd) in enumerate(zip(carriers, d_carriers)):
                term = multiply(dfd, tangential_derivative(a, d)) + multiply(
                    fd, tangential_derivative(da, d)
                )
                acc = term if acc is None else acc + term
            acc = acc + multiply(dth, ddz_fd(a)) + multiply(h, ddz_fd(da))
            outs.append(acc)
        return tuple(outs)

    return {
        "u": du,
        "f": df,
        "U": tuple(dU),
        "lam": dt_family(state.u_h, du),
        "delta": dt_family(state.f_h, df),
        "xi": dt_convective(state.f_h, df, state.f_h, df),
        "eta": dt_convective(state.f_h, df, state.u_h, du),
    }


def _families_at(traj: Trajectory, aux_list, params: GevreyParams, idx: int, i: int, eps: float) -> dict:
    if i == 0:
        return _family_snapshot(traj.states[idx], aux_list[idx])
    if i == 1:
        return _family_time_derivative(traj.states[idx], aux_list[idx], eps)
    snaps = [_family_snapshot(s, a) for s, a in zip(traj.states, aux_list)]
    out = {}
    for key in snaps[0]:
        ncomp = len(snaps[0][key])
        out[key] = tuple(
            time_derivative_at(traj.times, [sn[key][c] for sn in snaps], idx, order=i, width=i + 3)
            for c in range(ncomp)
        )
    return out


def composite_norm_a(
    traj: Trajectory,
    aux_traj=None,
    params: GevreyParams | None = None,
    t_index: int = -1,
) -> NormReport:
    """The composite trajectory norm: max over the seven weighted family sups.

    u/f entries carry the <z>^(ell+j) weight by default (params.weighted_uf
    toggles the bare variant); the U and lambda/delta families are unweighted
    in z; xi/eta always carry <z>^ell.  Powers of the tangential order --
    m^(1/2) on lambda/delta and m on xi/eta -- follow the definition.
    """
    if params is None:
        raise ValueError("params is required")
    aux_list = traj.aux if aux_traj is None else aux_traj
    if aux_list is None:
        raise ValueError("trajectory carries no auxiliary data")
    idx = t_index if t_index >= 0 else len(traj.states) + t_index
    if params.i_max >= 2 and len(traj.states) < params.i_max + 2:
        raise ValueError(
            f"i_max = {params.i_max} needs at least {params.i_max + 2} checkpoints, "
            f"have {len(traj.states)}"
        )
    g = traj.states[0].grid
    eps = traj.domain_config.eps
    rep = NormReport(meta={
        "rho": params.rho, "sigma": params.sigma,
        "offset_uf": params.offset_uf, "offset_aux": params.offset_aux,
        "weighted_uf": params.weighted_uf, "i_max": params.i_max,
        "m_powers": {"lambda_delta": 0.5, "xi_eta": 1.0},
    })
    off_uf, off_aux = params.offset_uf, params.offset_aux
    sups = {k: -np.inf for k in ("uf", "uf_low", "U", "U_low", "lambda_delta", "xi_eta", "aux_low")}
    mmax = {}

    fam_by_i = {i: _families_at(traj, aux_list, params, idx, i, eps) for i in range(params.i_max + 1)}

    uf_weight = (lambda j: g.z_weight(j)) if params.weighted_uf else (lambda j: g.quad_weights)
    plain = g.quad_weights
    xi_weight = g.z_weight(0)

    for i in range(params.i_max + 1):
        fam = fam_by_i[i]
        # u/f family: j up to min(N, 4 - i)
        for j in range(0, min(params.N, 4 - i) + 1):
            lu = _log_mode_energy(g, [_z_derivative(a, j).data for a in fam["u"]], uf_weight(j))
            lf = _log_mode_energy(g, [_z_derivative(a, j).data for a in fam["f"]], uf_weight(j))
            cache = {}

            def lognorm_uf(m):
                if m not in cache:
                    cache[m] = _lse([_log_deriv_norm(g, lu, m), _log_deriv_norm(g, lf, m)])
                return cache[m]

            s, mm = _sup_over_m(g, lognorm_uf, i, j, off_uf, params.rho, params.sigma, 0.0, rep.entries, "uf")
            sups["uf"] = max(sups["uf"], s)
            mmax["uf"] = max(mmax.get("uf", 0), mm)
            for m in range(0, max(-1, 6 - i - j) + 1):
                val = lognorm_uf(m)
                rep.entries.append(("uf_low", m, i, j, val))
                sups["uf_low"] = max(sups["uf_low"], val)

        # U family (j = 0 only)
        lU = _log_mode_energy(g, [a.data for a in fam["U"]], plain)
        cacheU = {}

        def lognorm_U(m):
            if m not in cacheU:
                cacheU[m] = _log_deriv_norm(g, lU, m)
            return cacheU[m]

        s, mm = _sup_over_m(g, lognorm_U, i, 0, off_aux, params.rho, params.sigma, 0.0, rep.entries, "U")
        sups["U"] = max(sups["U"], s)
        mmax["U"] = max(mmax.get("U", 0), mm)
        for m in range(0, max(-1, 5 - i) + 1):
            val = lognorm_U(m)
            rep.entries.append(("U_low", m, i, 0, val))
            sups["U_low"] = max(sups["U_low"], val)

        # lambda/delta with m^(1/2); xi/eta with m and the <z>^ell weight
        llam = _log_mode_energy(g, [a.data for a in fam["lam"]], plain)
        ldel = _log_mode_energy(g, [a.data for a in fam["delta"]], plain)
        lxi = _log_mode_energy(g, [a.data for a in fam["xi"]], xi_weight)
        leta = _log_mode_energy(g, [a.data for a in fam["eta"]], xi_weight)
        cl, cx = {}, {}

        def lognorm_ld(m):
            if m not in cl:
                cl[m] = _lse([_log_deriv_norm(g, llam, m), _log_deriv_norm(g, ldel, m)])
            return cl[m]

        def lognorm_xe(m):
            if m not in cx:
                cx[m] = _lse([_log_deriv_norm(g, lxi, m), _log_deriv_norm(g, leta, m)])
            return cx[m]

        s, mm = _sup_over_m(g, lognorm_ld, i, 0, off_aux, params.rho, params.sigma, 0.5, rep.entries, "lambda_delta")
        sups["lambda_delta"] = max(sups["lambda_delta"], s)
        mmax["lambda_delta"] = max(mmax.get("lambda_delta", 0), mm)
        s, mm = _sup_over_m(g, lognorm_xe, i, 0, off_aux, params.rho, params.sigma, 1.0, rep.entries, "xi_eta")
        sups["xi_eta"] = max(sups["xi_eta"], s)
        mmax["xi_eta"] = max(mmax.get("xi_eta", 0), mm)
        for m in range(0, max(-1, 5 - i) + 1):
            val = _lse([lognorm_ld(m), lognorm_xe(m)])
            rep.entries.append(("aux_low", m, i, 0, val))
            sups["aux_low"] = max(sups["aux_low"], val)

    rep.family_sups = sups
    rep.m_max = mmax
    rep.log_value = max(sups.values())
    rep.value = 0.0 if np.isneginf(rep.log_value) else float(exp(rep.log_value))
    rep.attained_family = max(sups, key=lambda k: sups[k]) if np.isfinite(rep.log_value) else None
    return rep


# -- radius of tangential analyticity --------------------------------------------


@dataclass
class RadiusEstimate:
    rho: float
    good_fit: bool
    fit_residual: float
    data_range: float
    modes_used: int


def estimate_radius(
    field: Field,
    sigma: float,
    offset: int = 7,
    noise_floor: float = 1e-13,
) -> RadiusEstimate:
    """Least-squares radius from the decay of weighted tangential band amplitudes.

    Band amplitudes a_m (the <z>^ell-weighted L2 content of tangential order m)
    are fit to the model a_m = const rho^-(m-offset) ((m-offset)!)^-sigma by a
    linear fit on y_m = log a_m + sigma lgamma(m-offset+1); the slope gives
    rho.  The fit is flagged when its residual exceeds 10% of the data range
    (e.g. super-Gevrey spectra such as Gaussian ones).
    """
    g = field.grid
    if g.dim != 2:
        raise ValueError("radius estimation is implemented for 2D fields")
    zw = g.z_weight(0)
    energy = np.tensordot(np.abs(field.data) ** 2, zw, axes=([-1], [0])) * g.tangential_volume
    nmodes = g.config.Nx
    half = nmodes // 2
    amps = np.zeros(half)
    for m in range(1, half):
        amps[m] = np.sqrt(energy[m] + energy[-m])
    peak = amps.max()
    if peak <= 0:
        raise ValueError("field has no active tangential modes")
    ms = np.array([m for m in range(max(1, offset), half) if amps[m] > noise_floor * peak])
    if len(ms) < 8:
        raise ValueError(f"too few active modes for a radius fit: {len(ms)} < 8")
    y = np.log(amps[ms]) + sigma * np.array([lgamma(m - offset + 1) for m in ms])
    A = np.vstack([np.ones_like(ms, dtype=float), ms.astype(float)]).T
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    slope = coef[1]
    fit = A @ coef
    resid = float(np.abs(y - fit).max())
    rng = float(y.max() - y.min())
    rho = float(np.exp(-slope))
    good = resid <= 0.1 * max(rng, 1e-300)
    return RadiusEstimate(rho=rho, good_fit=good, fit_residual=resid, data_range=rng, modes_used=len(ms))


def write_norm_csv(report: NormReport, path) -> None:
    """CSV schema: header family,m,i,j,log_value; trailing COMPOSITE summary row."""
    lines = ["family,m,i,j,log_value"]
    for fam, m, i, j, val in report.entries:
        lines.append(f"{fam},{m},{i},{j},{repr(float(val))}")
    lines.append(f"COMPOSITE,-1,-1,-1,{repr(float(report.log_value))}")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")
