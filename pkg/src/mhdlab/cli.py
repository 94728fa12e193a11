"""Batch entry point: config parsing, run execution, persistence, export.

Subcommands: ``run <config>``, ``diagnose <dir> [--select a,b,c]``,
``norms <dir> --rho R --sigma S [--imax I]``, ``mms``.  Exit codes:
0 ok, 2 config error, 3 numeric failure, 4 I/O error.  ``MHDL_THREADS``
caps BLAS parallelism (read before numpy is imported).

All outputs are deterministic: identical configs produce byte-identical
files, and the manifest lists every output with its content hash.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import os
import sys

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERIC = 3
EXIT_IO = 4

log = logging.getLogger("mhdlab")


class ConfigError(ValueError):
    pass


# -- config file parsing ---------------------------------------------------------

_SECTIONS = ("domain", "solver", "gevrey", "initial", "output")

_SCHEMA = {
    ("domain", "dim"): int,
    ("domain", "Lx"): float,
    ("domain", "Ly"): float,
    ("domain", "Zmax"): float,
    ("domain", "Nx"): int,
    ("domain", "Ny"): int,
    ("domain", "Nz"): int,
    ("domain", "stretch"): float,
    ("domain", "ell"): float,
    ("domain", "nu"): float,
    ("domain", "mu"): float,
    ("domain", "eps"): float,
    ("solver", "dt"): float,
    ("solver", "T_final"): float,
    ("solver", "cfl_safety"): float,
    ("solver", "imex"): bool,
    ("solver", "checkpoint_every"): int,
    ("gevrey", "rho"): float,
    ("gevrey", "sigma"): float,
    ("gevrey", "N"): int,
    ("gevrey", "i_max"): int,
    ("gevrey", "weighted_uf"): bool,
    ("gevrey", "beta"): float,
    ("initial", "family"): str,
    ("initial", "mode"): int,
    ("initial", "amplitude_u"): float,
    ("initial", "amplitude_f"): float,
    ("initial", "profile_u"): str,
    ("initial", "profile_f"): str,
    ("output", "dir"): str,
    ("output", "diagnostics"): str,
    ("output", "seed"): int,
}

_DEFAULTS = {
    ("domain", "dim"): 2,
    ("domain", "Lx"): 6.283185307179586,
    ("domain", "Zmax"): 8.0,
    ("domain", "Nx"): 32,
    ("domain", "Nz"): 64,
    ("domain", "stretch"): 2.0,
    ("domain", "ell"): 1.0,
    ("domain", "nu"): 0.05,
    ("domain", "mu"): 0.05,
    ("domain", "eps"): 0.0,
    ("solver", "dt"): 2e-3,
    ("solver", "T_final"): 0.5,
    ("solver", "cfl_safety"): 0.9,
    ("solver", "imex"): True,
    ("solver", "checkpoint_every"): 1,
    ("gevrey", "rho"): 0.5,
    ("gevrey", "sigma"): 1.5,
    ("gevrey", "N"): 4,
    ("gevrey", "i_max"): 1,
    ("gevrey", "weighted_uf"): True,
    ("gevrey", "beta"): 0.2,
    ("initial", "family"): "single_mode",
    ("initial", "mode"): 1,
    ("initial", "amplitude_u"): 0.01,
    ("initial", "amplitude_f"): 0.01,
    ("initial", "profile_u"): "zgauss",
    ("initial", "profile_f"): "gauss",
    ("output", "diagnostics"): "energy,xi_eta,h_equation",
    ("output", "seed"): 0,
}

_REQUIRED = (("output", "dir"),)


def _parse_ini(text: str) -> dict:
    """Minimal strict INI reader tracking line numbers for error messages."""
    entries: dict[tuple[str, str], tuple[str, int]] = {}
    section = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith(("#", ";")):
            continue
        if line.startswith("[") and line.endswith("]"):
            section = line[1:-1].strip()
            if section not in _SECTIONS:
                raise ConfigError(f"line {lineno}: unknown section [{section}]")
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key = value, got {raw!r}")
        if section is None:
            raise ConfigError(f"line {lineno}: key outside any section")
        key, _, value = line.partition("=")
        key = key.strip()
        value = value.strip()
        if (section, key) in entries:
            first = entries[(section, key)][1]
            raise ConfigError(
                f"duplicate key '{key}' in [{section}]: lines {first} and {lineno}"
            )
        entries[(section, key)] = (value, lineno)
    return entries


def _convert(section: str, key: str, raw: str, lineno: int):
    typ = _SCHEMA[(section, key)]
    try:
        if typ is bool:
            low = raw.lower()
            if low in ("true", "1", "yes", "on"):
                return True
            if low in ("false", "0", "no", "off"):
                return False
            raise ValueError
        return typ(raw)
    except ValueError:
        raise ConfigError(
            f"line {lineno}: value {raw!r} for {section}.{key} is not a valid {typ.__name__}"
        ) from None


def parse_config(text: str):
    """Parse and fully validate an INI-style run configuration.

    Unknown keys are hard errors; every defaulted key is logged with its
    value; range violations name the key, the value, and the allowed range.
    """
    from .gevrey import GevreyParams
    from .grid import DomainConfig
    from .recipes import InitialRecipe
    from .solver import SolverConfig

    entries = _parse_ini(text)
    values = {}
    for (section, key), (raw, lineno) in entries.items():
        if (section, key) not in _SCHEMA:
            raise ConfigError(f"line {lineno}: unknown key '{key}' in [{section}]")
        values[(section, key)] = _convert(section, key, raw, lineno)
    for sk in _REQUIRED:
        if sk not in values:
            raise ConfigError(f"missing required key {sk[0]}.{sk[1]}")
    for sk, default in _DEFAULTS.items():
        if sk not in values:
            values[sk] = default
            log.info("default %s.%s = %r", sk[0], sk[1], default)

    def sec(name):
        return {k: v for (s, k), v in values.items() if s == name}

    try:
        domain = DomainConfig(**sec("domain"))
        solver = SolverConfig(**sec("solver"))
        gp = sec("gevrey")
        beta = gp.pop("beta")
        gevrey = GevreyParams(**gp)
        initial = InitialRecipe(**sec("initial"))
    except (ValueError, TypeError) as exc:
        raise ConfigError(str(exc)) from None
    out = sec("output")
    diagnostics = tuple(s for s in (x.strip() for x in out["diagnostics"].split(",")) if s)
    from .rundef import RunConfig

    return RunConfig(
        domain=domain,
        solver=solver,
        gevrey=gevrey,
        beta=beta,
        initial=initial,
        output_dir=out["dir"],
        diagnostics=diagnostics,
        seed=out["seed"],
    )


# -- helpers ---------------------------------------------------------------------


def _sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _write_manifest(out_dir: str, config_echo: dict) -> None:
    files = {}
    for root, _, names in os.walk(out_dir):
        for name in sorted(names):
            if name == "manifest.json":
                continue
            p = os.path.join(root, name)
            rel = os.path.relpath(p, out_dir)
            files[rel] = {"sha256": _sha256(p), "bytes": os.path.getsize(p)}
    manifest = {"format": 1, "config": config_echo, "files": files}
    with open(os.path.join(out_dir, "manifest.json"), "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _failure_record(out_dir: str | None, kind: str, message: str, **extra) -> None:
    record = {"error": kind, "message": message, **extra}
    payload = json.dumps(record, indent=2, sort_keys=True) + "\n"
    if out_dir and os.path.isdir(out_dir):
        with open(os.path.join(out_dir, "failure.json"), "w", encoding="utf-8") as fh:
            fh.write(payload)
    sys.stderr.write(payload)


def _config_echo(rc) -> dict:
    from dataclasses import asdict

    return {
        "domain": asdict(rc.domain),
        "solver": asdict(rc.solver),
        "gevrey": asdict(rc.gevrey),
        "beta": rc.beta,
        "initial": asdict(rc.initial),
        "diagnostics": list(rc.diagnostics),
        "seed": rc.seed,
    }


def _diag_registry():
    from . import diagnostics as dx
    from .auxiliary import psi_m_residual, u_equation_residual
    from .diagnostics import DiagnosticReport

    def series_report(name, series, traj):
        rep = DiagnosticReport(name=name, refinement={"Nx": traj.domain_config.Nx,
                                                      "Nz": traj.domain_config.Nz,
                                                      "dt": traj.solver_config.dt})
        for t, v in series:
            rep.times.append(t)
            rep.residuals.append(v)
        return rep

    def run_u_equation(traj, rc):
        return [series_report("u_equation", u_equation_residual(traj), traj)]

    def run_psi(traj, rc):
        return [
            series_report(f"psi_{m}", psi_m_residual(traj, m=m), traj) for m in (1, 2, 3)
        ]

    return {
        "xi_eta": lambda traj, rc: list(dx.xi_eta_equation_residual(traj)),
        "h_equation": lambda traj, rc: [dx.h_equation_residual(traj)],
        "energy": lambda traj, rc: [dx.energy_balance_report(traj)],
        "u_equation": run_u_equation,
        "psi_m": run_psi,
        "apriori": lambda traj, rc: [
            dx.apriori_monitor(
                traj,
                rho0=rc.gevrey.rho,
                sigma=rc.gevrey.sigma,
                beta=rc.beta,
                stride=max(1, len(traj.times) // 8),
            )
        ],
    }


# -- subcommands -------------------------------------------------------------------


def cmd_run(run_config) -> int:
    from .checkpoint import write_aux_checkpoint, write_state_checkpoint
    from .diagnostics import write_diagnostic_csv
    from .gevrey import composite_norm_a, estimate_radius
    from .grid import Grid
    from .solver import CFLError, NumericsError, run_trajectory

    rc = run_config
    out_dir = rc.output_dir
    os.makedirs(out_dir, exist_ok=True)
    if not os.access(out_dir, os.W_OK):
        raise OSError(f"output directory {out_dir} is not writable")
    grid = Grid(rc.domain)
    initial = rc.initial.build(grid)

    try:
        traj = run_trajectory(initial, rc.solver, rc.domain, with_aux=True)
    except CFLError as exc:
        _failure_record(out_dir, "cfl", str(exc), ratio=exc.ratio, dt=exc.dt, limit=exc.limit)
        return EXIT_NUMERIC
    except NumericsError as exc:
        _failure_record(out_dir, "nan", str(exc), t_last=exc.t_last)
        return EXIT_NUMERIC

    ck_dir = os.path.join(out_dir, "checkpoints")
    os.makedirs(ck_dir, exist_ok=True)
    for i, (state, aux) in enumerate(zip(traj.states, traj.aux)):
        write_state_checkpoint(os.path.join(ck_dir, f"state_{i:06d}.mhdl"), state)
        write_aux_checkpoint(os.path.join(ck_dir, f"aux_{i:06d}.mhdl"), aux, rc.domain)

    # norm and radius time series over checkpoints
    norm_lines = ["time,composite,log_composite,attained_family"]
    radius_lines = ["time,rho_est,good_fit"]
    for i, t in enumerate(traj.times):
        rep = composite_norm_a(traj, params=rc.gevrey, t_index=i)
        fam = rep.attained_family or ""
        norm_lines.append(
            f"{repr(float(t))},{repr(float(rep.value))},{repr(float(rep.log_value))},{fam}"
        )
        try:
            est = estimate_radius(traj.states[i].u_h[0], rc.gevrey.sigma)
            radius_lines.append(f"{repr(float(t))},{repr(float(est.rho))},{str(est.good_fit).lower()}")
        except ValueError:
            radius_lines.append(f"{repr(float(t))},nan,false")
    with open(os.path.join(out_dir, "norms.csv"), "w", encoding="utf-8") as fh:
        fh.write("\n".join(norm_lines) + "\n")
    with open(os.path.join(out_dir, "radius.csv"), "w", encoding="utf-8") as fh:
        fh.write("\n".join(radius_lines) + "\n")

    dg_dir = os.path.join(out_dir, "diagnostics")
    os.makedirs(dg_dir, exist_ok=True)
    registry = _diag_registry()
    for name in rc.diagnostics:
        if name not in registry:
            raise ConfigError(f"unknown diagnostic {name!r}; available: {sorted(registry)}")
        for rep in registry[name](traj, rc):
            write_diagnostic_csv(rep, os.path.join(dg_dir, f"{rep.name}.csv"))

    _write_manifest(out_dir, _config_echo(rc))
    if traj.truncated:
        _failure_record(out_dir, "blowup", traj.truncation_reason or "trajectory truncated")
        return EXIT_NUMERIC
    return EXIT_OK


def _load_trajectory(ck_dir: str):
    from .auxiliary import compute_lambda_delta
    from .checkpoint import read_aux_checkpoint, read_state_checkpoint
    from .grid import Grid
    from .solver import SolverConfig, Trajectory

    state_files = sorted(
        f for f in os.listdir(ck_dir) if f.startswith("state_") and f.endswith(".mhdl")
    )
    if not state_files:
        raise FileNotFoundError(f"no state checkpoints found in {ck_dir}")
    cfg0, first = read_state_checkpoint(os.path.join(ck_dir, state_files[0]))
    grid = first.grid
    states, times, auxes = [], [], []
    for f in state_files:
        _, st = read_state_checkpoint(os.path.join(ck_dir, f), grid=grid)
        states.append(st)
        times.append(st.t)
        aux_name = f.replace("state_", "aux_")
        aux_path = os.path.join(ck_dir, aux_name)
        if os.path.exists(aux_path):
            _, aux = read_aux_checkpoint(aux_path, grid=grid)
            auxes.append(compute_lambda_delta(st, aux))
    dt = times[1] - times[0] if len(times) > 1 else 1.0
    scfg = SolverConfig(dt=dt if dt > 0 else 1.0, T_final=max(times[-1], dt))
    return Trajectory(
        times=times,
        states=states,
        solver_config=scfg,
        domain_config=cfg0,
        aux=auxes if len(auxes) == len(states) else None,
    )


def _verify_hashes(run_dir: str) -> None:
    manifest_path = os.path.join(run_dir, "manifest.json")
    if not os.path.exists(manifest_path):
        return
    with open(manifest_path, encoding="utf-8") as fh:
        manifest = json.load(fh)
    for rel, meta in manifest.get("files", {}).items():
        if not rel.startswith("checkpoints"):
            continue
        p = os.path.join(run_dir, rel)
        if not os.path.exists(p):
            raise OSError(f"checkpoint {rel} listed in manifest is missing")
        actual = _sha256(p)
        if actual != meta["sha256"]:
            raise OSError(
                f"corrupt checkpoint {rel}: expected sha256 {meta['sha256']}, got {actual}"
            )


def cmd_diagnose(run_dir: str, selection: tuple[str, ...]) -> int:
    from .diagnostics import write_diagnostic_csv
    from .rundef import RunConfig

    _verify_hashes(run_dir)
    traj = _load_trajectory(os.path.join(run_dir, "checkpoints"))
    registry = _diag_registry()
    for name in selection:
        if name not in registry:
            raise ConfigError(f"unknown diagnostic {name!r}; available: {sorted(registry)}")
    rc = RunConfig.defaults(output_dir=run_dir)
    summary = ["name,pass,tolerance,max_residual"]
    dg_dir = os.path.join(run_dir, "diagnostics")
    os.makedirs(dg_dir, exist_ok=True)
    for name in selection:
        for rep in registry[name](traj, rc):
            write_diagnostic_csv(rep, os.path.join(dg_dir, f"{rep.name}.csv"))
            tol = "" if rep.tolerance is None else repr(float(rep.tolerance))
            passed = "" if rep.passed is None else str(bool(rep.passed)).lower()
            summary.append(f"{rep.name},{passed},{tol},{repr(float(rep.max_residual))}")
    with open(os.path.join(run_dir, "diagnose_summary.csv"), "w", encoding="utf-8") as fh:
        fh.write("\n".join(summary) + "\n")
    return EXIT_OK


def cmd_norms(run_dir: str, rho: float, sigma: float, imax: int) -> int:
    from .gevrey import GevreyParams, composite_norm_a, write_norm_csv

    _verify_hashes(run_dir)
    traj = _load_trajectory(os.path.join(run_dir, "checkpoints"))
    if traj.aux is None:
        raise OSError(f"run directory {run_dir} has no auxiliary checkpoints")
    try:
        params = GevreyParams(rho=rho, sigma=sigma, i_max=imax)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    nm_dir = os.path.join(run_dir, "norms")
    os.makedirs(nm_dir, exist_ok=True)
    for i, t in enumerate(traj.times):
        rep = composite_norm_a(traj, params=params, t_index=i)
        write_norm_csv(rep, os.path.join(nm_dir, f"norms_{i:06d}.csv"))
        print(f"t = {t:.6g}  |a| = {rep.value:.12e}  attained by {rep.attained_family}")
    return EXIT_OK


def cmd_mms(args) -> int:
    from .solver import manufactured_forcing_residual

    rep = manufactured_forcing_residual(
        nx=args.nx,
        z_rungs=tuple(args.nz),
        dt0=args.dt0,
        T=args.T,
    )
    print("normal-direction ladder (dt scaled with dz^2):")
    for (nz, dt, err) in rep.z_rungs:
        print(f"  Nz = {nz:4d}  dt = {dt:.3e}  max-err = {err:.6e}")
    print(f"  observed orders: {['%.3f' % o for o in rep.z_orders]}")
    print("time-step ladder (fixed grid):")
    for (dt, err, self_err) in rep.dt_rungs:
        print(f"  dt = {dt:.3e}  max-err = {err:.6e}  vs-half-dt = {self_err:.6e}")
    print(f"  observed orders (Richardson vs halved dt): {['%.3f' % o for o in rep.dt_orders]}")
    print(f"runtime: {rep.runtime_seconds:.1f} s")
    if args.out:
        lines = ["ladder,param,dt,error"]
        for (nz, dt, err) in rep.z_rungs:
            lines.append(f"z,{nz},{dt!r},{err!r}")
        for (dt, err, _) in rep.dt_rungs:
            lines.append(f"dt,,{dt!r},{err!r}")
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write("\n".join(lines) + "\n")
    ok = rep.observed_z_order >= 1.9 and rep.observed_dt_order >= 0.9
    print("PASS" if ok else "FAIL", "(z order >= 1.9 and dt order >= 0.9)")
    return EXIT_OK if ok else EXIT_NUMERIC


def main(argv=None) -> int:
    threads = os.environ.get("MHDL_THREADS")
    if threads:
        for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
            os.environ.setdefault(var, threads)

    parser = argparse.ArgumentParser(prog="mhdlab", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run a configured trajectory with auxiliary advance")
    p_run.add_argument("config", help="path to INI-style run configuration")

    p_diag = sub.add_parser("diagnose", help="run diagnostics offline on a checkpoint directory")
    p_diag.add_argument("dir")
    p_diag.add_argument("--select", default="", help="comma-separated diagnostic names")

    p_norm = sub.add_parser("norms", help="full Gevrey norm tables for a finished run")
    p_norm.add_argument("dir")
    p_norm.add_argument("--rho", type=float, required=True)
    p_norm.add_argument("--sigma", type=float, required=True)
    p_norm.add_argument("--imax", type=int, default=1)

    p_mms = sub.add_parser("mms", help="manufactured-solution convergence ladder")
    p_mms.add_argument("--nx", type=int, default=64)
    p_mms.add_argument("--nz", type=int, nargs="+", default=[64, 128, 256, 512])
    p_mms.add_argument("--dt0", type=float, default=4e-3)
    p_mms.add_argument("--T", type=float, default=0.08)
    p_mms.add_argument("--out", default="")

    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO, format="%(name)s: %(message)s", stream=sys.stderr)

    try:
        if args.command == "run":
            try:
                with open(args.config, encoding="utf-8") as fh:
                    text = fh.read()
            except OSError as exc:
                _failure_record(None, "io", f"cannot read config: {exc}")
                return EXIT_IO
            rc = parse_config(text)
            return cmd_run(rc)
        if args.command == "diagnose":
            selection = tuple(s for s in (x.strip() for x in args.select.split(",")) if s)
            return cmd_diagnose(args.dir, selection)
        if args.command == "norms":
            return cmd_norms(args.dir, args.rho, args.sigma, args.imax)
        if args.command == "mms":
            return cmd_mms(args)
        parser.error(f"unknown command {args.command}")
    except ConfigError as exc:
        _failure_record(None, "config", str(exc))
        return EXIT_CONFIG
    except (OSError, FileNotFoundError) as exc:
        _failure_record(None, "io", str(exc))
        return EXIT_IO
    except Exception as exc:  # solver-level numeric failures
        from .solver import CFLError, NumericsError

        if isinstance(exc, (CFLError, NumericsError)):
            _failure_record(None, "numeric", str(exc))
            return EXIT_NUMERIC
        raise
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
