"""Bit-exact little-endian binary checkpoints.

Layout (all little-endian):

    magic   4 bytes  b"MHDL"
    version u32      (currently 1)
    domain  u32 x 4  dim, Nx, Ny (0 in 2D), Nz
            f64 x 8  Lx, Ly (0 in 2D), Zmax, stretch, ell, nu, mu, eps
    time    f64
    nfields u32
    field   u32 name length, utf-8 name bytes, then the complex spectrum as
            interleaved f64 (re, im) pairs, tangential-mode-major then z
            (C order of the (Nx[, Ny], Nz) complex array).

Only prognostic fields are stored (u, f in 2D; u, v, f, g in 3D; V per
direction for auxiliary checkpoints); w, h and U are reconstructed on read
so the derived-quantity invariants cannot drift through serialization.
"""

from __future__ import annotations

import struct

import numpy as np

from .grid import DomainConfig, Field, Grid, ddz_fd
from .state import State, reconstruct_normal

__all__ = [
    "CheckpointError",
    "CheckpointVersionError",
    "CheckpointLengthError",
    "write_state_checkpoint",
    "read_state_checkpoint",
    "write_aux_checkpoint",
    "read_aux_checkpoint",
    "state_from_payload",
]

MAGIC = b"MHDL"
VERSION = 1


class CheckpointError(RuntimeError):
    pass


class CheckpointVersionError(CheckpointError):
    pass


class CheckpointLengthError(CheckpointError):
    pass


def _config_bytes(cfg: DomainConfig) -> bytes:
    return struct.pack(
        "<4I8d",
        cfg.dim,
        cfg.Nx,
        cfg.Ny or 0,
        cfg.Nz,
        cfg.Lx,
        cfg.Ly or 0.0,
        cfg.Zmax,
        cfg.stretch,
        cfg.ell,
        cfg.nu,
        cfg.mu,
        cfg.eps,
    )


def _config_from(buf: bytes, off: int) -> tuple[DomainConfig, int]:
    size = struct.calcsize("<4I8d")
    _need(buf, off, size, "domain block")
    dim, nx, ny, nz, lx, ly, zmax, stretch, ell, nu, mu, eps = struct.unpack_from("<4I8d", buf, off)
    cfg = DomainConfig(
        dim=dim,
        Lx=lx,
        Ly=ly if dim == 3 else None,
        Zmax=zmax,
        Nx=nx,
        Ny=ny if dim == 3 else None,
        Nz=nz,
        stretch=stretch,
        ell=ell,
        nu=nu,
        mu=mu,
        eps=eps,
    )
    return cfg, off + size


def _need(buf: bytes, off: int, n: int, what: str):
    if off + n > len(buf):
        raise CheckpointLengthError(
            f"truncated checkpoint while reading {what}: need {off + n} bytes, file has {len(buf)}"
        )


def _write(path, cfg: DomainConfig, t: float, named_fields) -> None:
    parts = [MAGIC, struct.pack("<I", VERSION), _config_bytes(cfg), struct.pack("<d", t)]
    parts.append(struct.pack("<I", len(named_fields)))
    for name, data in named_fields:
        nb = name.encode("utf-8")
        parts.append(struct.pack("<I", len(nb)))
        parts.append(nb)
        arr = np.ascontiguousarray(data, dtype=np.dtype("<c16"))
        parts.append(arr.tobytes())
    with open(path, "wb") as fh:
        fh.write(b"".join(parts))


def _read(path) -> tuple[DomainConfig, float, dict[str, np.ndarray]]:
    with open(path, "rb") as fh:
        buf = fh.read()
    _need(buf, 0, 8, "header")
    if buf[:4] != MAGIC:
        raise CheckpointVersionError(
            f"bad checkpoint magic {buf[:4]!r}: expected {MAGIC!r} (version error)"
        )
    (version,) = struct.unpack_from("<I", buf, 4)
    if version != VERSION:
        raise CheckpointVersionError(f"unsupported checkpoint version {version}, expected {VERSION}")
    cfg, off = _config_from(buf, 8)
    _need(buf, off, 12, "time and field count")
    (t,) = struct.unpack_from("<d", buf, off)
    off += 8
    (nfields,) = struct.unpack_from("<I", buf, off)
    off += 4
    shape = (cfg.Nx, cfg.Nz) if cfg.dim == 2 else (cfg.Nx, cfg.Ny, cfg.Nz)
    count = int(np.prod(shape))
    fields: dict[str, np.ndarray] = {}
    for _ in range(nfields):
        _need(buf, off, 4, "field name length")
        (nlen,) = struct.unpack_from("<I", buf, off)
        off += 4
        _need(buf, off, nlen, "field name")
        name = buf[off : off + nlen].decode("utf-8")
        off += nlen
        nbytes = count * 16
        _need(buf, off, nbytes, f"field '{name}' payload")
        arr = np.frombuffer(buf[off : off + nbytes], dtype=np.dtype("<c16")).reshape(shape)
        fields[name] = arr.astype(np.complex128)
        off += nbytes
    if off != len(buf):
        raise CheckpointLengthError(
            f"trailing bytes in checkpoint: expected {off}, file has {len(buf)}"
        )
    return cfg, t, fields


def write_state_checkpoint(path, state: State) -> None:
    g = state.grid
    names = ("u", "f") if g.dim == 2 else ("u", "v", "f", "g")
    flds = (
        [("u", state.u_h[0].data), ("f", state.f_h[0].data)]
        if g.dim == 2
        else [
            ("u", state.u_h[0].data),
            ("v", state.u_h[1].data),
            ("f", state.f_h[0].data),
            ("g", state.f_h[1].data),
        ]
    )
    assert [n for n, _ in flds] == list(names)
    _write(path, g.config, state.t, flds)


def state_from_payload(grid: Grid, t: float, fields: dict[str, np.ndarray]) -> State:
    if grid.dim == 2:
        u_h = (Field(grid, fields["u"].copy()),)
        f_h = (Field(grid, fields["f"].copy()),)
    else:
        u_h = (Field(grid, fields["u"].copy()), Field(grid, fields["v"].copy()))
        f_h = (Field(grid, fields["f"].copy()), Field(grid, fields["g"].copy()))
    return State(t=t, u_h=u_h, f_h=f_h, w=reconstruct_normal(u_h), h=reconstruct_normal(f_h))


def read_state_checkpoint(path, grid: Grid | None = None) -> tuple[DomainConfig, State]:
    cfg, t, fields = _read(path)
    g = grid if grid is not None else Grid(cfg)
    for required in ("u", "f") if cfg.dim == 2 else ("u", "v", "f", "g"):
        if required not in fields:
            raise CheckpointError(f"state checkpoint missing field '{required}'")
    return cfg, state_from_payload(g, t, fields)


def write_aux_checkpoint(path, aux, cfg: DomainConfig) -> None:
    names = ("V",) if cfg.dim == 2 else ("V1", "V2")
    _write(path, cfg, aux.t, [(n, v.data) for n, v in zip(names, aux.V)])


def read_aux_checkpoint(path, grid: Grid | None = None):
    from .auxiliary import AuxState

    cfg, t, fields = _read(path)
    g = grid if grid is not None else Grid(cfg)
    names = ("V",) if cfg.dim == 2 else ("V1", "V2")
    for required in names:
        if required not in fields:
            raise CheckpointError(f"aux checkpoint missing field '{required}'")
    V = tuple(Field(g, fields[n].copy()) for n in names)
    nfam = 1 if cfg.dim == 2 else 4
    return cfg, AuxState(
        t=t,
        U=tuple(ddz_fd(v) for v in V),
        V=V,
        lam=tuple(Field.zeros(g) for _ in range(nfam)),
        delta=tuple(Field.zeros(g) for _ in range(nfam)),
    )
