"""Parsers for the documented mhdlab output formats.

These implement the external-interface schemas from scratch (no mhdlab
import): any change to the producer's formats must break these parsers
loudly rather than silently bending the figures.

Time-series CSV: a header row naming `time` first, float data rows, and an
optional trailing summary block introduced by the literal header line
`name,pass,tolerance,max_residual`.

Checkpoint binary (little-endian):
    magic   b"MHDL", version u32 (= 1)
    domain  u32 x 4: dim, Nx, Ny (0 in 2D), Nz
            f64 x 8: Lx, Ly, Zmax, stretch, ell, nu, mu, eps
    time    f64
    nfields u32, then per field: u32 name length, utf-8 name, complex128
            spectrum bytes (interleaved f64 re/im pairs), tangential-mode
            major with z fastest.
The normal levels are z_j = Zmax (e^{s q_j} - 1)/(e^s - 1), q_j = j/(Nz-1),
s = stretch - 1 (uniform when stretch = 1).
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

__all__ = ["SchemaError", "TimeSeries", "Checkpoint", "parse_timeseries_csv", "read_checkpoint"]

MAGIC = b"MHDL"
VERSION = 1
SUMMARY_HEADER = "name,pass,tolerance,max_residual"


class SchemaError(ValueError):
    pass


@dataclass
class TimeSeries:
    columns: dict  # name -> list of floats (or strings for non-numeric)
    summary: dict | None


@dataclass
class Checkpoint:
    dim: int
    Nx: int
    Ny: int
    Nz: int
    Lx: float
    Ly: float
    Zmax: float
    stretch: float
    ell: float
    nu: float
    mu: float
    eps: float
    time: float
    fields: dict  # name -> complex ndarray

    @property
    def z_levels(self) -> np.ndarray:
        q = np.arange(self.Nz) / (self.Nz - 1)
        s = self.stretch - 1.0
        if s == 0.0:
            return self.Zmax * q
        return self.Zmax * np.expm1(s * q) / np.expm1(s)

    def physical(self, name: str) -> np.ndarray:
        if name not in self.fields:
            raise SchemaError(
                f"unknown field {name!r}; checkpoint provides {sorted(self.fields)}"
            )
        spec = self.fields[name]
        axes = (0,) if self.dim == 2 else (0, 1)
        n = self.Nx if self.dim == 2 else self.Nx * self.Ny
        return np.fft.ifftn(spec * n, axes=axes).real


def parse_timeseries_csv(path) -> TimeSeries:
    with open(path, encoding="utf-8") as fh:
        lines = [ln.rstrip("\n") for ln in fh if ln.strip()]
    if not lines:
        raise SchemaError(f"{path}: empty file")
    header = lines[0].split(",")
    if header[0] != "time":
        raise SchemaError(f"{path}: first column must be 'time', got {header[0]!r}")
    columns = {name: [] for name in header}
    summary = None
    i = 1
    while i < len(lines):
        if lines[i] == SUMMARY_HEADER:
            if i + 1 >= len(lines):
                raise SchemaError(f"{path}: summary header without a summary row")
            vals = lines[i + 1].split(",")
            keys = SUMMARY_HEADER.split(",")
            if len(vals) != len(keys):
                raise SchemaError(f"{path}: summary row has {len(vals)} fields, expected {len(keys)}")
            summary = dict(zip(keys, vals))
            i += 2
            continue
        vals = lines[i].split(",")
        if len(vals) != len(header):
            raise SchemaError(
                f"{path}: row {i + 1} has {len(vals)} fields, header names {len(header)}"
            )
        for name, v in zip(header, vals):
            if name == "time" or _looks_numeric(v):
                try:
                    columns[name].append(float(v))
                except ValueError:
                    raise SchemaError(
                        f"{path}: column {name!r} row {i + 1}: {v!r} is not a number"
                    ) from None
            else:
                columns[name].append(v)
        i += 1
    return TimeSeries(columns=columns, summary=summary)


def _looks_numeric(v: str) -> bool:
    try:
        float(v)
        return True
    except ValueError:
        return False


def _need(buf: bytes, off: int, n: int, what: str):
    if off + n > len(buf):
        raise SchemaError(f"truncated checkpoint at {what}: need {off + n} bytes, have {len(buf)}")


def read_checkpoint(path) -> Checkpoint:
    with open(path, "rb") as fh:
        buf = fh.read()
    _need(buf, 0, 8, "header")
    if buf[:4] != MAGIC:
        raise SchemaError(f"bad magic {buf[:4]!r}, expected {MAGIC!r}")
    (version,) = struct.unpack_from("<I", buf, 4)
    if version != VERSION:
        raise SchemaError(f"unsupported checkpoint version {version}")
    off = 8
    _need(buf, off, struct.calcsize("<4I8d"), "domain block")
    dim, nx, ny, nz, lx, ly, zmax, stretch, ell, nu, mu, eps = struct.unpack_from("<4I8d", buf, off)
    off += struct.calcsize("<4I8d")
    _need(buf, off, 12, "time/count")
    (t,) = struct.unpack_from("<d", buf, off)
    off += 8
    (nfields,) = struct.unpack_from("<I", buf, off)
    off += 4
    shape = (nx, nz) if dim == 2 else (nx, ny, nz)
    count = int(np.prod(shape))
    fields = {}
    for _ in range(nfields):
        _need(buf, off, 4, "name length")
        (nlen,) = struct.unpack_from("<I", buf, off)
        off += 4
        _need(buf, off, nlen, "name")
        name = buf[off : off + nlen].decode("utf-8")
        off += nlen
        _need(buf, off, 16 * count, f"field {name!r}")
        fields[name] = np.frombuffer(buf[off : off + 16 * count], dtype="<c16").reshape(shape)
        off += 16 * count
    return Checkpoint(
        dim=dim, Nx=nx, Ny=ny, Nz=nz, Lx=lx, Ly=ly, Zmax=zmax, stretch=stretch,
        ell=ell, nu=nu, mu=mu, eps=eps, time=t, fields=fields,
    )
