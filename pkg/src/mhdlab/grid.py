"""Discrete half-plane domain and the operators everything else is built on.

The tangential directions (x, and y in 3D) are periodic and handled
spectrally; the normal direction z lives on a truncated, optionally
stretched grid [0, Zmax] handled by second-order finite differences.

Layout conventions
------------------
A :class:`Field` stores complex Fourier coefficients along the tangential
axes and collocation values along z, shape (Nx, Nz) in 2D and
(Nx, Ny, Nz) in 3D, with z always the last axis.  Coefficients follow
numpy fft ordering and are normalized so that physical values are
``sum_k c_k exp(i k x)``; real physical data therefore corresponds to a
Hermitian spectrum.

The normal levels are graded by ``z_j = Zmax (e^{s q_j} - 1)/(e^s - 1)``
with ``q_j = j/(Nz-1)`` and ``s = stretch - 1``, so ``stretch = 1`` is the
uniform grid and larger values cluster points at the wall.  Quadrature in
z is the trapezoid rule on those levels; its weights telescope so they
always sum to Zmax exactly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "DomainConfig",
    "Grid",
    "Field",
    "fd_weights",
    "ddx_spectral",
    "ddy_spectral",
    "ddz_fd",
    "d2dz2_fd",
    "integrate_z_cumulative",
    "dealias",
    "multiply",
    "inner_product",
    "inner_product_weighted",
    "l2_norm",
    "weighted_norm",
    "hermitian_defect",
]


def fd_weights(x: np.ndarray, x0: float, m: int) -> np.ndarray:
    """Weights of the m-th derivative at x0 on arbitrary nodes x (Fornberg)."""
    x = np.asarray(x, dtype=float)
    n = len(x)
    if n < m + 1:
        raise ValueError(f"need at least {m + 1} nodes for derivative order {m}, got {n}")
    c = np.zeros((n, m + 1))
    c1 = 1.0
    c4 = x[0] - x0
    c[0, 0] = 1.0
    for i in range(1, n):
        mn = min(i, m)
        c2 = 1.0
        c5 = c4
        c4 = x[i] - x0
        for j in range(i):
            c3 = x[i] - x[j]
            c2 *= c3
            if j == i - 1:
                for k in range(mn, 0, -1):
                    c[i, k] = c1 * (k * c[i - 1, k - 1] - c5 * c[i - 1, k]) / c2
                c[i, 0] = -c1 * c5 * c[i - 1, 0] / c2
            for k in range(mn, 0, -1):
                c[j, k] = (c4 * c[j, k] - k * c[j, k - 1]) / c3
            c[j, 0] = c4 * c[j, 0] / c3
        c1 = c2
    return c[:, m]


@dataclass(frozen=True)
class DomainConfig:
    """Physical and discrete parameters of the computational domain.

    ``stretch`` maps to the grading exponent ``s = stretch - 1`` so that
    stretch = 1 means a uniform normal grid.  ``ell`` is the exponent of
    the <z> = (1+z^2)^(1/2) weight used by the weighted inner products.
    """

    dim: int = 2
    Lx: float = 2.0 * np.pi
    Ly: float | None = None
    Zmax: float = 10.0
    Nx: int = 32
    Ny: int | None = None
    Nz: int = 64
    stretch: float = 1.0
    ell: float = 1.0
    nu: float = 1e-2
    mu: float = 1e-2
    eps: float = 0.0

    def __post_init__(self):
        if self.dim not in (2, 3):
            raise ValueError(f"dim must be 2 or 3, got {self.dim}")
        if self.Nx < 8 or self.Nx % 2 != 0:
            raise ValueError(f"Nx must be even and >= 8, got {self.Nx}")
        if self.dim == 3:
            if self.Ny is None or self.Ly is None:
                raise ValueError("Ny and Ly are required when dim = 3")
            if self.Ny < 8 or self.Ny % 2 != 0:
                raise ValueError(f"Ny must be even and >= 8, got {self.Ny}")
            if self.Ly <= 0:
                raise ValueError(f"Ly must be positive, got {self.Ly}")
        else:
            if self.Ny is not None or self.Ly is not None:
                raise ValueError("Ny and Ly are only allowed when dim = 3")
        if self.Nz < 16:
            raise ValueError(f"Nz must be >= 16, got {self.Nz}")
        if self.Lx <= 0:
            raise ValueError(f"Lx must be positive, got {self.Lx}")
        if self.Zmax <= 0:
            raise ValueError(f"Zmax must be positive, got {self.Zmax}")
        if self.stretch < 1.0:
            raise ValueError(f"stretch must be >= 1 (1 = uniform), got {self.stretch}")
        if self.ell < 1.0:
            raise ValueError(f"ell must be >= 1, got {self.ell}")
        if self.nu <= 0 or self.mu <= 0:
            raise ValueError(f"nu and mu must be positive, got nu={self.nu}, mu={self.mu}")
        if self.eps < 0:
            raise ValueError(f"eps must be >= 0, got {self.eps}")


def _normal_levels(Nz: int, Zmax: float, stretch: float) -> np.ndarray:
    q = np.arange(Nz, dtype=float) / (Nz - 1)
    s = stretch - 1.0
    if s == 0.0:
        z = Zmax * q
    else:
        z = Zmax * np.expm1(s * q) / np.expm1(s)
    z[0] = 0.0
    z[-1] = Zmax
    return z


class Grid:
    """Immutable discrete domain: levels, wavenumbers, weights, stencils."""

    def __init__(self, config: DomainConfig):
        self.config = config
        self.dim = config.dim
        self.z_levels = _normal_levels(config.Nz, config.Zmax, config.stretch)
        dz = np.diff(self.z_levels)
        if np.any(dz <= 0):
            raise ValueError("normal levels must be strictly increasing")
        # trapezoid weights on the stretched levels; telescoping sum == Zmax
        w = np.zeros(config.Nz)
        w[:-1] += 0.5 * dz
        w[1:] += 0.5 * dz
        self.quad_weights = w
        self.dz_min = float(dz.min())

        self.k_values = 2.0 * np.pi * np.fft.fftfreq(config.Nx, d=config.Lx / config.Nx)
        if config.dim == 3:
            self.ky_values = 2.0 * np.pi * np.fft.fftfreq(config.Ny, d=config.Ly / config.Ny)
        else:
            self.ky_values = None

        self._build_dealias_mask()
        self._build_z_stencils()
        self._zw_cache: dict[float, np.ndarray] = {}

    # -- tangential machinery -------------------------------------------------

    @property
    def tangential_shape(self) -> tuple[int, ...]:
        if self.dim == 2:
            return (self.config.Nx,)
        return (self.config.Nx, self.config.Ny)

    @property
    def shape(self) -> tuple[int, ...]:
        return self.tangential_shape + (self.config.Nz,)

    @property
    def tangential_volume(self) -> float:
        if self.dim == 2:
            return self.config.Lx
        return self.config.Lx * self.config.Ly

    def _build_dealias_mask(self):
        cfg = self.config
        mx = np.abs(np.fft.fftfreq(cfg.Nx) * cfg.Nx) <= cfg.Nx // 3
        if self.dim == 2:
            self.dealias_mask = mx[:, None]
        else:
            my = np.abs(np.fft.fftfreq(cfg.Ny) * cfg.Ny) <= cfg.Ny // 3
            self.dealias_mask = mx[:, None, None] & my[None, :, None]

    def ik_multiplier(self, axis: int, order: int) -> np.ndarray:
        """(ik)^order broadcast over the field shape; Nyquist zeroed for odd order."""
        k = self.k_values if axis == 0 else self.ky_values
        n = len(k)
        mult = (1j * k) ** order
        if order % 2 == 1:
            mult = mult.copy()
            mult[n // 2] = 0.0
        shape = [1] * (self.dim)  # tangential axes + z
        shape[axis] = n
        return mult.reshape(shape)

    # -- normal-direction stencils --------------------------------------------

    def _build_z_stencils(self):
        z = self.z_levels
        Nz = len(z)
        # interior 3-point first and second derivatives
        cm1 = np.zeros(Nz)
        c01 = np.zeros(Nz)
        cp1 = np.zeros(Nz)
        cm2 = np.zeros(Nz)
        c02 = np.zeros(Nz)
        cp2 = np.zeros(Nz)
        hm = z[1:-1] - z[:-2]
        hp = z[2:] - z[1:-1]
        cm1[1:-1] = -hp / (hm * (hm + hp))
        c01[1:-1] = (hp - hm) / (hm * hp)
        cp1[1:-1] = hm / (hp * (hm + hp))
        cm2[1:-1] = 2.0 / (hm * (hm + hp))
        c02[1:-1] = -2.0 / (hm * hp)
        cp2[1:-1] = 2.0 / (hp * (hm + hp))
        self._d1_interior = (cm1, c01, cp1)
        self._d2_interior = (cm2, c02, cp2)
        # one-sided boundary rows, second order: 3 nodes for d/dz, 4 for d2/dz2
        self.d1_row_bot = fd_weights(z[:3], z[0], 1)
        self.d1_row_top = fd_weights(z[-3:], z[-1], 1)
        self.d2_row_bot = fd_weights(z[:4], z[0], 2)
        self.d2_row_top = fd_weights(z[-4:], z[-1], 2)

    def z_weight(self, j: float) -> np.ndarray:
        """<z>^(2(ell+j)) * quadrature weights, cached per j."""
        key = float(j)
        if key not in self._zw_cache:
            zz = 1.0 + self.z_levels**2
            self._zw_cache[key] = self.quad_weights * zz ** (self.config.ell + key)
        return self._zw_cache[key]


@dataclass
class Field:
    """One scalar unknown: complex tangential spectrum x normal collocation."""

    grid: Grid
    data: np.ndarray

    @classmethod
    def zeros(cls, grid: Grid) -> "Field":
        return cls(grid, np.zeros(grid.shape, dtype=complex))

    @classmethod
    def from_physical(cls, grid: Grid, values: np.ndarray) -> "Field":
        values = np.asarray(values, dtype=float)
        if values.shape != grid.shape:
            raise ValueError(f"physical values shape {values.shape} != grid shape {grid.shape}")
        axes = tuple(range(grid.dim - 1)) if grid.dim == 2 else (0, 1)
        n = np.prod(grid.tangential_shape)
        spec = np.fft.fftn(values, axes=axes) / n
        return cls(grid, spec)

    def physical(self) -> np.ndarray:
        axes = (0,) if self.grid.dim == 2 else (0, 1)
        n = np.prod(self.grid.tangential_shape)
        return np.fft.ifftn(self.data * n, axes=axes).real

    def copy(self) -> "Field":
        return Field(self.grid, self.data.copy())

    def __add__(self, other: "Field") -> "Field":
        return Field(self.grid, self.data + other.data)

    def __sub__(self, other: "Field") -> "Field":
        return Field(self.grid, self.data - other.data)

    def __mul__(self, scalar: float) -> "Field":
        return Field(self.grid, self.data * scalar)

    __rmul__ = __mul__

    def __neg__(self) -> "Field":
        return Field(self.grid, -self.data)


def hermitian_defect(a: Field) -> float:
    """max |c(-k) - conj(c(k))| over all tangential modes (must reflect jointly in 3D)."""
    d = a.data
    if a.grid.dim == 3:
        ix = (-np.arange(d.shape[0])) % d.shape[0]
        iy = (-np.arange(d.shape[1])) % d.shape[1]
        flipped = d[np.ix_(ix, iy, np.arange(d.shape[2]))]
    else:
        ix = (-np.arange(d.shape[0])) % d.shape[0]
        flipped = d[ix, :]
    return float(np.abs(flipped - np.conj(d)).max())


# -- derivative and integral operators ----------------------------------------


def ddx_spectral(a: Field, order: int = 1) -> Field:
    """Tangential x-derivative of the given order, exact on retained modes."""
    return Field(a.grid, a.data * a.grid.ik_multiplier(0, order))


def ddy_spectral(a: Field, order: int = 1) -> Field:
    if a.grid.dim != 3:
        raise ValueError("ddy_spectral requires a 3D grid")
    return Field(a.grid, a.data * a.grid.ik_multiplier(1, order))


def tangential_derivative(a: Field, axis: int, order: int = 1) -> Field:
    if order == 0:
        return a.copy()
    return ddx_spectral(a, order) if axis == 0 else ddy_spectral(a, order)


def _apply_z_stencil(grid: Grid, data: np.ndarray, interior, row_bot, row_top, nb: int) -> np.ndarray:
    cm, c0, cp = interior
    out = np.empty_like(data)
    out[..., 1:-1] = (
        cm[1:-1] * data[..., :-2] + c0[1:-1] * data[..., 1:-1] + cp[1:-1] * data[..., 2:]
    )
    out[..., 0] = sum(row_bot[k] * data[..., k] for k in range(nb))
    out[..., -1] = sum(row_top[k] * data[..., -nb + k] for k in range(nb))
    return out


def ddz_fd(a: Field) -> Field:
    """d/dz: centered 3-point interior, one-sided second-order rows at the walls."""
    g = a.grid
    return Field(g, _apply_z_stencil(g, a.data, g._d1_interior, g.d1_row_bot, g.d1_row_top, 3))


def d2dz2_fd(a: Field) -> Field:
    g = a.grid
    return Field(g, _apply_z_stencil(g, a.data, g._d2_interior, g.d2_row_bot, g.d2_row_top, 4))


def integrate_z_cumulative(a: Field) -> Field:
    """Trapezoid cumulative integral from the wall; exactly zero at z = 0."""
    g = a.grid
    dz = np.diff(g.z_levels)
    seg = 0.5 * dz * (a.data[..., :-1] + a.data[..., 1:])
    out = np.zeros_like(a.data)
    np.cumsum(seg, axis=-1, out=out[..., 1:])
    return Field(g, out)


def dealias(a: Field) -> Field:
    return Field(a.grid, np.where(a.grid.dealias_mask, a.data, 0.0))


def multiply(a: Field, b: Field) -> Field:
    """Pointwise product evaluated in physical space, 2/3-rule dealiased."""
    if a.grid is not b.grid:
        raise ValueError("fields live on different grids")
    prod = Field.from_physical(a.grid, a.physical() * b.physical())
    return dealias(prod)


# -- inner products ------------------------------------------------------------


def _check_same_grid(a: Field, b: Field):
    if a.grid is not b.grid:
        raise ValueError("fields live on different grids")


def inner_product(a: Field, b: Field) -> float:
    """Unweighted L2 inner product over the slab, Parseval in x, trapezoid in z."""
    _check_same_grid(a, b)
    g = a.grid
    prod = (a.data * np.conj(b.data)).real
    return float(g.tangential_volume * np.tensordot(prod, g.quad_weights, axes=([-1], [0])).sum())


def inner_product_weighted(a: Field, b: Field, j: int = 0) -> float:
    """(<z>^(ell+j) a, <z>^(ell+j) b)_{L2}; symmetric and bilinear."""
    _check_same_grid(a, b)
    if j < 0:
        raise ValueError(f"j must be >= 0, got {j}")
    g = a.grid
    prod = (a.data * np.conj(b.data)).real
    return float(g.tangential_volume * np.tensordot(prod, g.z_weight(j), axes=([-1], [0])).sum())


def l2_norm(a: Field) -> float:
    return np.sqrt(max(inner_product(a, a), 0.0))


def interior_l2_norm(a: Field, skip_bottom: int = 2, skip_top: int = 1) -> float:
    """L2 norm over the normal rows where the scheme approximates the PDE.

    The wall row carries a boundary closure instead of the equations, and its
    one-sided stencils leave a non-smooth truncation-error jump that a second
    derivative amplifies to O(1) one row in; residual diagnostics therefore
    skip the wall row plus one neighbor (and the truncation row at Zmax).
    """
    g = a.grid
    sl = slice(skip_bottom, -skip_top if skip_top else None)
    prod = (a.data * np.conj(a.data)).real[..., sl]
    val = g.tangential_volume * np.tensordot(prod, g.quad_weights[sl], axes=([-1], [0])).sum()
    return np.sqrt(max(val, 0.0))


def weighted_norm(a: Field, j: int = 0) -> float:
    return np.sqrt(max(inner_product_weighted(a, a, j), 0.0))


def linf_norm(a: Field) -> float:
    return float(np.abs(a.physical()).max())
