"""Named analytic initial-condition families.

Every family produces data compatible with the wall conditions: velocity
profiles vanish at z = 0 and magnetic profiles have zero wall slope.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grid import Field, Grid
from .state import State, state_from_tangential, validate_compatibility

__all__ = ["InitialRecipe", "U_PROFILES", "F_PROFILES"]

U_PROFILES = {
    "zgauss": lambda z: z * np.exp(-(z**2)),
    "layer": lambda z: (1.0 - np.exp(-z)) * np.exp(-z),
}

F_PROFILES = {
    "gauss": lambda z: np.exp(-(z**2)),
    "sech": lambda z: 1.0 / np.cosh(z),
}


@dataclass(frozen=True)
class InitialRecipe:
    family: str = "single_mode"
    mode: int = 1
    amplitude_u: float = 0.01
    amplitude_f: float = 0.01
    profile_u: str = "zgauss"
    profile_f: str = "gauss"

    def __post_init__(self):
        if self.family not in ("zero", "single_mode"):
            raise ValueError(f"unknown initial family {self.family!r}; choose zero or single_mode")
        if self.family == "single_mode":
            if self.mode < 1:
                raise ValueError(f"mode must be >= 1, got {self.mode}")
            if abs(self.amplitude_u) > 10 or abs(self.amplitude_f) > 10:
                raise ValueError("amplitudes are limited to |a| <= 10")
            if self.profile_u not in U_PROFILES:
                raise ValueError(f"unknown profile_u {self.profile_u!r}; choose from {sorted(U_PROFILES)}")
            if self.profile_f not in F_PROFILES:
                raise ValueError(f"unknown profile_f {self.profile_f!r}; choose from {sorted(F_PROFILES)}")

    def build(self, grid: Grid) -> State:
        n = grid.dim - 1
        if self.family == "zero":
            u_h = tuple(Field.zeros(grid) for _ in range(n))
            f_h = tuple(Field.zeros(grid) for _ in range(n))
            return state_from_tangential(0.0, u_h, f_h, enforce_bc=False)
        if self.mode > grid.config.Nx // 3:
            raise ValueError(
                f"mode {self.mode} outside the dealiased band (<= {grid.config.Nx // 3}) at Nx = {grid.config.Nx}"
            )
        cfg = grid.config
        x = np.arange(cfg.Nx) * (cfg.Lx / cfg.Nx)
        kx = 2.0 * np.pi * self.mode / cfg.Lx
        pu = U_PROFILES[self.profile_u](grid.z_levels)
        pf = F_PROFILES[self.profile_f](grid.z_levels)
        if grid.dim == 2:
            u_phys = self.amplitude_u * np.sin(kx * x)[:, None] * pu[None, :]
            f_phys = self.amplitude_f * np.cos(kx * x)[:, None] * pf[None, :]
            u_h = (Field.from_physical(grid, u_phys),)
            f_h = (Field.from_physical(grid, f_phys),)
        else:
            u_phys = self.amplitude_u * np.sin(kx * x)[:, None, None] * pu[None, None, :]
            f_phys = self.amplitude_f * np.cos(kx * x)[:, None, None] * pf[None, None, :]
            u_phys = np.broadcast_to(u_phys, grid.shape).copy()
            f_phys = np.broadcast_to(f_phys, grid.shape).copy()
            u_h = (Field.from_physical(grid, u_phys), Field.zeros(grid))
            f_h = (Field.from_physical(grid, f_phys), Field.zeros(grid))
        state = state_from_tangential(0.0, u_h, f_h)
        validate_compatibility(state)
        return state
