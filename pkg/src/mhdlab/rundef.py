"""The fully validated run configuration assembled by the config parser."""

from __future__ import annotations

from dataclasses import dataclass

from .gevrey import GevreyParams
from .grid import DomainConfig
from .recipes import InitialRecipe
from .solver import SolverConfig

__all__ = ["RunConfig"]


@dataclass(frozen=True)
class RunConfig:
    domain: DomainConfig
    solver: SolverConfig
    gevrey: GevreyParams
    beta: float
    initial: InitialRecipe
    output_dir: str
    diagnostics: tuple[str, ...]
    seed: int

    @classmethod
    def defaults(cls, output_dir: str) -> "RunConfig":
        return cls(
            domain=DomainConfig(),
            solver=SolverConfig(dt=2e-3, T_final=0.5),
            gevrey=GevreyParams(rho=0.5, sigma=1.5),
            beta=0.2,
            initial=InitialRecipe(),
            output_dir=output_dir,
            diagnostics=(),
            seed=0,
        )
