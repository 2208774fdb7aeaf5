"""Numerical tolerances shared across the package."""

from __future__ import annotations

from dataclasses import dataclass, replace


@dataclass(frozen=True)
class Tolerances:
    # symmetry check: ||A - A^H||_F <= hermitian_tol * (1 + ||A||_F)
    hermitian_tol: float = 1e-10
    unitary_tol: float = 1e-10
    recomp_tol: float = 1e-9
    # Loewner / PSD checks, scaled by max(1, ||A||)
    eig_tol: float = 1e-10
    # relative to the largest eigenvalue
    pd_floor: float = 1e-12
    jacobi_threshold: float = 1e-13
    max_sweeps: int = 64
    norm_tol: float = 1e-8
    quad_tol: float = 1e-7
    ortho_tol: float = 1e-7
    # ||alpha|| >= 1 - breakdown_margin is a breakdown
    breakdown_margin: float = 1e-10
    # partial-sum increment below which the Szego flag is raised
    szego_tail_tol: float = 1e-3
    default_grid: int = 4096

    def with_overrides(self, **kwargs) -> "Tolerances":
        return replace(self, **{k: v for k, v in kwargs.items() if v is not None})


DEFAULT_TOLERANCES = Tolerances()
