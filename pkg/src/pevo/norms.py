"""Gevrey-Sobolev norms |<D>_h^m e^{rho <D>_h^(1/theta)} u|_{L^2} on the grid."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import OVERFLOW_EXPONENT, ConfigError
from .grid import Grid, StateVector, bracket_h


@dataclass(frozen=True)
class GevreyNormSpec:
    m: float = 0.0
    rho: float = 0.0
    theta: float = 2.0
    h: float = 1.0

    def __post_init__(self):
        if not self.theta > 1:
            raise ConfigError(f"theta must exceed 1, got {self.theta}")
        if not self.h > 0:
            raise ConfigError(f"h must be positive, got {self.h}")
        for name in ("m", "rho"):
            if not np.isfinite(getattr(self, name)):
                raise ConfigError(f"{name} must be finite")

    def exponent(self, grid: Grid) -> np.ndarray:
        """log of the weight at every lattice frequency, guarded against overflow."""
        b = bracket_h(grid.xi_nodes, self.h)
        top = abs(self.rho) * float(bracket_h(grid.xi_max, self.h)) ** (1.0 / self.theta)
        if top >= OVERFLOW_EXPONENT:
            raise ConfigError(f"Gevrey weight overflows: |rho| <xi_max>^(1/theta) = {top:.1f} >= {OVERFLOW_EXPONENT:g}")
        return self.m * np.log(b) + self.rho * b ** (1.0 / self.theta)

    def weight(self, grid: Grid) -> np.ndarray:
        return np.exp(self.exponent(grid))


def _spectrum(u, grid):
    if isinstance(u, StateVector):
        return u.spectrum
    return grid.forward(np.asarray(u, dtype=complex))


def gs_norm(u, spec: GevreyNormSpec, grid: Grid | None = None) -> float:
    """Norm of a StateVector (or of raw samples along the last axis when ``grid`` is given)."""
    grid = u.grid if isinstance(u, StateVector) else grid
    if grid is None:
        raise ValueError("raw sample arrays need a grid")
    w = spec.weight(grid)
    uh = _spectrum(u, grid)
    return np.sqrt(np.sum(np.abs(w * uh) ** 2, axis=-1) / (2.0 * grid.L))


def gs_weight_apply(u: StateVector, spec: GevreyNormSpec, direction: int = 1) -> StateVector:
    if direction not in (1, -1):
        raise ValueError("direction must be +1 or -1")
    e = spec.exponent(u.grid)
    return StateVector.from_spectrum(u.grid, np.exp(direction * e) * u.spectrum)
