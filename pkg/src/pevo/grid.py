"""Periodic spatial/frequency lattice and the discrete Fourier contract.

Conventions (fixed here, used everywhere else):

    x_i  = -L + 2L i / N                 i = 0..N-1
    xi_j = (pi / L) (j - N/2)            j = 0..N-1   (centered ordering)

    forward   uhat_j = (2L/N) sum_i exp(-i xi_j x_i) u_i
    inverse   u_i    = (1/2L) sum_j exp(+i xi_j x_i) uhat_j

so that the inverse is the Riemann sum of the continuous inversion with
d-bar xi = dxi / 2pi, and Parseval reads (2L/N) sum |u|^2 = (1/2L) sum |uhat|^2.
With n = j - N/2 one has exp(i x_i xi_j) = (-1)^n exp(2 pi i i n / N), so both
transforms are a sign flip plus an FFT.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np


def bracket_h(xi, h):
    """Japanese bracket sqrt(h^2 + xi^2)."""
    xi = np.asarray(xi, dtype=float)
    return np.sqrt(h * h + xi * xi) if xi.ndim else float(np.sqrt(h * h + xi * xi))


def _is_pow2(n: int) -> bool:
    return n > 0 and (n & (n - 1)) == 0


@dataclass(frozen=True)
class Grid:
    L: float
    N: int
    h: float = 1.0

    def __post_init__(self):
        if not (isinstance(self.N, (int, np.integer)) and _is_pow2(int(self.N))):
            raise ValueError(f"N must be a power of two, got {self.N!r}")
        if self.N < 8:
            raise ValueError(f"N must be at least 8, got {self.N}")
        if not self.L > 0:
            raise ValueError(f"L must be positive, got {self.L}")
        if not self.h >= 1:
            raise ValueError(f"h must be >= 1, got {self.h}")
        object.__setattr__(self, "N", int(self.N))
        object.__setattr__(self, "L", float(self.L))
        object.__setattr__(self, "h", float(self.h))

    @property
    def dx(self) -> float:
        return 2.0 * self.L / self.N

    @property
    def dxi(self) -> float:
        return np.pi / self.L

    @cached_property
    def x_nodes(self) -> np.ndarray:
        x = -self.L + self.dx * np.arange(self.N)
        x.setflags(write=False)
        return x

    @cached_property
    def n_index(self) -> np.ndarray:
        """Integer frequency labels n = j - N/2."""
        n = np.arange(self.N) - self.N // 2
        n.setflags(write=False)
        return n

    @cached_property
    def xi_nodes(self) -> np.ndarray:
        xi = self.dxi * self.n_index
        xi.setflags(write=False)
        return xi

    @property
    def xi_max(self) -> float:
        return self.dxi * (self.N // 2)

    @cached_property
    def _alt(self) -> np.ndarray:
        a = np.where(self.n_index % 2 == 0, 1.0, -1.0)
        a.setflags(write=False)
        return a

    def with_h(self, h: float) -> "Grid":
        return Grid(self.L, self.N, h)

    def bracket(self, xi=None):
        return bracket_h(self.xi_nodes if xi is None else xi, self.h)

    # -- transforms ---------------------------------------------------
    def forward(self, u: np.ndarray) -> np.ndarray:
        """Values -> centered spectrum (works along the last axis)."""
        f = np.fft.fft(u, axis=-1)
        f = np.fft.fftshift(f, axes=-1)
        return (2.0 * self.L / self.N) * self._alt * f

    def inverse(self, uhat: np.ndarray) -> np.ndarray:
        """Centered spectrum -> values (works along the last axis)."""
        g = np.fft.ifftshift(self._alt * uhat, axes=-1)
        return np.fft.ifft(g, axis=-1) * (self.N / (2.0 * self.L))

    def multiply(self, m: np.ndarray, u: np.ndarray) -> np.ndarray:
        """Apply the Fourier multiplier with centered samples m to values u."""
        mf = np.fft.ifftshift(m)
        return np.fft.ifft(mf * np.fft.fft(u, axis=-1), axis=-1)

    def l2(self, u: np.ndarray) -> float:
        return float(np.sqrt(self.dx * np.sum(np.abs(u) ** 2)))

    def inner(self, u: np.ndarray, v: np.ndarray) -> complex:
        return complex(self.dx * np.vdot(v, u))

    @cached_property
    def phase_table(self) -> np.ndarray:
        """E[i, j] = exp(i x_i xi_j), built with exact integer reduction."""
        i = np.arange(self.N)[:, None]
        n = self.n_index[None, :]
        k = np.mod(i * n, self.N)
        e = np.exp(2j * np.pi * k / self.N) * self._alt[None, :]
        e.setflags(write=False)
        return e

    def state(self, values) -> "StateVector":
        return StateVector(self, np.asarray(values, dtype=complex))


def make_grid(L: float, N: int, h: float = 1.0) -> Grid:
    return Grid(L, N, h)


@dataclass
class StateVector:
    """Samples of a function on the grid with a lazily cached spectrum."""

    grid: Grid
    _values: np.ndarray
    _spectrum: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        v = np.array(self._values, dtype=complex)
        if v.shape != (self.grid.N,):
            raise ValueError(f"expected {self.grid.N} samples, got shape {v.shape}")
        self._values = v

    @classmethod
    def from_spectrum(cls, grid: Grid, uhat) -> "StateVector":
        sv = cls(grid, grid.inverse(np.asarray(uhat, dtype=complex)))
        sv._spectrum = np.array(uhat, dtype=complex)
        return sv

    @property
    def values(self) -> np.ndarray:
        return self._values

    @values.setter
    def values(self, v):
        self._values = np.array(v, dtype=complex)
        self._spectrum = None

    @property
    def spectrum(self) -> np.ndarray:
        # recomputed if absent; no shared mutable state between instances
        s = self._spectrum
        if s is None:
            s = self.grid.forward(self._values)
            self._spectrum = s
        return s

    def l2(self) -> float:
        return self.grid.l2(self._values)


def spectral_derivative(u: StateVector, order: int) -> StateVector:
    """D_x^order u with D = -i d/dx, as the multiplier xi^order."""
    if order < 0:
        raise ValueError("order must be nonnegative")
    if order == 0:
        return StateVector(u.grid, u.values.copy())
    g = u.grid
    m = g.xi_nodes.astype(float) ** order
    return StateVector.from_spectrum(g, m * u.spectrum)
