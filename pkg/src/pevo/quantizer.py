"""Left (Kohn-Nirenberg) and reverse quantization on the periodic grid.

    left     (p(x,D)u)_i   = (1/2L) sum_j e^{i x_i xi_j} p(x_i, xi_j) uhat_j
    reverse  w_j           = (2L/N) sum_i e^{-i x_i xi_j} p(x_i, xi_j) u_i ,  out = inverse(w)

Dense matrices (value space to value space):

    A_left[i, k]    = (1/N) sum_n p(x_i, xi_n) w^{n (i-k)}
    A_reverse[k, i] = (1/N) sum_n p(x_i, xi_n) w^{n (k-i)}      w = e^{2 pi i / N}

Each row of A_left is a length-N FFT of the modulated symbol row, which is the
default assembly path; ``mode="direct"`` uses the compiled O(N^3) sums.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from . import kernels
from .grid import Grid, StateVector
from .symbols import SymbolGrid


@lru_cache(maxsize=16)
def _roots(N: int) -> np.ndarray:
    r = kernels.roots_of_unity(N)
    r.setflags(write=False)
    return r


@lru_cache(maxsize=16)
def _modulation(N: int) -> np.ndarray:
    i = np.arange(N)[:, None]
    n = np.arange(N)[None, :] - N // 2
    w = _roots(N)[np.mod(i * n, N)]
    w.setflags(write=False)
    return w


@dataclass
class OperatorMatrix:
    entries: np.ndarray
    grid: Grid
    label: str = ""

    def __post_init__(self):
        e = np.asarray(self.entries, dtype=complex)
        if e.shape != (self.grid.N, self.grid.N):
            raise ValueError(f"matrix must be {self.grid.N}x{self.grid.N}, got {e.shape}")
        if not np.all(np.isfinite(e)):
            raise ValueError(f"operator {self.label!r} has non-finite entries")
        self.entries = e

    def apply(self, u):
        if isinstance(u, StateVector):
            return StateVector(self.grid, self.entries @ u.values)
        return self.entries @ u

    def __matmul__(self, other):
        if isinstance(other, OperatorMatrix):
            return OperatorMatrix(self.entries @ other.entries, self.grid, f"{self.label}*{other.label}")
        return self.apply(other)

    def export(self, path_prefix: str):
        """Row-major complex128 binary plus a JSON sidecar."""
        np.ascontiguousarray(self.entries, dtype=np.complex128).tofile(path_prefix + ".bin")
        meta = {"N": self.grid.N, "L": self.grid.L, "h": self.grid.h, "label": self.label,
                "dtype": "complex128", "order": "row-major"}
        with open(path_prefix + ".json", "w") as fh:
            json.dump(meta, fh, sort_keys=True, indent=2)

    @classmethod
    def load(cls, path_prefix: str) -> "OperatorMatrix":
        with open(path_prefix + ".json") as fh:
            meta = json.load(fh)
        N = meta["N"]
        e = np.fromfile(path_prefix + ".bin", dtype=np.complex128).reshape(N, N)
        return cls(e, Grid(meta["L"], N, meta["h"]), meta["label"])


def _check(sg: SymbolGrid, u: StateVector):
    if sg.grid != u.grid:
        raise ValueError("symbol and state live on different grids")


def _table(sg) -> np.ndarray:
    t = sg.table if isinstance(sg, SymbolGrid) else sg
    return np.ascontiguousarray(t, dtype=np.complex128)


def apply_left(sg: SymbolGrid, u: StateVector) -> StateVector:
    _check(sg, u)
    g = u.grid
    s = np.ascontiguousarray(g._alt * u.spectrum / (2.0 * g.L), dtype=np.complex128)
    return StateVector(g, kernels.left_apply(_table(sg), s, _roots(g.N)))


def apply_reverse(sg: SymbolGrid, u: StateVector) -> StateVector:
    _check(sg, u)
    g = u.grid
    w = kernels.reverse_apply(_table(sg), np.ascontiguousarray(u.values, dtype=np.complex128), _roots(g.N))
    w = (2.0 * g.L / g.N) * g._alt * w
    return StateVector.from_spectrum(g, w)


def fourier_multiplier(m, u: StateVector) -> StateVector:
    g = u.grid
    mv = m(g.xi_nodes) if callable(m) else np.asarray(m)
    mv = np.broadcast_to(mv, (g.N,))
    if not np.all(np.isfinite(mv)):
        raise FloatingPointError("multiplier has non-finite values on the lattice")
    return StateVector.from_spectrum(g, mv * u.spectrum)


def left_matrix(table: np.ndarray, mode: str = "fft") -> np.ndarray:
    P = _table(table)
    N = P.shape[0]
    if mode == "fft":
        return np.fft.fft(np.fft.ifftshift(P * _modulation(N), axes=1), axis=1) / N
    if mode == "direct":
        return kernels.assemble(P, 1, _roots(N))
    raise ValueError(f"unknown assembly mode {mode!r}")


def reverse_matrix(table: np.ndarray, mode: str = "fft") -> np.ndarray:
    P = _table(table)
    N = P.shape[0]
    if mode == "fft":
        return np.fft.ifft(np.fft.ifftshift(P * np.conj(_modulation(N)), axes=1), axis=1).T
    if mode == "direct":
        return kernels.assemble(P, -1, _roots(N)).T
    raise ValueError(f"unknown assembly mode {mode!r}")


def operator_matrix(sg: SymbolGrid, side: str = "left", mode: str = "fft") -> OperatorMatrix:
    if side == "left":
        e = left_matrix(sg.table, mode)
    elif side == "reverse":
        e = reverse_matrix(sg.table, mode)
    else:
        raise ValueError("side must be 'left' or 'reverse'")
    return OperatorMatrix(e, sg.grid, f"{side}({sg.label})")


def multiplier_matrix(values: np.ndarray, grid: Grid) -> np.ndarray:
    """Dense circulant realization of the multiplier with centered samples."""
    c = np.fft.ifft(np.fft.ifftshift(np.asarray(values, dtype=complex)))
    N = grid.N
    idx = np.mod(np.arange(N)[:, None] - np.arange(N)[None, :], N)
    return c[idx]


def multiplier_operator(m, grid: Grid, label: str = "multiplier") -> OperatorMatrix:
    vals = m(grid.xi_nodes) if callable(m) else m
    return OperatorMatrix(multiplier_matrix(vals, grid), grid, label)
