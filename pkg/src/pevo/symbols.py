"""Scalar symbols: cutoffs, the correctors lambda_{p-k}, their sum and the time weight.

Symbols are evaluated on tensor lattices ``x[:, None], xi[None, :]`` through
:class:`~pevo.jets.Jet` objects, which carry exact mixed derivatives; plain
values are the order-zero slot.  Finite differences are kept only as a
fallback/cross-check (:func:`symbol_derivative`).
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from math import factorial

import numpy as np

from .config import GevreyConfig
from .cutoffs import omega as _omega_derivs
from .cutoffs import psi as _psi_derivs
from .cutoffs import window
from .grid import Grid, bracket_h
from .jets import Jet
from .quadrature import adaptive_simpson, cumulative_simpson

QUAD_TOL = 1e-10


# ---------------------------------------------------------------------------
# point evaluations of the cutoffs
# ---------------------------------------------------------------------------

def omega(xi, cfg: GevreyConfig, sign_ap: int = 1) -> np.ndarray | float:
    v = _omega_derivs(xi, cfg.R_ap, sign_ap, cfg.p, 0)[0]
    return float(v) if np.ndim(v) == 0 else v


def psi(y) -> np.ndarray | float:
    v = _psi_derivs(y, 0)[0]
    return float(v) if np.ndim(v) == 0 else v


def Lambda_time(t, xi, cfg: GevreyConfig):
    """K (T - t) <xi>_h^((p-1)(1-sigma)) + rho' <xi>_h^(1/theta)."""
    t = np.asarray(t, dtype=float)
    if np.any(t < -1e-14) or np.any(t > cfg.T * (1 + 1e-12)):
        raise ValueError(f"t must lie in [0, T={cfg.T}]")
    b = bracket_h(xi, cfg.h)
    out = cfg.K * (cfg.T - t) * b ** cfg.kappa_order + cfg.rho_prime * b ** (1.0 / cfg.theta)
    return float(out) if np.ndim(out) == 0 else out


# ---------------------------------------------------------------------------
# jets of the building blocks
# ---------------------------------------------------------------------------

def _xi_jet(xi, nx, nxi, ng=1, tot=None):
    return Jet.coordinate_xi(np.asarray(xi, float)[None, :], nx, nxi, ng, tot)


def _x_jet(x, nx, nxi, ng=1, tot=None):
    return Jet.coordinate_x(np.asarray(x, float)[:, None], nx, nxi, ng, tot)


def bracket_jet(var: Jet, h: float) -> Jet:
    return (var * var + h * h).sqrt()


def omega_jet(xi, cfg, sign_ap, nx, nxi, ng=1, tot=None) -> Jet:
    """omega(xi / h) as a jet in xi."""
    d = _omega_derivs(np.asarray(xi, float) / cfg.h, cfg.R_ap, sign_ap, cfg.p, nxi)
    derivs = [d[b][None, :] / cfg.h**b for b in range(nxi + 1)]
    return Jet.from_xi_derivatives(derivs, nx, nxi, ng, tot)


def x_window_jet(x, L, cfg, nx, nxi, ng=1, tot=None) -> Jet:
    a, b = cfg.x_window
    d = window(np.asarray(x, float), a * L, b * L, nx)
    return Jet.from_x_derivatives([d[k][:, None] for k in range(nx + 1)], nx, nxi, ng, tot)


def xi_window_jet(xi, xi_max, cfg, nx, nxi, ng=1, tot=None) -> Jet:
    a, b = cfg.xi_window
    d = window(np.asarray(xi, float), a * xi_max, b * xi_max, nxi)
    return Jet.from_xi_derivatives([d[k][None, :] for k in range(nxi + 1)], nx, nxi, ng, tot)


def japanese_power_x(x, s: float, order: int) -> list:
    """Closed-form derivatives 0..order (<= 4) of <x>^(-s) = (1+x^2)^(-s/2)."""
    x = np.asarray(x, dtype=float)
    a = s / 2.0
    u = 1.0 + x * x
    out = [u**-a]
    if order >= 1:
        out.append(-2 * a * x * u ** (-a - 1))
    if order >= 2:
        out.append(-2 * a * u ** (-a - 1) + 4 * a * (a + 1) * x * x * u ** (-a - 2))
    if order >= 3:
        out.append(12 * a * (a + 1) * x * u ** (-a - 2) - 8 * a * (a + 1) * (a + 2) * x**3 * u ** (-a - 3))
    if order >= 4:
        out.append(
            12 * a * (a + 1) * u ** (-a - 2)
            - 48 * a * (a + 1) * (a + 2) * x * x * u ** (-a - 3)
            + 16 * a * (a + 1) * (a + 2) * (a + 3) * x**4 * u ** (-a - 4)
        )
    if order > 4:
        raise ValueError("closed-form derivatives are tabulated up to order 4")
    return out


def _integrand_jet(y: Jet, xi: Jet, s: float, p: int, h: float) -> Jet:
    """<y>^(-s) psi(<y> / <xi>_h^(p-1))."""
    by = bracket_jet(y, 1.0)
    weight = by.power(-s)
    ratio = by * bracket_jet(xi, h).power(-(p - 1.0))
    kmax = ratio.tot + ratio.ng - 1
    cut = ratio.compose(list(_psi_derivs(ratio.c[0, 0, 0], kmax)))
    return weight * cut


# ---------------------------------------------------------------------------
# the correctors lambda_{p-k}
# ---------------------------------------------------------------------------

class LambdaField:
    """lambda_{p-k}, Lambda and their tapered periodic versions on tensor lattices."""

    def __init__(self, cfg: GevreyConfig, sign_ap: int = 1, tol: float = QUAD_TOL):
        self.cfg = cfg
        self.sign_ap = 1 if sign_ap >= 0 else -1
        self.tol = tol

    # -- the integral I_k(x, xi) = int_0^x g_k(y, xi) dy and its xi-jet ----
    def _integral_coeffs(self, k, x, xi, nxi):
        """c[b][i, j] = (1/b!) d_xi^b I_k(x_i, xi_j), b = 0..nxi."""
        cfg = self.cfg
        s = cfg.decay(k)
        p, h = cfg.p, cfg.h
        x = np.asarray(x, float)
        xi = np.asarray(xi, float)
        z = np.abs(x)
        zu, inv = np.unique(z, return_inverse=True)
        zmax = zu[-1]
        out = np.zeros((nxi + 1, x.size, xi.size))

        B = bracket_h(xi, h) ** (p - 1)
        y_half = np.sqrt(np.maximum(0.25 * B * B - 1.0, 0.0))
        y_end = np.sqrt(np.maximum(B * B - 1.0, 0.0))
        live = np.abs(xi) > h  # omega(xi/h) vanishes identically elsewhere

        # base part int_0^w <y>^(-s) dy, shared by every column
        stops = np.unique(np.concatenate([[0.0], zu, y_half[live & (y_half < zmax)]]))
        F0 = cumulative_simpson(lambda y, o: (1.0 + y * y) ** (-s / 2.0), stops, self.tol)[:, 0]

        def base_at(w):
            return F0[np.searchsorted(stops, w)]

        for j in np.nonzero(live)[0]:
            out[0, :, j] = base_at(np.minimum(zu, y_half[j]))[inv]

        # transition part on columns whose cutoff bites inside the lattice
        cols = np.nonzero(live & (y_half < zmax))[0]
        if cols.size:
            starts, ends, owners, col_nodes = [], [], [], []
            for j in cols:
                top = min(y_end[j], zmax)
                nodes = np.unique(np.concatenate([[y_half[j]], zu[(zu > y_half[j]) & (zu < top)], [top]]))
                col_nodes.append(nodes)
                if nodes.size > 1:
                    starts.append(nodes[:-1])
                    ends.append(nodes[1:])
                    owners.append(np.full(nodes.size - 1, j))
            if starts:
                a = np.concatenate(starts)
                b = np.concatenate(ends)
                own = np.concatenate(owners)
                xij = xi

                def f(yv, o):
                    yj = Jet.coordinate_x(yv, 0, nxi)
                    xj = Jet.coordinate_xi(xij[own[o]], 0, nxi)
                    return _integrand_jet(yj, xj, s, p, h).c[0, 0].T

                cells = adaptive_simpson(f, a, b, self.tol / max(8, zu.size))
                pos = 0
                for j, nodes in zip(cols, col_nodes):
                    m = nodes.size - 1
                    if m <= 0:
                        continue
                    cum = np.vstack([np.zeros((1, nxi + 1)), np.cumsum(cells[pos : pos + m], axis=0)])
                    pos += m
                    idx = np.searchsorted(nodes, np.minimum(zu, nodes[-1]))
                    val = np.where((zu > y_half[j])[:, None], cum[np.minimum(idx, m)], 0.0)
                    out[:, :, j] += val[inv].T
        return out * np.sign(x)[None, :, None]

    def jet(self, k: int, x, xi, nx: int = 0, nxi: int = 0, tot=None) -> Jet:
        """Ungraded jet of lambda_{p-k} on the lattice x[:, None], xi[None, :]."""
        cfg = self.cfg
        if not 1 <= k <= cfg.p - 1:
            raise ValueError(f"k must lie in [1, {cfg.p - 1}]")
        x = np.atleast_1d(np.asarray(x, float))
        xi = np.atleast_1d(np.asarray(xi, float))
        M = cfg.M_of(k)
        shape = (x.size, xi.size)
        Icoef = np.zeros((1, nx + 1, nxi + 1) + shape)
        Icoef[0, 0, :] = self._integral_coeffs(k, x, xi, nxi)
        if nx >= 1:
            g = _integrand_jet(_x_jet(x, nx - 1, nxi), _xi_jet(xi, nx - 1, nxi), cfg.decay(k), cfg.p, cfg.h)
            for a in range(1, nx + 1):
                Icoef[0, a, :] = g.c[0, a - 1, :] / a
        I = Jet(Icoef, nx, nxi, tot, copy=False)
        w = omega_jet(xi, cfg, self.sign_ap, nx, nxi, 1, tot)
        br = bracket_jet(_xi_jet(xi, nx, nxi, 1, tot), cfg.h).power(1.0 - k)
        return (w * br) * I * M

    def Lambda_jet(self, x, xi, nx=0, nxi=0, ng=1, tot=None, taper: Grid | None = None) -> Jet:
        """Lambda = sum_k lambda_{p-k}; lambda_{p-k} sits at grade k-1 when ng > 1.

        With ``taper`` set, the periodic version chi(x) phi(xi) Lambda is
        returned (phi only for even p, where Lambda is odd in xi).
        """
        total = None
        for k in range(1, self.cfg.p):
            jk = self.jet(k, x, xi, nx, nxi, tot)
            if ng > 1:
                jk = jk.at_grade(k - 1, ng)
            total = jk if total is None else total + jk
        if taper is not None:
            total = total * self.taper_jet(taper, x, xi, nx, nxi, ng, tot)
        return total

    def taper_jet(self, grid: Grid, x, xi, nx, nxi, ng=1, tot=None) -> Jet:
        t = x_window_jet(np.atleast_1d(x), grid.L, self.cfg, nx, nxi, ng, tot)
        if self.cfg.p % 2 == 0:
            t = t * xi_window_jet(np.atleast_1d(xi), grid.xi_max, self.cfg, nx, nxi, ng, tot)
        return t

    # -- convenience value routines ------------------------------------
    def value(self, k, x, xi):
        v = self.jet(k, x, xi).value
        return float(v[0, 0]) if np.ndim(x) == 0 and np.ndim(xi) == 0 else v

    def dx_exact(self, k, x, xi):
        """d_x lambda_{p-k} by the fundamental theorem of calculus (oracle)."""
        cfg = self.cfg
        x = np.asarray(x, float)[:, None]
        xi = np.asarray(xi, float)[None, :]
        bx = np.sqrt(1 + x * x)
        B = bracket_h(xi, cfg.h)
        return (
            cfg.M_of(k)
            * omega(xi / cfg.h, cfg, self.sign_ap)
            * B ** (1.0 - k)
            * bx ** (-cfg.decay(k))
            * psi(bx / B ** (cfg.p - 1))
        )


def lambda_pk(k, x, xi, cfg, sign_ap=1):
    """Value of lambda_{p-k}(x, xi) (scalars or 1-D arrays forming a lattice)."""
    return LambdaField(cfg, sign_ap).value(k, x, xi)


def Lambda_total(x, xi, cfg, sign_ap=1):
    lf = LambdaField(cfg, sign_ap)
    v = lf.Lambda_jet(np.atleast_1d(x), np.atleast_1d(xi)).value
    return float(v[0, 0]) if np.ndim(x) == 0 and np.ndim(xi) == 0 else v


# ---------------------------------------------------------------------------
# generic symbols
# ---------------------------------------------------------------------------

class ScalarSymbol:
    """A symbol p(x, xi) with optional exact jets and declared SG orders.

    ``jet_fn(x, xi, nx, nxi)`` must return a Jet on the lattice
    x[:, None], xi[None, :]; without it derivatives fall back to finite
    differences of ``eval_fn``.
    """

    def __init__(self, eval_fn=None, jet_fn=None, xi_order=0.0, x_order=0.0, name="symbol"):
        if eval_fn is None and jet_fn is None:
            raise ValueError("need eval_fn or jet_fn")
        self._eval = eval_fn
        self.jet_fn = jet_fn
        self.xi_order = xi_order
        self.x_order = x_order
        self.name = name

    def eval(self, x, xi):
        """Values on the lattice x[:, None], xi[None, :]."""
        x = np.atleast_1d(np.asarray(x, float))
        xi = np.atleast_1d(np.asarray(xi, float))
        if self.jet_fn is not None:
            return np.broadcast_to(self.jet_fn(x, xi, 0, 0).value, (x.size, xi.size))
        return np.broadcast_to(self._eval(x[:, None], xi[None, :]), (x.size, xi.size))

    def jet(self, x, xi, nx, nxi, tot=None) -> Jet:
        if self.jet_fn is None:
            raise NotImplementedError(f"{self.name} has no exact jets")
        j = self.jet_fn(np.atleast_1d(x), np.atleast_1d(xi), nx, nxi)
        if tot is not None and tot < j.tot:
            j = Jet(j.c, nx, nxi, tot)
        return j

    def deriv(self, alpha, beta, x, xi):
        return symbol_derivative(self, alpha, beta, x, xi)

    # -- a few constructors used throughout ---------------------------
    @classmethod
    def constant(cls, c=1.0):
        return cls(jet_fn=lambda x, xi, nx, nxi: Jet.constant(np.full((x.size, xi.size), c), nx, nxi),
                   name=f"const({c})")

    @classmethod
    def of_xi(cls, derivs_fn, xi_order=0.0, name="m(xi)"):
        """Multiplier symbol given derivs_fn(xi, n) -> [m, m', ..., m^(n)]."""
        def jf(x, xi, nx, nxi):
            d = derivs_fn(np.asarray(xi, float), nxi)
            return Jet.from_xi_derivatives([np.broadcast_to(v, xi.shape)[None, :] for v in d], nx, nxi)
        return cls(jet_fn=jf, xi_order=xi_order, name=name)

    @classmethod
    def of_x(cls, derivs_fn, x_order=0.0, name="a(x)"):
        def jf(x, xi, nx, nxi):
            d = derivs_fn(np.asarray(x, float), nx)
            return Jet.from_x_derivatives([np.broadcast_to(v, x.shape)[:, None] for v in d], nx, nxi)
        return cls(jet_fn=jf, x_order=x_order, name=name)

    @classmethod
    def from_jet(cls, jet_fn, xi_order=0.0, x_order=0.0, name="symbol"):
        return cls(jet_fn=jet_fn, xi_order=xi_order, x_order=x_order, name=name)


def bracket_symbol(h: float, power: float = 1.0) -> ScalarSymbol:
    def jf(x, xi, nx, nxi):
        return bracket_jet(_xi_jet(xi, nx, nxi), h).power(power)
    return ScalarSymbol.from_jet(jf, xi_order=power, name=f"<xi>_h^{power}")


def xi_power_symbol(n: int) -> ScalarSymbol:
    def jf(x, xi, nx, nxi):
        j = _xi_jet(xi, nx, nxi)
        out = Jet.constant(np.ones((1, xi.size)), nx, nxi)
        for _ in range(n):
            out = out * j
        return out
    return ScalarSymbol.from_jet(jf, xi_order=n, name=f"xi^{n}")


def x_bracket_symbol(s: float) -> ScalarSymbol:
    def jf(x, xi, nx, nxi):
        return bracket_jet(_x_jet(x, nx, nxi), 1.0).power(-s)
    return ScalarSymbol.from_jet(jf, x_order=-s, name=f"<x>^-{s}")


def Lambda_symbol(cfg, sign_ap=1, taper: Grid | None = None) -> ScalarSymbol:
    lf = LambdaField(cfg, sign_ap)

    def jf(x, xi, nx, nxi):
        return lf.Lambda_jet(x, xi, nx, nxi, taper=taper)
    return ScalarSymbol.from_jet(jf, xi_order=cfg.kappa_order, x_order=1 - cfg.decay(cfg.p - 1), name="Lambda")


# ---------------------------------------------------------------------------
# derivatives, tabulation, decay fits
# ---------------------------------------------------------------------------

class DerivativeError(ArithmeticError):
    pass


def _central(f, order, step):
    """Central difference of the given order with a symmetric stencil."""
    k = np.arange(order + 1)
    weights = np.array([(-1) ** (order - i) * factorial(order) / (factorial(i) * factorial(order - i)) for i in k])
    offsets = k - order / 2.0
    return sum(w * f(o * step) for w, o in zip(weights, offsets)) / step**order


def symbol_derivative(s: ScalarSymbol, alpha: int, beta: int, x, xi, step: float | None = None):
    """d_xi^alpha d_x^beta s at (x, xi) (lattice x[:, None], xi[None, :])."""
    if alpha < 0 or beta < 0:
        raise ValueError("derivative orders must be nonnegative")
    if alpha + beta > 6:
        raise ValueError("alpha + beta must not exceed 6")
    x = np.atleast_1d(np.asarray(x, float))
    xi = np.atleast_1d(np.asarray(xi, float))
    if alpha == 0 and beta == 0:
        return s.eval(x, xi)
    if s.jet_fn is not None:
        return np.broadcast_to(s.jet(x, xi, beta, alpha).derivative(beta, alpha), (x.size, xi.size))
    n = alpha + beta
    hstep = step if step is not None else np.finfo(float).eps ** (1.0 / (n + 4))
    if hstep <= 8 * np.finfo(float).eps:
        raise DerivativeError("finite-difference step underflows machine precision")

    def d(hh):
        def fx(ox):
            return _central(lambda oxi: s.eval(x + ox, xi + oxi), alpha, hh) if alpha else s.eval(x + ox, xi)
        return _central(fx, beta, hh) if beta else fx(0.0)

    # Richardson: second-order stencils, halve the step
    return (4.0 * d(hstep / 2) - d(hstep)) / 3.0


@dataclass
class SymbolGrid:
    table: np.ndarray
    grid: Grid
    xi_order: float = 0.0
    x_order: float = 0.0
    label: str = ""

    def __post_init__(self):
        t = np.asarray(self.table)
        if t.shape != (self.grid.N, self.grid.N):
            raise ValueError(f"table must be {self.grid.N}x{self.grid.N}, got {t.shape}")
        if not np.all(np.isfinite(t)):
            raise ValueError("symbol table has non-finite entries")
        self.table = t

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["x_index", "xi_index", "re", "im"])
            t = self.table.astype(complex)
            for i in range(t.shape[0]):
                for j in range(t.shape[1]):
                    w.writerow([i, j, repr(float(t[i, j].real)), repr(float(t[i, j].imag))])


def tabulate(s, grid: Grid) -> SymbolGrid:
    if isinstance(s, ScalarSymbol):
        t = np.array(s.eval(grid.x_nodes, grid.xi_nodes))
        return SymbolGrid(t, grid, s.xi_order, s.x_order, s.name)
    t = np.broadcast_to(s(grid.x_nodes[:, None], grid.xi_nodes[None, :]), (grid.N, grid.N))
    return SymbolGrid(np.array(t), grid)


@dataclass
class DecayFit:
    xi_slope: float | None
    x_slope: float | None
    expected_xi_order: float
    expected_x_order: float
    passed: bool
    inconclusive: bool = False
    detail: dict = field(default_factory=dict)


def _slope(u, v):
    A = np.vstack([u, np.ones_like(u)]).T
    return float(np.linalg.lstsq(A, v, rcond=None)[0][0])


def verify_decay_orders(sg: SymbolGrid, expected_xi_order: float, expected_x_order: float, tol: float = 0.15) -> DecayFit:
    """Log-log slopes against <xi>_h (at the largest x) and <x> (at the largest xi)."""
    g = sg.grid
    x, xi = g.x_nodes, g.xi_nodes
    mag = np.abs(sg.table)
    xr = (np.abs(x) >= 1) & (np.abs(x) <= g.L / 2)
    xir = (np.abs(xi) >= 4 * g.h) & (np.abs(xi) <= g.xi_max / 2)
    if xr.sum() < 2 or xir.sum() < 2:
        return DecayFit(None, None, expected_xi_order, expected_x_order, False, True, {"reason": "fit region too small"})
    sub = mag[np.ix_(xr, xir)]
    if not np.any(sub > 0):
        return DecayFit(None, None, expected_xi_order, expected_x_order, False, True, {"reason": "zero on fit region"})
    bxi = np.log(bracket_h(xi[xir], g.h))
    bx = np.log(np.sqrt(1 + x[xr] ** 2))
    xi_slopes, x_slopes = [], []
    # far rows/columns on both sides
    for row in (np.argmax(np.abs(x[xr]) * (x[xr] > 0)), np.argmax(np.abs(x[xr]) * (x[xr] < 0))):
        line = sub[row]
        if np.all(line > 0):
            xi_slopes.append(_slope(bxi, np.log(line)))
    for col in (np.argmax(np.abs(xi[xir]) * (xi[xir] > 0)), np.argmax(np.abs(xi[xir]) * (xi[xir] < 0))):
        line = sub[:, col]
        if np.all(line > 0):
            x_slopes.append(_slope(bx, np.log(line)))
    if not xi_slopes or not x_slopes:
        return DecayFit(None, None, expected_xi_order, expected_x_order, False, True, {"reason": "zeros on fit lines"})
    sxi, sx = max(xi_slopes), max(x_slopes)
    ok = sxi <= expected_xi_order + tol and sx <= expected_x_order + tol
    return DecayFit(sxi, sx, expected_xi_order, expected_x_order, ok)


# ---------------------------------------------------------------------------
# the estimate family for lambda_{p-k}
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SampleLattice:
    """Quadrant sample lattice 0 <= x <= x_max, 0 <= xi <= xi_max.

    |lambda| and all |derivatives| are even in x and in xi, so the quadrant is
    representative.  ``refined()`` halves both spacings and keeps the old
    points.
    """

    x_max: float
    xi_max: float
    nx: int = 129
    nxi: int = 1025

    @property
    def x(self):
        return np.linspace(0.0, self.x_max, self.nx)

    @property
    def xi(self):
        return np.linspace(0.0, self.xi_max, self.nxi)

    def refined(self, factor: int = 2) -> "SampleLattice":
        return SampleLattice(self.x_max, self.xi_max, factor * (self.nx - 1) + 1, factor * (self.nxi - 1) + 1)

    @classmethod
    def for_grid(cls, grid: Grid, nx=129, nxi=1025):
        return cls(grid.L, grid.xi_max, nx, nxi)


SHAPES = ("i", "ii", "iii", "iv", "v")


def _shape_pairs(shape, order_cap):
    if shape == "i":
        return [(0, 0)]
    if shape == "ii":
        return [(a, 0) for a in range(1, order_cap + 1)]
    if shape in ("iii", "iv"):
        return [(a, 0) for a in range(0, order_cap + 1)]
    return [(a, b) for b in range(1, order_cap + 1) for a in range(0, order_cap + 1 - b)]


def _fitted_constants(lf: LambdaField, k: int, lat: SampleLattice, order_cap: int, chunk: int = 256):
    """Minimal constants per (shape, alpha, beta) over the lattice."""
    cfg = lf.cfg
    s = cfg.decay(k)
    m = (cfg.p - k) * (1 - cfg.sigma)
    mu = cfg.mu
    x = lat.x
    xi_all = lat.xi
    best = {}
    analytic_i = cfg.M_of(k) / (1 - s)
    max_ratio_i = 0.0
    for start in range(0, xi_all.size, chunk):
        xi = xi_all[start : start + chunk]
        jet = lf.jet(k, x, xi, order_cap, order_cap, tot=order_cap)
        bxi = bracket_h(xi, cfg.h)[None, :]
        bx = np.sqrt(1 + x * x)[:, None]
        val = np.abs(jet.c[0, 0, 0])
        max_ratio_i = max(max_ratio_i, float(np.max(val / bxi**m)))
        for shape in SHAPES:
            for a, b in _shape_pairs(shape, order_cap):
                d = np.abs(jet.c[0, b, a]) * factorial(a) * factorial(b)
                if shape == "i":
                    weight, power = bxi**m, 1
                elif shape == "ii":
                    weight, power = factorial(a) ** mu * bxi ** (m - a), a + 1
                elif shape == "iii":
                    weight, power = factorial(a) ** mu * bxi ** (1 - k - a) * bx ** (1 - s), a + 1
                elif shape == "iv":
                    weight, power = factorial(a) ** mu * bxi ** (-a) * bx ** ((cfg.p - k) / (cfg.p - 1) * (1 - cfg.sigma)), a + 1
                else:
                    weight = (factorial(a) * factorial(b)) ** mu * bxi ** (1 - k - a) * bx ** (-s - (b - 1))
                    power = a + b + 1
                r = float(np.max(d / weight)) ** (1.0 / power)
                key = (shape, a, b)
                best[key] = max(best.get(key, 0.0), r)
    return best, max_ratio_i, analytic_i


@dataclass
class EstimateReport:
    k: int
    bound_i: dict
    constants: list
    passed: bool

    def to_dict(self):
        return {"k": self.k, "bound_i": self.bound_i, "constants": self.constants, "passed": self.passed}


def verify_lambda_estimates(k: int, cfg: GevreyConfig, sample_lattice: SampleLattice, sign_ap: int = 1,
                            order_cap: int = 4, stability: float = 0.05) -> EstimateReport:
    lf = LambdaField(cfg, sign_ap)
    coarse, ratio_c, analytic = _fitted_constants(lf, k, sample_lattice, order_cap)
    fine, ratio_f, _ = _fitted_constants(lf, k, sample_lattice.refined(), order_cap)
    ok_i = max(ratio_c, ratio_f) <= analytic
    bound_i = {"analytic_constant": analytic, "max_ratio": max(ratio_c, ratio_f), "passed": bool(ok_i)}
    rows = []
    all_ok = ok_i
    for key in sorted(coarse):
        c0, c1 = coarse[key], fine[key]
        rel = 0.0 if max(c0, c1) == 0 else abs(c1 - c0) / max(c0, c1)
        ok = bool(np.isfinite(c1) and rel < stability)
        all_ok = all_ok and ok
        rows.append({"shape": key[0], "alpha": key[1], "beta": key[2], "C": c0, "C_refined": c1,
                     "relative_change": rel, "passed": ok})
    return EstimateReport(k, bound_i, rows, bool(all_ok))
