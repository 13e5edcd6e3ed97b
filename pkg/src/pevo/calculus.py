"""Symbol calculus checked against dense matrices.

Asymptotic sums (composition, conjugation by e^Lambda) are diagnostics; the
dense products of quantized matrices are the ground truth they are measured
against.  The inverse of op(e^Lambda) is built at matrix level by a Neumann
series and the transformation Q(t) = e^{Lambda_K(t, D)} op(e^Lambda) is
assembled from it.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from math import factorial

import numpy as np

from .config import OVERFLOW_EXPONENT, ConfigError, GevreyConfig
from .grid import Grid
from .jets import Jet
from .quantizer import OperatorMatrix, left_matrix, reverse_matrix
from .symbols import LambdaField, Lambda_time, ScalarSymbol, SymbolGrid, symbol_derivative

PROBE_COUNT = 20
PROBE_SEED = 7


class InversionError(RuntimeError):
    """Neumann series for op(e^Lambda) diverged; h is too small."""

    def __init__(self, message, growth_ratio=None, h=None):
        super().__init__(message)
        self.growth_ratio = growth_ratio
        self.h = h


# ---------------------------------------------------------------------------
# probes
# ---------------------------------------------------------------------------

def white_probes(grid: Grid, n: int = PROBE_COUNT, seed: int = PROBE_SEED) -> np.ndarray:
    """Rows are probes with i.i.d. complex Gaussian spectra (unit l2 norm)."""
    rng = np.random.default_rng(seed)
    spec = rng.standard_normal((n, grid.N)) + 1j * rng.standard_normal((n, grid.N))
    u = np.fft.ifft(spec, axis=1)
    return u / np.linalg.norm(u, axis=1, keepdims=True)


def packet_probes(grid: Grid, n: int = PROBE_COUNT, seed: int = PROBE_SEED, packets: int = 3,
                  band: tuple | None = None) -> np.ndarray:
    """Sums of unit-width Gaussian wave packets centred in |x| <= L/3.

    Carrier frequencies are drawn with |xi_0| in ``band`` (default
    [0, xi_max/8]), so the probes are negligible near x = +-L and, for the
    default band, near the Nyquist frequency.
    """
    lo, hi = (0.0, grid.xi_max / 8) if band is None else band
    rng = np.random.default_rng(seed)
    x = grid.x_nodes
    out = np.zeros((n, grid.N), dtype=complex)
    for k in range(n):
        for _ in range(packets):
            x0 = rng.uniform(-grid.L / 3, grid.L / 3)
            k0 = rng.uniform(lo, hi) * rng.choice((-1.0, 1.0))
            amp = rng.standard_normal() + 1j * rng.standard_normal()
            out[k] += amp * np.exp(-0.5 * (x - x0) ** 2 + 1j * k0 * x)
    return out / np.linalg.norm(out, axis=1, keepdims=True)


def high_band(grid: Grid, h: float) -> tuple:
    """Carrier band inside |xi| >= 2h, three spectral widths clear of the cutoff transition."""
    lo = 2.0 * h + 3.0
    return lo, max(lo + 1.0, grid.xi_max / 2)


def probe_norm(A, probes: np.ndarray) -> float:
    """max_k |A u_k| / |u_k| (A a matrix or a callable on stacked columns)."""
    U = probes.T
    AU = A(U) if callable(A) else np.asarray(A) @ U
    return float(np.max(np.linalg.norm(AU, axis=0) / np.linalg.norm(U, axis=0)))


def _table(s, grid: Grid) -> np.ndarray:
    if isinstance(s, SymbolGrid):
        return np.asarray(s.table, dtype=complex)
    if isinstance(s, ScalarSymbol):
        return np.array(s.eval(grid.x_nodes, grid.xi_nodes), dtype=complex)
    t = np.asarray(s, dtype=complex)
    if t.shape != (grid.N, grid.N):
        raise ValueError(f"symbol table must be {grid.N}x{grid.N}")
    return t


# ---------------------------------------------------------------------------
# asymptotic expansions
# ---------------------------------------------------------------------------

@dataclass
class ExpansionResult:
    terms: list
    truncation_order: int
    residual_estimate: float
    exact_norm: float
    partial_residuals: list
    diagnostic: str = ""

    @property
    def relative_residual(self) -> float:
        return self.residual_estimate / self.exact_norm if self.exact_norm > 0 else self.residual_estimate

    @property
    def total(self) -> np.ndarray:
        return sum(t.table for t in self.terms)

    def to_dict(self):
        return {
            "truncation_order": self.truncation_order,
            "residual_estimate": self.residual_estimate,
            "relative_residual": self.relative_residual,
            "exact_norm": self.exact_norm,
            "partial_residuals": list(self.partial_residuals),
            "term_orders": [t.xi_order for t in self.terms],
            "diagnostic": self.diagnostic,
        }


def _check_terms(N_terms):
    if not 1 <= N_terms <= 4:
        raise ValueError("N_terms must lie in 1..4")


def _partial_residuals(exact, terms, grid, probes):
    res, partial = [], np.zeros_like(exact)
    for t in terms:
        partial = partial + left_matrix(t.table)
        res.append(probe_norm(exact - partial, probes))
    return res


def compose_asymptotic(p: ScalarSymbol, q: ScalarSymbol, N_terms: int, grid: Grid, probes=None) -> ExpansionResult:
    """Strata sum_{alpha=k} (1/alpha!) d_xi^alpha p D_x^alpha q, k < N_terms."""
    _check_terms(N_terms)
    x, xi = grid.x_nodes, grid.xi_nodes
    terms = []
    for k in range(N_terms):
        dp = symbol_derivative(p, k, 0, x, xi)
        dq = symbol_derivative(q, 0, k, x, xi)
        t = dp * dq * ((-1j) ** k / factorial(k))
        order = p.xi_order + q.xi_order - k
        terms.append(SymbolGrid(np.array(t, dtype=complex), grid, order, p.x_order + q.x_order - k, f"compose[{k}]"))
    probes = packet_probes(grid) if probes is None else probes
    exact = left_matrix(_table(p, grid)) @ left_matrix(_table(q, grid))
    res = _partial_residuals(exact, terms, grid, probes)
    return ExpansionResult(terms, N_terms, res[-1], probe_norm(exact, probes), res)


def conjugation_strata(lam_jet: Jet, p_jet: Jet, N_terms: int) -> list:
    """Values of sum_{alpha+beta=k} (1/alpha!beta!) d_xi^alpha{d_xi^beta e^L D_x^beta p D_x^alpha e^-L}.

    Both jets must be ungraded with orders >= N_terms - 1 in x and xi.  The
    exponentials are taken relative to the base value so e^{+-L} cancel.
    """
    ep = lam_jet.exp_shifted()
    em = (-lam_jet).exp_shifted()
    out = []
    for k in range(N_terms):
        acc = 0
        for alpha in range(k + 1):
            beta = k - alpha
            prod = ep.diff(0, beta) * (p_jet.diff(beta, 0) * (-1j) ** beta) * (em.diff(alpha, 0) * (-1j) ** alpha)
            acc = acc + prod.derivative(0, alpha) / (factorial(alpha) * factorial(beta))
        out.append(acc)
    return out


def conjugation_expansion(p: ScalarSymbol, Lam: ScalarSymbol, N_terms: int, grid: Grid, probes=None,
                          tol: float | None = None, chunk: int = 64) -> ExpansionResult:
    """Strata of op(e^Lambda) op(p) op^R(e^-Lambda), measured against the dense product."""
    _check_terms(N_terms)
    n = N_terms - 1
    x, xi = grid.x_nodes, grid.xi_nodes
    tables = [np.zeros((grid.N, grid.N), dtype=complex) for _ in range(N_terms)]
    for s in range(0, xi.size, chunk):
        sl = slice(s, s + chunk)
        lj = Lam.jet(x, xi[sl], n, n)
        pj = p.jet(x, xi[sl], n, n)
        for k, v in enumerate(conjugation_strata(lj, pj, N_terms)):
            tables[k][:, sl] = v
    kappa = getattr(Lam, "xi_order", 0.0)
    gain = min(1.0, 1.0 - kappa)
    terms = [SymbolGrid(t, grid, p.xi_order - k * gain, p.x_order, f"conjugation[{k}]") for k, t in enumerate(tables)]
    lam_t = _table(Lam, grid)
    exact = left_matrix(np.exp(lam_t)) @ left_matrix(_table(p, grid)) @ reverse_matrix(np.exp(-lam_t))
    if probes is None:
        probes = packet_probes(grid, band=high_band(grid, grid.h))
    res = _partial_residuals(exact, terms, grid, probes)
    result = ExpansionResult(terms, N_terms, res[-1], probe_norm(exact, probes), res)
    if tol is not None and result.relative_residual > tol:
        result.diagnostic = (f"h too small: conjugation residual {result.relative_residual:.3g} exceeds {tol:g}; "
                             "increase h")
    return result


# ---------------------------------------------------------------------------
# graded calculus used by the positivity scans
# ---------------------------------------------------------------------------

def sharp(a: Jet, b: Jet) -> Jet:
    """Graded composition a # b = sum_g (1/g!) d_xi^g a D_x^g b, d_xi^g raising the grade by g."""
    out = a * b
    for g in range(1, a.ng):
        out = out + a.diff(0, g, grade_shift=g) * (b.diff(g, 0) * ((-1j) ** g / factorial(g)))
    return out


class GradedConjugation:
    """Graded symbol of op(e^L) op(p) op(e^L)^{-1}, the inverse taken by a Neumann series.

    Grade g collects the terms lowered by g levels.  The conjugation strata
    are stratified by alpha + beta, the inverse of op(e^L) op^R(e^-L)
    contributes sum_j (-r)^{#j}, and everything is truncated at the number of
    grades carried by the jets.  Everything depending on L alone is built
    once, so many symbols p can be conjugated cheaply.
    """

    def __init__(self, lam_jet: Jet):
        self.G = G = lam_jet.ng - 1
        ep = lam_jet.exp_shifted()
        em = (-lam_jet).exp_shifted()
        self.pairs = {}
        for k in range(G + 1):
            for alpha in range(k + 1):
                beta = k - alpha
                left = ep.diff(0, beta, grade_shift=beta)
                right = em.diff(alpha, 0) * ((-1j) ** alpha / (factorial(alpha) * factorial(beta)))
                self.pairs[alpha, beta] = left * right
        r = None
        for (alpha, beta), lr in self.pairs.items():
            if beta == 0:
                term = lr.diff(0, alpha, grade_shift=alpha)
                r = term if r is None else r + term
        neg_r = -(r - 1.0)
        inv = Jet.constant(np.ones(lam_jet.pshape), lam_jet.nx, lam_jet.nxi, lam_jet.ng, lam_jet.tot) + 0 * neg_r
        power = inv
        for _ in range(G):
            power = sharp(power, neg_r)
            inv = inv + power
        self.inverse = inv

    def __call__(self, p_jet: Jet) -> Jet:
        conj = None
        for (alpha, beta), lr in self.pairs.items():
            mid = p_jet.diff(beta, 0) * ((-1j) ** beta) if beta else p_jet
            term = (lr * mid).diff(0, alpha, grade_shift=alpha)
            conj = term if conj is None else conj + term
        return sharp(conj, self.inverse)


def graded_conjugation(p_jet: Jet, lam_jet: Jet) -> Jet:
    return GradedConjugation(lam_jet)(p_jet)


# ---------------------------------------------------------------------------
# inversion of op(e^Lambda)
# ---------------------------------------------------------------------------

@dataclass
class InversionResult:
    inverse_matrix: OperatorMatrix
    neumann_terms_used: int
    residual: float
    residual_right: float
    residual_left: float
    r_spectral_proxy: float
    h: float
    ok: bool
    tol: float
    forward_matrix: OperatorMatrix | None = None
    term_norms: list = field(default_factory=list)
    spectral_radius: float | None = None

    def to_dict(self):
        return {
            "h": self.h,
            "neumann_terms_used": self.neumann_terms_used,
            "residual": self.residual,
            "residual_right": self.residual_right,
            "residual_left": self.residual_left,
            "r_spectral_proxy": self.r_spectral_proxy,
            "spectral_radius": self.spectral_radius,
            "term_norms": list(self.term_norms),
            "ok": self.ok,
            "tol": self.tol,
        }


def invert_eLambda(Lam, grid: Grid, tol: float = 1e-10, J_max: int = 30, ok_tol: float = 1e-6, probes=None,
                   spectral: bool = False, h: float | None = None, J_fixed: int | None = None) -> InversionResult:
    """Inverse of op(e^Lambda) as op^R(e^-Lambda) sum_j (-r)^j, r = op(e^Lambda) op^R(e^-Lambda) - I.

    ``J_fixed`` sums exactly that many correction terms (no stopping rule),
    which makes residuals at different h comparable.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    lam = _table(Lam, grid)
    E_L = left_matrix(np.exp(lam))
    E_R = reverse_matrix(np.exp(-lam))
    N = grid.N
    eye = np.eye(N, dtype=complex)
    r = E_L @ E_R - eye
    probes = white_probes(grid) if probes is None else probes
    r_norm = probe_norm(r, probes)
    h = grid.h if h is None else h

    S = eye.copy()
    T = eye
    norms = []
    J = 0
    while True:
        if J_fixed is not None and J >= J_fixed:
            break
        with np.errstate(over="ignore", invalid="ignore"):  # divergence is reported below
            T = -(r @ T)
            nn = probe_norm(T, probes)
        norms.append(nn)
        if J_fixed is None and nn < tol:
            break
        if J >= J_max or not np.isfinite(nn):
            growth = norms[-1] / norms[-2] if len(norms) > 1 and norms[-2] > 0 else float("inf")
            raise InversionError(
                f"h too small: Neumann series for op(e^Lambda) does not converge at h={h:g} "
                f"(|(-r)^j| = {nn:.3g} after {J} terms, growth ratio {growth:.3g}); increase h",
                growth, h)
        if len(norms) >= 3 and norms[-1] > norms[-2] > norms[-3] and norms[-1] > 1:
            growth = norms[-1] / norms[-2]
            raise InversionError(
                f"h too small: Neumann series for op(e^Lambda) diverges at h={h:g} "
                f"(growth ratio {growth:.3g}); increase h", growth, h)
        S += T
        J += 1
    inv = E_R @ S
    res_r = probe_norm(E_L @ inv - eye, probes)
    res_l = probe_norm(inv @ E_L - eye, probes)
    res = max(res_r, res_l)
    rho = float(np.max(np.abs(np.linalg.eigvals(r)))) if spectral and N <= 256 else None
    return InversionResult(OperatorMatrix(inv, grid, "eLambda^-1"), J, res, res_r, res_l, r_norm, float(h),
                           bool(res < ok_tol), ok_tol, OperatorMatrix(E_L, grid, "eLambda"), norms, rho)


def r_symbol_leading(Lam: ScalarSymbol, grid: Grid) -> SymbolGrid:
    """-d_xi D_x Lambda = i d_xi d_x Lambda on the grid lattice."""
    t = 1j * symbol_derivative(Lam, 1, 1, grid.x_nodes, grid.xi_nodes)
    kappa = getattr(Lam, "xi_order", 0.0)
    return SymbolGrid(np.array(t, dtype=complex), grid, kappa - 1.0, getattr(Lam, "x_order", 0.0) - 1.0, "r_leading")


# ---------------------------------------------------------------------------
# the transformation Q(t)
# ---------------------------------------------------------------------------

def multiplier_left(values: np.ndarray, A: np.ndarray) -> np.ndarray:
    """multiplier(values) @ A without forming the circulant."""
    m = np.fft.ifftshift(np.asarray(values, dtype=complex))
    return np.fft.ifft(m[:, None] * np.fft.fft(A, axis=0), axis=0)


def multiplier_right(A: np.ndarray, values: np.ndarray) -> np.ndarray:
    """A @ multiplier(values)."""
    return multiplier_left(np.conj(values), A.conj().T).conj().T


class Transform:
    """Q(t) = e^{Lambda_K(t, D)} op(e^Lambda~) and its inverse on one grid.

    Lambda~ is the periodized corrector (x-window, and xi-window for even p).
    ``lam=False`` drops the corrector, ``time_weight=False`` the Fourier weight.
    """

    def __init__(self, cfg: GevreyConfig, grid: Grid, sign_ap: int = 1, lam: bool = True, time_weight: bool = True,
                 tol: float = 1e-10, J_max: int = 30, ok_tol: float = 1e-6):
        self.cfg, self.grid, self.sign_ap = cfg, grid, sign_ap
        self.time_weight = time_weight
        if lam and cfg.M and any(cfg.M):
            lf = LambdaField(cfg, sign_ap)
            self.lam_table = np.array(lf.Lambda_jet(grid.x_nodes, grid.xi_nodes, taper=grid).value, dtype=float)
        else:
            self.lam_table = np.zeros((grid.N, grid.N))
        self.inversion = invert_eLambda(self.lam_table, grid, tol, J_max, ok_tol, h=cfg.h)
        self.E = self.inversion.forward_matrix.entries
        self.Einv = self.inversion.inverse_matrix.entries

    def exponent(self, t) -> np.ndarray:
        if not self.time_weight:
            return np.zeros(self.grid.N)
        e = np.asarray(Lambda_time(t, self.grid.xi_nodes, self.cfg), dtype=float)
        top = float(np.max(np.abs(e)))
        if top >= OVERFLOW_EXPONENT:
            raise ConfigError(f"time weight overflows at t={t:g}: exponent {top:.1f} >= {OVERFLOW_EXPONENT:g}")
        return e

    def Q(self, t) -> np.ndarray:
        return multiplier_left(np.exp(self.exponent(t)), self.E)

    def Q_inverse(self, t) -> np.ndarray:
        return multiplier_right(self.Einv, np.exp(-self.exponent(t)))

    def roundtrip_residual(self, t, probes=None) -> float:
        probes = white_probes(self.grid) if probes is None else probes
        return probe_norm(self.Q(t) @ self.Q_inverse(t) - np.eye(self.grid.N), probes)


@lru_cache(maxsize=8)
def cached_transform(cfg: GevreyConfig, grid: Grid, sign_ap: int = 1, lam: bool = True,
                     time_weight: bool = True) -> Transform:
    return Transform(cfg, grid, sign_ap, lam, time_weight)


def build_Q(t, cfg: GevreyConfig, grid: Grid, sign_ap: int = 1, lam: bool = True, time_weight: bool = True) -> OperatorMatrix:
    return OperatorMatrix(cached_transform(cfg, grid, sign_ap, lam, time_weight).Q(t), grid, f"Q({t:g})")


def build_Q_inverse(t, cfg: GevreyConfig, grid: Grid, sign_ap: int = 1, lam: bool = True,
                    time_weight: bool = True) -> OperatorMatrix:
    return OperatorMatrix(cached_transform(cfg, grid, sign_ap, lam, time_weight).Q_inverse(t), grid, f"Q^-1({t:g})")
