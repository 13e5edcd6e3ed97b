"""Constants, positivity scans, the conjugated generator, time stepping and energy bookkeeping."""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from math import ceil

import numpy as np

from .calculus import (GradedConjugation, InversionError, Transform, conjugation_expansion, invert_eLambda,
                       multiplier_left, multiplier_right, probe_norm, white_probes)
from .config import GevreyConfig
from .cutoffs import psi as psi_derivs
from .grid import Grid, StateVector, bracket_h
from .jets import Jet
from .norms import GevreyNormSpec, gs_norm
from .problems import Problem, check_assumptions, make_preset
from .quantizer import multiplier_matrix
from .symbols import LambdaField, ScalarSymbol

HEADROOM = 1.1
INVERSION_OK = 1e-6
SCAN_T_SAMPLES = 5


class PipelineError(RuntimeError):
    pass


class GridTooSmall(PipelineError):
    pass


class EvolutionError(PipelineError):
    def __init__(self, message, witness_time=None):
        super().__init__(message)
        self.witness_time = witness_time


# ---------------------------------------------------------------------------
# graded symbols of the conjugated operator
# ---------------------------------------------------------------------------

def _box(p: int):
    """(grades, x-order, xi-order) carried by the level jets."""
    G = p - 1
    return G + 1, G + 1, G


def problem_jet(prob: Problem, t: float, x, xi) -> Jet:
    """Graded jet of i a_p xi^p + sum_j i a_{p-j}(t, x) xi^{p-j}, level j at grade j."""
    ng, nx, nxi = _box(prob.p)
    xi_j = Jet.coordinate_xi(np.asarray(xi, float)[None, :], nx, nxi)
    powers = [Jet.constant(np.ones((1, np.size(xi))), nx, nxi)]
    for _ in range(prob.p):
        powers.append(powers[-1] * xi_j)
    out = (powers[prob.p] * (1j * float(prob.a_p(t)))).at_grade(0, ng)
    for j in range(1, ng):
        coef = prob.coefficient(j).jet(t, x, nx, nxi)
        out = out + (coef * powers[prob.p - j] * 1j).at_grade(j, ng)
    return out


def level_symbols(prob: Problem, cfg: GevreyConfig, x, xi, times, lam_jet: Jet | None = None):
    """Per time sample: (sigma_j, d_x sigma_j) for every level j of the conjugated symbol."""
    ng, nx, nxi = _box(prob.p)
    if lam_jet is None:
        lam_jet = LambdaField(cfg, prob.sign_ap).Lambda_jet(x, xi, nx, nxi, ng)
    kernel = GradedConjugation(lam_jet)
    static = time_independent(prob)
    out, cached = [], None
    for t in times:
        if cached is None or not static:
            s = kernel(problem_jet(prob, t, x, xi))
            cached = ([s.c[j, 0, 0] for j in range(ng)], [s.c[j, 1, 0] for j in range(ng)])
        out.append(cached)
    return out


def dxi_time_exponent(t, xi, cfg: GevreyConfig):
    """d_xi Lambda_K(t, xi)."""
    b = bracket_h(xi, cfg.h)
    return (cfg.K * (cfg.T - t) * cfg.kappa_order * b ** (cfg.kappa_order - 2)
            + cfg.rho_prime / cfg.theta * b ** (1.0 / cfg.theta - 2)) * xi


def _cutoff_deficit(cfg, j, ap_abs, x, xi):
    """p M_{p-j} |a_p| |xi|^{p-1} <xi>^{1-j} <x>^{-s_j} (1 - psi(<x>/<xi>^{p-1})): the part handed to K."""
    p = cfg.p
    bx = np.sqrt(1 + x * x)[:, None]
    bxi = bracket_h(xi, cfg.h)[None, :]
    cut = 1.0 - psi_derivs(bx / bxi ** (p - 1), 0)[0]
    return p * cfg.M_of(j) * ap_abs * np.abs(xi[None, :]) ** (p - 1) * bxi ** (1 - j) * bx ** (-cfg.decay(j)) * cut


@dataclass
class ScanReport:
    level: int
    min_margin: float
    passed: bool
    witness: dict
    per_time: list

    def to_dict(self):
        return {"level": self.level, "min_margin": self.min_margin, "passed": self.passed,
                "witness": self.witness, "per_time": list(self.per_time)}


def _scan_lattice(grid: Grid, h: float):
    xi = grid.xi_nodes
    return grid.x_nodes, xi[np.abs(xi) >= 2 * h]


def positivity_scans(prob: Problem, grid: Grid, t_samples: int = SCAN_T_SAMPLES, include_A: bool = True,
                     chunk: int = 48) -> list:
    """min over the lattice (|xi| >= 2h) of Re a~_{p-j} - <x>^{-s_j} |xi|^{p-j} / 2, for j = 1..p-1."""
    cfg = prob.cfg
    p = prob.p
    x, xi_all = _scan_lattice(grid, cfg.h)
    times = np.linspace(0.0, cfg.T, t_samples)
    levels = range(1, p)
    best = {j: [(np.inf, None) for _ in times] for j in levels}
    bx = np.sqrt(1 + x * x)[:, None]
    lf = LambdaField(cfg, prob.sign_ap)
    ng, nx, nxi = _box(p)
    for s in range(0, xi_all.size, chunk):
        xi = xi_all[s : s + chunk]
        lam = lf.Lambda_jet(x, xi, nx, nxi, ng)
        data = level_symbols(prob, cfg, x, xi, times, lam)
        for it, t in enumerate(times):
            sig, dsig = data[it]
            ap_abs = abs(float(prob.a_p(t)))
            dK = dxi_time_exponent(t, xi, cfg)[None, :]
            for j in levels:
                val = sig[j].real + _cutoff_deficit(cfg, j, ap_abs, x, xi)
                if include_A:
                    val = val + dK * dsig[j].imag
                margin = val - 0.5 * bx ** (-cfg.decay(j)) * np.abs(xi[None, :]) ** (p - j)
                k = np.unravel_index(np.argmin(margin), margin.shape)
                if margin[k] < best[j][it][0]:
                    best[j][it] = (float(margin[k]), {"t": float(t), "x": float(x[k[0]]), "xi": float(xi[k[1]]),
                                                       "margin": float(margin[k]), "symbol": float(val[k])})
    reports = []
    for j in levels:
        per_t = [b[0] for b in best[j]]
        it = int(np.argmin(per_t))
        m = per_t[it]
        reports.append(ScanReport(j, m, bool(m >= 0), best[j][it][1], per_t))
    return reports


def positivity_scan(prob: Problem, sel, grid: Grid, level: int, t_samples: int = SCAN_T_SAMPLES) -> ScanReport:
    cfg = sel.cfg if hasattr(sel, "cfg") else sel
    return positivity_scans(prob.with_cfg(cfg), grid, t_samples)[level - 1]


def _lower_level_constant(prob: Problem, cfg: GevreyConfig, grid: Grid, j: int, times, chunk: int = 48) -> float:
    """sup |Re d_{p-j}| <xi>_h^{-(p-j)} <x>^{s_j} with M_{p-j}, ..., M_1 switched off."""
    p = prob.p
    x, xi_all = _scan_lattice(grid, cfg.h)
    lf = LambdaField(cfg, prob.sign_ap)
    ng, nx, nxi = _box(p)
    bx = np.sqrt(1 + x * x)[:, None]
    sup = 0.0
    for s in range(0, xi_all.size, chunk):
        xi = xi_all[s : s + chunk]
        lam = lf.Lambda_jet(x, xi, nx, nxi, ng)
        data = level_symbols(prob, cfg, x, xi, times, lam)
        bxi = bracket_h(xi, cfg.h)[None, :]
        for it, t in enumerate(times):
            own = 1j * prob.coefficient(j).value(t, x)[:, None] * xi[None, :] ** (p - j)
            d = data[it][0][j] - own
            sup = max(sup, float(np.max(np.abs(d.real) * bxi ** (-(p - j)) * bx ** cfg.decay(j))))
    return sup


# ---------------------------------------------------------------------------
# constant selection
# ---------------------------------------------------------------------------

@dataclass
class ConstantsSelection:
    M: tuple
    K: float
    h: float
    cfg: GevreyConfig
    audit: dict
    scans: list
    inversion: object
    passed: bool

    def to_dict(self):
        return {"M": list(self.M), "K": self.K, "h": self.h, "passed": self.passed, "audit": self.audit,
                "scans": [s.to_dict() for s in self.scans],
                "inversion": self.inversion.to_dict() if self.inversion is not None else None}


def _K_from_deficit(cfg: GevreyConfig, prob: Problem, grid: Grid, times):
    x, xi = _scan_lattice(grid, cfg.h)
    bxi = bracket_h(xi, cfg.h)[None, :] ** cfg.kappa_order
    sup = 0.0
    for t in times:
        ap_abs = abs(float(prob.a_p(t)))
        B = sum(_cutoff_deficit(cfg, j, ap_abs, x, xi) for j in range(1, prob.p))
        sup = max(sup, float(np.max(B / bxi)))
    return sup


def select_constants(prob: Problem, grid: Grid, fixed_M: dict | None = None, t_samples: int = SCAN_T_SAMPLES,
                     h_start: float | None = None, headroom: float = HEADROOM) -> ConstantsSelection:
    """Choose M_{p-1}, ..., M_1, then K, then h (doubling until inversion and every scan pass).

    ``fixed_M`` pins chosen levels ({j: value} for M_{p-j}); the selection then
    reports, but does not repair, a failing scan.
    """
    rep = check_assumptions(prob)
    if not rep.passed:
        raise PipelineError("hypotheses fail: " + "; ".join(rep.messages))
    p = prob.p
    fixed_M = {int(k): float(v) for k, v in (fixed_M or {}).items()}
    C_ap = rep.C_ap
    times = np.linspace(0.0, prob.cfg.T, t_samples)
    h = float(h_start) if h_start is not None else 2.0 * prob.cfg.R_ap * max(1.0, prob.cfg.h / 2.0)
    attempts = []
    final = None
    while True:
        if 2 * h >= grid.xi_max / 2:
            if final is None:
                raise GridTooSmall(f"grid too small for this cfg: need 2h < xi_max/2, have h={h:g}, "
                                   f"xi_max={grid.xi_max:.4g}; increase N or reduce L")
            break
        M = [0.0] * (p - 1)
        levels = []
        for j in range(1, p):
            C_a = rep.C_lower[j]
            C_M = None
            if j >= 2:
                trial = prob.cfg.with_(h=h, M=tuple(M), K=0.0, allow_zero_M=True)
                C_M = _lower_level_constant(prob, trial, grid, j, times)
            bound = (1.0 + C_a + (C_M or 0.0)) / (p * C_ap)
            value = fixed_M.get(j, headroom * bound)
            M[j - 1] = value
            levels.append({
                "level": j, "name": f"M_{p - j}", "C_a": C_a, "C_ap": C_ap, "C_M": C_M,
                "depends_on": [f"C_a_{p - j}", "C_a_p"] + [f"M_{p - i}" for i in range(1, j)],
                "lower_bound": bound, "value": value, "slack": value - bound, "fixed": j in fixed_M,
            })
        base = prob.cfg.with_(h=h, M=tuple(M), K=0.0, allow_zero_M=True)
        B_sup = _K_from_deficit(base, prob, grid, times)
        K = headroom * B_sup
        cfg = base.with_(K=K)
        work = prob.with_cfg(cfg)
        scans = positivity_scans(work, grid, t_samples)
        try:
            lam = Transform(cfg, grid, prob.sign_ap).lam_table if any(M) else np.zeros((grid.N, grid.N))
            inversion = invert_eLambda(lam, grid, h=h)
            inv_ok, inv_note = inversion.ok, ""
        except InversionError as exc:
            inversion, inv_ok, inv_note = None, False, str(exc)
        ok = inv_ok and all(s.passed for s in scans)
        attempts.append({"h": h, "M": list(M), "K": K, "inversion_ok": inv_ok, "inversion_note": inv_note,
                         "inversion_residual": inversion.residual if inversion else None,
                         "scan_minima": [s.min_margin for s in scans], "passed": ok})
        final = ConstantsSelection(tuple(M), K, h, cfg, {
            "order": [lv["name"] for lv in levels] + ["K", "h"],
            "levels": levels,
            "K": {"sup_B_over_weight": B_sup, "value": K, "headroom": headroom},
            "assumptions": rep.to_dict(),
            "attempts": attempts,
        }, scans, inversion, ok)
        if ok:
            break
        h *= 2.0
    return final


def conjugation_check(prob: Problem, cfg: GevreyConfig, grid: Grid, N_terms: int = 4, fd_step: float = 1e-4) -> dict:
    """Stratum 1 of op(e^Lambda) op(a_p xi^p) op^R(e^-Lambda) against i a_p d_xi(xi^p d_x Lambda).

    The comparison table is built from the closed-form x-derivative of Lambda
    with a centered difference in xi, independently of the jet calculus; the
    full expansion is measured against the dense triple product.
    """
    from .symbols import Lambda_symbol, xi_power_symbol

    g = Grid(grid.L, grid.N, cfg.h)
    p, ap = prob.p, float(prob.a_p(0.0))
    lead = xi_power_symbol(p)
    sym = ScalarSymbol.from_jet(lambda x, xi, nx, nxi: lead.jet(x, xi, nx, nxi) * ap, xi_order=p, name="a_p xi^p")
    strata = conjugation_expansion(sym, Lambda_symbol(cfg, prob.sign_ap), 2, g).terms
    lf = LambdaField(cfg, prob.sign_ap)
    x, xi = g.x_nodes, g.xi_nodes

    def dx_lam(z):
        return sum(lf.dx_exact(k, x, z) for k in range(1, p))

    d_xi = (dx_lam(xi + fd_step) - dx_lam(xi - fd_step)) / (2 * fd_step)
    direct = 1j * ap * (p * xi ** (p - 1) * dx_lam(xi) + xi ** p * d_xi)
    region = np.abs(xi) >= 2 * cfg.h
    err = float(np.max(np.abs(strata[1].table - direct)[:, region]) / np.max(np.abs(direct)[:, region]))
    full = conjugation_expansion(sym, Lambda_symbol(cfg, prob.sign_ap, taper=g), N_terms, g)
    return {"h": cfg.h, "stratum1_relative_error": err, "expansion_relative_residual": full.relative_residual,
            "partial_residuals": full.partial_residuals, "terms": N_terms}


# ---------------------------------------------------------------------------
# generator
# ---------------------------------------------------------------------------

def generator_matrix(prob: Problem, t: float, grid: Grid, principal: bool = True) -> np.ndarray:
    """G(t) = i (a_p(t) xi^p(D) + sum_j a_{p-j}(t, x) xi^{p-j}(D)), all lower orders including a_0."""
    xi = grid.xi_nodes
    G = 1j * float(prob.a_p(t)) * multiplier_matrix(xi ** prob.p, grid) if principal else np.zeros((grid.N, grid.N), complex)
    for j in range(1, prob.p + 1):
        a = prob.coefficient(j).value(t, grid.x_nodes)
        if np.any(a):
            G = G + 1j * a[:, None] * multiplier_matrix(xi ** (prob.p - j), grid)
    return G


def time_independent(prob: Problem) -> bool:
    a0 = float(prob.a_p(0.0))
    same_ap = all(float(prob.a_p(t)) == a0 for t in np.linspace(0, prob.cfg.T, 7))
    return same_ap and all(getattr(c, "oscillation", 1.0) == 0 for c in prob.lower)


class ConjugatedGenerator:
    """M(t) = Q(t) G(t) Q(t)^{-1} + K <D>_h^{(p-1)(1-sigma)} with cached pieces."""

    def __init__(self, prob: Problem, grid: Grid, transform: Transform, K: float | None = None,
                 principal: bool = True):
        self.prob, self.grid, self.tr = prob, grid, transform
        self.principal = principal
        cfg = transform.cfg
        self.K = cfg.K if K is None else K
        self.K_diag = self.K * bracket_h(grid.xi_nodes, cfg.h) ** cfg.kappa_order if transform.time_weight else 0.0
        self._static = time_independent(prob)
        self._core = None

    def core(self, t) -> np.ndarray:
        """E G(t) E^{-1}."""
        if self._static and self._core is not None:
            return self._core
        c = self.tr.E @ generator_matrix(self.prob, t, self.grid, self.principal) @ self.tr.Einv
        if self._static:
            self._core = c
        return c

    def __call__(self, t) -> np.ndarray:
        w = np.exp(self.tr.exponent(t))
        M = multiplier_left(w, multiplier_right(self.core(t), 1.0 / w))
        if np.any(self.K_diag):
            M = M + multiplier_matrix(self.K_diag, self.grid)
        return M


def assemble_conjugated_generator(prob: Problem, t: float, sel: ConstantsSelection, grid: Grid,
                                  transform: Transform | None = None):
    from .quantizer import OperatorMatrix
    tr = transform if transform is not None else Transform(sel.cfg, grid, prob.sign_ap)
    if not tr.inversion.ok:
        raise PipelineError(f"inversion residual {tr.inversion.residual:.3g} above {INVERSION_OK:g}")
    return OperatorMatrix(ConjugatedGenerator(prob, grid, tr)(t), grid, f"M({t:g})")


def hermitian_lower_bound(M, grid: Grid | None = None, band: float | None = None) -> float:
    """Smallest eigenvalue of (M + M*)/2, optionally compressed to lattice modes with |xi| <= band."""
    A = M.entries if hasattr(M, "entries") else np.asarray(M)
    H = 0.5 * (A + A.conj().T)
    if band is not None:
        if grid is None:
            raise ValueError("a band needs the grid")
        keep = np.fft.ifftshift(np.abs(grid.xi_nodes) <= band)
        modes = np.fft.ifft(np.eye(grid.N), axis=0, norm="ortho")[:, keep]
        H = modes.conj().T @ H @ modes
    return float(np.linalg.eigvalsh(H)[0])


# ---------------------------------------------------------------------------
# data and time stepping
# ---------------------------------------------------------------------------

def initial_data(grid: Grid, spec: dict | None) -> np.ndarray:
    """Gaussian packet A exp(-(x-c)^2/(2w^2) + i xi0 x), a lattice mode, or zero."""
    spec = dict(spec or {"kind": "gaussian"})
    kind = spec.get("kind", "gaussian")
    x = grid.x_nodes
    if kind == "zero":
        return np.zeros(grid.N, dtype=complex)
    if kind == "mode":
        k = int(spec.get("index", 3))
        return float(spec.get("amplitude", 1.0)) * np.exp(1j * grid.xi_nodes[grid.N // 2 + k] * x)
    if kind == "gaussian":
        c, w = float(spec.get("center", 0.0)), float(spec.get("width", 1.0))
        xi0, amp = float(spec.get("xi0", 0.0)), float(spec.get("amplitude", 1.0))
        return amp * np.exp(-0.5 * ((x - c) / w) ** 2 + 1j * xi0 * x)
    raise ValueError(f"unknown data kind {kind!r}")


@dataclass
class Trajectory:
    grid: Grid
    times: np.ndarray
    v: np.ndarray
    u: np.ndarray
    g: np.ndarray
    f: np.ndarray | None
    scheme: str
    roundtrip: np.ndarray
    l2_v: np.ndarray = field(init=False)
    l2_u: np.ndarray = field(init=False)
    energy_series: np.ndarray = field(init=False)

    def __post_init__(self):
        dx = self.grid.dx
        self.l2_v = np.sqrt(dx * np.sum(np.abs(self.v) ** 2, axis=1))
        self.l2_u = np.sqrt(dx * np.sum(np.abs(self.u) ** 2, axis=1))
        e = self.l2_v ** 2
        self.energy_series = np.gradient(e, self.times) if len(self.times) > 1 else np.zeros_like(e)

    @property
    def v_states(self):
        return [StateVector(self.grid, r) for r in self.v]

    @property
    def u_states(self):
        return [StateVector(self.grid, r) for r in self.u]

    def gs_norms(self, spec: GevreyNormSpec, which: str = "u") -> np.ndarray:
        return gs_norm(getattr(self, which), spec, self.grid)


SCHEMES = ("crank_nicolson", "strang_rk4")


def evolve(prob: Problem, f, g, sel, grid: Grid, S: int = 64, scheme: str = "crank_nicolson",
           transform: Transform | None = None, T_end: float | None = None,
           phase_cap: float = 6.0) -> Trajectory:
    """Solve d_t v = -M(t) v + Q(t) f, v(0) = Q(0) g, and recover u = Q^{-1} v at every step.

    ``f`` is None or a callable t -> samples; ``g`` samples or a StateVector. ``strang_rk4`` splits
    each step further so the principal phase advance per split stays below ``phase_cap``.
    """
    if S < 16:
        raise ValueError("S must be at least 16")
    if scheme not in SCHEMES:
        raise ValueError(f"scheme must be one of {SCHEMES}")
    cfg = sel.cfg if hasattr(sel, "cfg") else sel
    T_end = cfg.T if T_end is None else float(T_end)
    tr = transform if transform is not None else Transform(cfg, grid, prob.sign_ap)
    gen = ConjugatedGenerator(prob, grid, tr)
    g = g.values if isinstance(g, StateVector) else np.asarray(g, dtype=complex)
    times = np.linspace(0.0, T_end, S + 1)
    dt = T_end / S
    N = grid.N
    eye = np.eye(N)

    def source(t):
        if f is None:
            return None
        return tr.Q(t) @ np.asarray(f(t), dtype=complex)

    v = np.zeros((S + 1, N), dtype=complex)
    v[0] = tr.Q(0.0) @ g
    if scheme == "crank_nicolson":
        M_prev = gen(times[0])
        for k in range(S):
            M_next = gen(times[k + 1])
            rhs = v[k] - 0.5 * dt * (M_prev @ v[k])
            src = source(times[k] + 0.5 * dt)
            if src is not None:
                rhs = rhs + dt * src
            try:
                v[k + 1] = np.linalg.solve(eye + 0.5 * dt * M_next, rhs)
            except np.linalg.LinAlgError as exc:
                raise EvolutionError(f"step rejected at t={times[k + 1]:g}: implicit matrix singular", times[k + 1]) from exc
            if not np.all(np.isfinite(v[k + 1])):
                raise EvolutionError(f"overflow at t={times[k + 1]:g}", times[k + 1])
            M_prev = M_next
    else:
        xi = grid.xi_nodes
        rest = ConjugatedGenerator(prob, grid, tr, principal=False)

        def half_flow(w, t0, t1):
            # exact flow of i a_p xi^p(D), carried into the v-frame by the transform frozen at the midpoint
            tm = 0.5 * (t0 + t1)
            weight = np.exp(tr.exponent(tm))
            phase = np.exp(-(t1 - t0) * 1j * float(prob.a_p(tm)) * xi ** prob.p)
            z = tr.Einv @ grid.multiply(1.0 / weight, w)
            return grid.multiply(weight, tr.E @ grid.multiply(phase, z))

        top = abs(float(prob.a_p(0.0))) * grid.xi_max ** prob.p
        n_split = max(1, ceil(dt * top / phase_cap))
        ds = dt / n_split
        nsub = max(1, ceil(ds * np.linalg.norm(rest(0.0), 2) / 2.0))
        hs = ds / nsub

        def F(tt, ww, B):
            out = -(B @ ww)
            src = source(tt)
            return out if src is None else out + src

        with np.errstate(over="ignore", invalid="ignore"):  # non-finite states are reported below
            for k in range(S):
                w = v[k]
                for q in range(n_split):
                    t0 = times[k] + q * ds
                    w = half_flow(w, t0, t0 + 0.5 * ds)
                    B = rest(t0 + 0.5 * ds)  # frozen at the split midpoint, second order like the splitting
                    for m in range(nsub):
                        ta = t0 + m * hs
                        k1 = F(ta, w, B)
                        k2 = F(ta + 0.5 * hs, w + 0.5 * hs * k1, B)
                        k3 = F(ta + 0.5 * hs, w + 0.5 * hs * k2, B)
                        k4 = F(ta + hs, w + hs * k3, B)
                        w = w + hs / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
                    w = half_flow(w, t0 + 0.5 * ds, t0 + ds)
                v[k + 1] = w
                if not np.all(np.isfinite(w)):
                    raise EvolutionError(f"overflow at t={times[k + 1]:g}", times[k + 1])
    u = np.array([tr.Q_inverse(t) @ v[k] for k, t in enumerate(times)])
    vn = np.linalg.norm(v, axis=1)
    back = np.array([np.linalg.norm(tr.Q(t) @ u[k] - v[k]) for k, t in enumerate(times)])
    roundtrip = np.where(vn > 0, back / np.where(vn > 0, vn, 1.0), back)
    fvals = None if f is None else np.array([np.asarray(f(t), dtype=complex) for t in times])
    return Trajectory(grid, times, v, u, g, fvals, scheme, roundtrip)


# ---------------------------------------------------------------------------
# energy estimate
# ---------------------------------------------------------------------------

@dataclass
class EnergyReport:
    C: float
    gronwall_rate: float
    gronwall_max_rate: float
    rho_tilde: float
    m: float
    lhs: list
    rhs: list
    finite: bool

    def to_dict(self):
        return {"C": self.C, "gronwall_rate": self.gronwall_rate, "gronwall_max_rate": self.gronwall_max_rate,
                "rho_tilde": self.rho_tilde, "m": self.m, "lhs": self.lhs, "rhs": self.rhs, "finite": self.finite}


def gronwall_rate(times, norms):
    """Least-squares C' in log(|v(t)|/|v(0)|) ~ C' t, and the largest pointwise rate."""
    t = np.asarray(times)[1:]
    n0 = norms[0]
    if n0 == 0:
        return 0.0, 0.0
    y = np.log(np.asarray(norms)[1:] / n0)
    return float(np.dot(t, y) / np.dot(t, t)), float(np.max(y / t))


def energy_report(traj: Trajectory, cfg: GevreyConfig, m: float = 0.0, rho_tilde: float | None = None) -> EnergyReport:
    """Smallest C with |u(t)|^2_{m, rho~} <= C (|g|^2_{m, rho} + int_0^t |f|^2_{m, rho})."""
    rho_tilde = 0.95 * cfg.rho_prime if rho_tilde is None else rho_tilde
    grid = traj.grid
    lhs = gs_norm(traj.u, GevreyNormSpec(m, rho_tilde, cfg.theta, 1.0), grid) ** 2
    data = GevreyNormSpec(m, cfg.rho, cfg.theta, 1.0)
    g2 = float(gs_norm(traj.g, data, grid) ** 2)
    if traj.f is not None:
        f2 = gs_norm(traj.f, data, grid) ** 2
        integral = np.concatenate([[0.0], np.cumsum(0.5 * (f2[1:] + f2[:-1]) * np.diff(traj.times))])
    else:
        integral = np.zeros_like(traj.times)
    rhs = g2 + integral
    with np.errstate(divide="ignore", invalid="ignore"):
        ratios = np.where(rhs > 0, lhs / np.where(rhs > 0, rhs, 1.0), np.where(lhs > 0, np.inf, 0.0))
    C = float(np.max(ratios))
    rate, max_rate = gronwall_rate(traj.times, traj.l2_v)
    return EnergyReport(C, rate, max_rate, rho_tilde, m, lhs.tolist(), rhs.tolist(), bool(np.isfinite(C)))


# ---------------------------------------------------------------------------
# sigma sweep
# ---------------------------------------------------------------------------

SWEEP_DATA = {"kind": "gaussian", "center": 0.0, "width": 1.0, "xi0": 8.0}


def sigma_sweep(name: str, sigmas, cfg: GevreyConfig, grid: Grid, S: int = 64, horizon: float = 0.1,
                imag_scale: float = 1.0, sel: ConstantsSelection | None = None, data: dict | None = None,
                workers: int = 1) -> list:
    """Growth gs(u(T'))/gs(u(0)) at rho~ for coefficient decay sigma, with constants frozen from cfg."""
    if sel is None:
        sel = select_constants(make_preset(name, cfg), grid)
    tr = Transform(sel.cfg, grid, make_preset(name, sel.cfg).sign_ap)
    g = initial_data(grid, data or SWEEP_DATA)
    spec = GevreyNormSpec(0.0, 0.95 * cfg.rho_prime, cfg.theta, 1.0)

    def run(sig):
        prob = make_preset(name, sel.cfg, sigma=sig, imag_scale=imag_scale)
        try:
            traj = evolve(prob, None, g, sel, grid, S, transform=tr, T_end=min(horizon, sel.cfg.T))
        except EvolutionError as exc:
            return {"sigma": float(sig), "growth": None, "status": "blowup", "witness_time": exc.witness_time}
        n = traj.gs_norms(spec)
        growth = float(n[-1] / n[0])
        status = "ok" if np.isfinite(growth) else "blowup"
        return {"sigma": float(sig), "growth": growth if np.isfinite(growth) else None, "status": status,
                "l2_growth": float(traj.l2_u[-1] / traj.l2_u[0])}

    sigmas = [float(s) for s in sigmas]
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as ex:
            return list(ex.map(run, sigmas))
    return [run(s) for s in sigmas]


def scheme_agreement(a: Trajectory, b: Trajectory, channel: str = "u") -> float:
    """Largest relative difference between the L^2 channels (``u`` or ``v``) of two runs."""
    x, y = getattr(a, f"l2_{channel}"), getattr(b, f"l2_{channel}")
    return float(np.max(np.abs(x - y) / np.maximum(np.abs(x), 1e-300)))


def qr_residual(traj: Trajectory) -> float:
    return float(np.max(traj.roundtrip))


__all__ = [
    "PipelineError", "GridTooSmall", "EvolutionError", "ScanReport", "ConstantsSelection", "Trajectory",
    "EnergyReport", "positivity_scans", "positivity_scan", "select_constants", "generator_matrix",
    "ConjugatedGenerator", "assemble_conjugated_generator", "hermitian_lower_bound", "initial_data", "evolve",
    "energy_report", "gronwall_rate", "sigma_sweep", "scheme_agreement", "problem_jet", "level_symbols",
    "white_probes", "probe_norm", "conjugation_check", "GevreyNormSpec", "SCHEMES", "SWEEP_DATA", "qr_residual", "Transform", "time_independent",
]
