"""p-evolution operators D_t + a_p(t) D^p + sum_j a_{p-j}(t, x) D^{p-j} and their hypotheses."""

from __future__ import annotations

from dataclasses import dataclass, field
from math import factorial

import numpy as np

from .config import GevreyConfig, preset_config
from .jets import Jet
from .quadrature import cumulative_simpson
from .symbols import japanese_power_x


class AssumptionViolation(ValueError):
    pass


# ---------------------------------------------------------------------------
# coefficients
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DecayingCoefficient:
    """a(t, x) = amplitude * f(t) * <x>^(-exponent).

    ``oscillation`` > 0 switches on f(t) = 1 + oscillation * sin(2 pi t / period).
    """

    amplitude: complex
    exponent: float
    oscillation: float = 0.0
    period: float = 1.0

    def time_factor(self, t):
        t = np.asarray(t, dtype=float)
        if self.oscillation == 0:
            return np.ones_like(t)
        return 1.0 + self.oscillation * np.sin(2 * np.pi * t / self.period)

    def value(self, t, x):
        return self.deriv(0, t, x)

    def deriv(self, beta: int, t, x):
        """Closed-form d_x^beta a(t, x) for beta <= 4."""
        x = np.asarray(x, dtype=float)
        if self.amplitude == 0:
            return np.zeros(np.broadcast_shapes(np.shape(t), x.shape), dtype=complex)
        d = japanese_power_x(x, self.exponent, beta)[beta]
        return self.amplitude * self.time_factor(t) * d

    def jet(self, t, x, nx, nxi, ng=1, tot=None) -> Jet:
        """x-jet (any order) on the lattice x[:, None]."""
        xj = Jet.coordinate_x(np.asarray(x, float)[:, None], nx, nxi, ng, tot)
        base = (xj * xj + 1.0).power(-self.exponent / 2.0)
        return base * (self.amplitude * complex(self.time_factor(t)))

    def to_dict(self):
        return {"amplitude": [self.amplitude.real, self.amplitude.imag], "exponent": self.exponent,
                "oscillation": self.oscillation}


@dataclass(frozen=True)
class ConstantLeading:
    value: float

    def __call__(self, t):
        return np.full(np.shape(t), float(self.value)) if np.ndim(t) else float(self.value)


@dataclass
class Problem:
    p: int
    a_p: object
    lower: list  # lower[j-1] = a_{p-j}, j = 1..p
    sigma_list: list  # decay exponent of a_{p-j}, j = 1..p
    cfg: GevreyConfig
    name: str = "custom"
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if len(self.lower) != self.p:
            raise ValueError(f"need p = {self.p} lower coefficients a_{{p-1}}..a_0, got {len(self.lower)}")
        if self.cfg.p != self.p:
            raise ValueError(f"config is for p = {self.cfg.p}, problem has p = {self.p}")

    @property
    def sign_ap(self) -> int:
        return 1 if float(self.a_p(0.0)) >= 0 else -1

    def coefficient(self, j: int):
        """a_{p-j}."""
        return self.lower[j - 1]

    def t_samples(self, n: int = 16):
        return np.linspace(0.0, self.cfg.T, n)

    def with_cfg(self, cfg: GevreyConfig) -> "Problem":
        return Problem(self.p, self.a_p, list(self.lower), list(self.sigma_list), cfg, self.name, dict(self.meta))

    def to_dict(self):
        return {"name": self.name, "p": self.p, "a_p0": float(self.a_p(0.0)),
                "lower": [c.to_dict() for c in self.lower], "sigma_list": list(self.sigma_list)}


LEADING = {"schrodinger2": -0.5, "kdv3": 1.0, "kawahara5": 1.0}
ORDERS = {"schrodinger2": 2, "kdv3": 3, "kawahara5": 5}


def make_preset(name: str, cfg: GevreyConfig | None = None, *, c=None, c0: float = 0.1,
                imag_scale: float = 1.0, oscillating: bool = False, exponents: dict | None = None,
                sigma: float | None = None) -> Problem:
    """Preset with a_{p-j} = c_j (1+i) <x>^(-(p-j) sigma/(p-1)) and a_0 = c0 (1+i) <x>^(-sigma/(p-1)).

    ``imag_scale`` multiplies every imaginary part (0 gives the real control),
    ``exponents`` overrides decay exponents by j, ``sigma`` the decay parameter
    of the coefficients only (the transformation keeps cfg.sigma).
    """
    if name not in ORDERS:
        raise ValueError(f"unknown preset {name!r}; choose from {sorted(ORDERS)}")
    p = ORDERS[name]
    cfg = cfg if cfg is not None else preset_config(name)
    if cfg.p != p:
        raise ValueError(f"preset {name} needs p = {p}, config has p = {cfg.p}")
    sig = cfg.sigma if sigma is None else float(sigma)
    cs = list(c) if c is not None else [0.5] * (p - 1)
    if len(cs) != p - 1:
        raise ValueError(f"need {p - 1} amplitudes c_j")
    exponents = dict(exponents or {})
    lower, sl = [], []
    for j in range(1, p + 1):
        amp = cs[j - 1] if j < p else c0
        s = exponents.get(j, (p - j) * sig / (p - 1) if j < p else sig / (p - 1))
        a = complex(amp, amp * imag_scale)
        lower.append(DecayingCoefficient(a, s, 0.5 if (oscillating and j == 1) else 0.0, cfg.T))
        sl.append(s)
    meta = {"c": cs, "c0": c0, "imag_scale": imag_scale, "oscillating": oscillating, "coef_sigma": sig,
            "exponents": {str(k): v for k, v in sorted(exponents.items())}}
    return Problem(p, ConstantLeading(LEADING[name]), lower, sl, cfg, name, meta)


# ---------------------------------------------------------------------------
# hypotheses
# ---------------------------------------------------------------------------

def gevrey_constant_estimate(a, j: int, cfg: GevreyConfig, beta_max: int = 4, t_samples=None,
                             x_samples=None, slope_tol: float = 0.05) -> float:
    """Smallest C with |d^beta a| <= C^(beta+1) beta!^theta0 <x>^(-(p-j)sigma/(p-1) - beta)."""
    t = np.linspace(0.0, cfg.T, 16) if t_samples is None else np.asarray(t_samples, float)
    x = np.linspace(0.0, 100.0, 801) if x_samples is None else np.asarray(x_samples, float)
    s = (cfg.p - j) * cfg.sigma / (cfg.p - 1)
    bx = np.sqrt(1 + x * x)
    C = 0.0
    for beta in range(beta_max + 1):
        d = np.abs(a.deriv(beta, t[:, None], x[None, :]))
        ratio = d / (factorial(beta) ** cfg.theta0 * bx[None, :] ** (-s - beta))
        env = ratio.max(axis=0)  # sup over t
        if not np.all(np.isfinite(env)):
            raise AssumptionViolation(f"non-finite derivative ratio for a_(p-{j}) at beta={beta}")
        if env.max() > 0:
            tail = np.abs(x) >= 0.5 * np.abs(x).max()
            pos = env[tail] > 0
            if pos.sum() >= 2:
                A = np.vstack([np.log(bx[tail][pos]), np.ones(pos.sum())]).T
                slope = np.linalg.lstsq(A, np.log(env[tail][pos]), rcond=None)[0][0]
                at_edge = np.argmax(env) >= env.size - 2 or np.abs(x[np.argmax(env)]) >= 0.99 * np.abs(x).max()
                if slope > slope_tol and at_edge:
                    raise AssumptionViolation(
                        f"a_(p-{j}) decays too weakly: derivative ratio grows like <x>^{slope:.3f} "
                        f"(beta={beta}) against the required <x>^-{s:.3f}"
                    )
        C = max(C, float(env.max()) ** (1.0 / (beta + 1)))
    return C


@dataclass
class AssumptionReport:
    C_ap: float
    sign_constant: bool
    leading_ok: bool
    C_lower: dict
    lower_ok: dict
    messages: list

    @property
    def passed(self) -> bool:
        return self.leading_ok and all(self.lower_ok.values())

    def to_dict(self):
        return {"C_ap": self.C_ap, "sign_constant": self.sign_constant, "leading_ok": self.leading_ok,
                "C_lower": {str(k): v for k, v in self.C_lower.items()},
                "lower_ok": {str(k): v for k, v in self.lower_ok.items()}, "messages": list(self.messages),
                "passed": self.passed}


def check_assumptions(prob: Problem, n_t: int = 16) -> AssumptionReport:
    t = prob.t_samples(n_t)
    ap = np.array([float(prob.a_p(tt)) for tt in t])
    C_ap = float(np.min(np.abs(ap)))
    sign_const = bool(np.all(ap > 0) or np.all(ap < 0))
    msgs = []
    leading_ok = C_ap > 0 and sign_const
    if not leading_ok:
        msgs.append("leading coefficient vanishes or changes sign on [0, T]")
    C_lower, ok = {}, {}
    cfg_for_decay = prob.cfg
    for j in range(1, prob.p):
        try:
            C_lower[j] = gevrey_constant_estimate(prob.coefficient(j), j, cfg_for_decay, t_samples=t)
            ok[j] = True
        except AssumptionViolation as exc:
            C_lower[j] = float("inf")
            ok[j] = False
            msgs.append(str(exc))
    return AssumptionReport(C_ap, sign_const, leading_ok, C_lower, ok, msgs)


def xi_index(sigma_list, p: int) -> float:
    """max_j {(p-1)(1-sigma_{p-j}) - j + 1} over j = 1..p-1 (sigma_list[j-1] = sigma_{p-j})."""
    sig = list(sigma_list)[: p - 1]
    if any(not 0 <= s <= 1 for s in sig):
        raise ValueError("sigma entries must lie in [0, 1]")
    return max((p - 1) * (1 - s) - j + 1 for j, s in enumerate(sig, start=1))


@dataclass
class ThetaRange:
    lower: float
    upper: float
    empty: bool

    def __contains__(self, theta):
        return not self.empty and self.lower <= theta < self.upper


def theta_range(theta0: float, sigma: float, p: int) -> ThetaRange:
    gap = (p - 1) * (1 - sigma)
    upper = float("inf") if gap <= 0 else 1.0 / gap
    return ThetaRange(theta0, upper, not theta0 < upper)


# ---------------------------------------------------------------------------
# necessary-condition scan
# ---------------------------------------------------------------------------

@dataclass
class CN2Fit:
    rho: list
    F: list
    M: float
    N: float
    max_residual: float
    relative_residual: float
    slope_ratio: float
    super_logarithmic: bool

    def to_dict(self):
        return {"rho": self.rho, "F": self.F, "M": self.M, "N": self.N, "max_residual": self.max_residual,
                "relative_residual": self.relative_residual, "slope_ratio": self.slope_ratio,
                "super_logarithmic": self.super_logarithmic}


def _log_fit(rho, F):
    A = np.vstack([np.log1p(rho), np.ones_like(rho)]).T
    (M, N), *_ = np.linalg.lstsq(A, F, rcond=None)
    return float(M), float(N)


DEFAULT_RHO_GRID = tuple(np.geomspace(1.0, 1e6, 25))


def necessary_condition_scan(prob: Problem, rho_grid=DEFAULT_RHO_GRID, t_samples: int = 16, x_samples: int = 64,
                             x_extent: float = 10.0, tol: float = 1e-9, residual_tol: float = 0.1,
                             ratio_tol: float = 1.05) -> CN2Fit:
    """F(rho) = sup_x min_{tau <= t} int_{-rho}^{rho} Im a_{p-1}(t, x + p a_p(tau) s) ds, fitted by M log(1+rho) + N.

    Super-logarithmic growth is flagged when the fit residual exceeds
    ``residual_tol`` of max F, or when the local log-slope of F on the top third
    of the grid exceeds that on the middle third by the factor ``ratio_tol``.
    """
    rho = np.asarray(rho_grid, dtype=float)
    if rho.size < 5 or np.any(np.diff(rho) <= 0):
        raise ValueError("rho grid must be increasing with at least 5 points")
    a = prob.coefficient(1)
    ts = prob.t_samples(t_samples)
    xs = x_extent * (np.arange(x_samples) - x_samples // 2) / (x_samples // 2)
    speeds = np.array([prob.p * float(prob.a_p(tt)) for tt in ts])

    def imag_profile(t):
        return lambda y, o: np.imag(a.value(t, y))

    # segment integrals depend on (t, speed(tau)); deduplicate equal combinations
    probe = np.linspace(-3, 3, 7)
    cache = {}
    Fmin = np.full((xs.size, rho.size), np.inf)
    for it, t in enumerate(ts):
        key_t = tuple(np.round(np.imag(a.value(t, probe)), 15))
        for iu in range(it + 1):
            c = speeds[iu]
            key = (key_t, round(abs(c), 15))
            if key not in cache:
                vals = np.zeros((xs.size, rho.size))
                if abs(c) > 0 and np.any(key_t):
                    for ix, x0 in enumerate(xs):
                        nodes = np.concatenate([x0 - abs(c) * rho[::-1], x0 + abs(c) * rho])
                        cum = cumulative_simpson(imag_profile(t), nodes, tol)[:, 0]
                        K = rho.size
                        vals[ix] = (cum[K:] - cum[K - 1 :: -1]) / abs(c)
                cache[key] = vals
            Fmin = np.minimum(Fmin, cache[key])
    F = Fmin.max(axis=0)
    if not np.any(F):
        return CN2Fit(rho.tolist(), F.tolist(), 0.0, 0.0, 0.0, 0.0, 1.0, False)
    M, N = _log_fit(rho, F)
    res = F - (M * np.log1p(rho) + N)
    max_res = float(np.max(np.abs(res)))
    rel = max_res / float(np.max(np.abs(F)))
    thirds = np.array_split(np.arange(rho.size), 3)
    m_mid, _ = _log_fit(rho[thirds[1]], F[thirds[1]])
    m_top, _ = _log_fit(rho[thirds[2]], F[thirds[2]])
    ratio = m_top / m_mid if m_mid > 0 else float("inf")
    flag = bool(rel > residual_tol or ratio > ratio_tol)
    return CN2Fit(rho.tolist(), F.tolist(), M, N, max_res, rel, float(ratio), flag)
