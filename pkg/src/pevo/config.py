"""The record of every constant the transformation depends on."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field, replace
from math import isfinite

import numpy as np


class ConfigError(ValueError):
    """Invalid configuration (maps to CLI exit code 2)."""


OVERFLOW_EXPONENT = 690.0


@dataclass(frozen=True)
class GevreyConfig:
    p: int
    sigma: float
    theta0: float
    theta: float
    T: float
    rho: float
    rho_prime: float
    mu: float = 1.125
    h: float = 1.0
    K: float = 0.0
    M: tuple = ()
    R_ap: float = 2.0
    # periodization windows, as fractions of L and of the Nyquist frequency
    x_window: tuple = (0.6, 0.95)
    xi_window: tuple = (0.7, 0.95)
    allow_zero_M: bool = field(default=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "M", tuple(float(m) for m in self.M))
        object.__setattr__(self, "x_window", tuple(float(v) for v in self.x_window))
        object.__setattr__(self, "xi_window", tuple(float(v) for v in self.xi_window))
        self.validate()

    # ------------------------------------------------------------------
    @property
    def theta_max(self) -> float:
        gap = (self.p - 1) * (1.0 - self.sigma)
        return float("inf") if gap <= 0 else 1.0 / gap

    @property
    def kappa_order(self) -> float:
        """Order (p-1)(1-sigma) of the lambda symbols in xi."""
        return (self.p - 1) * (1.0 - self.sigma)

    def decay(self, k: int) -> float:
        """x-decay exponent (p-k) sigma / (p-1) attached to level k."""
        return (self.p - k) * self.sigma / (self.p - 1)

    def M_of(self, k: int) -> float:
        """M_{p-k}; M is stored as (M_{p-1}, ..., M_1)."""
        if not self.M:
            return 0.0
        return self.M[k - 1]

    def validate(self):
        p = self.p
        if not isinstance(p, (int, np.integer)) or p < 2:
            raise ConfigError(f"p must be an integer >= 2, got {p!r}")
        for name in ("sigma", "theta0", "theta", "T", "rho", "rho_prime", "mu", "h", "K", "R_ap"):
            v = getattr(self, name)
            if not isinstance(v, (int, float, np.floating, np.integer)) or not isfinite(v):
                raise ConfigError(f"{name} must be a finite number, got {v!r}")
        lo = (p - 2) / (p - 1)
        if not (lo < self.sigma < 1):
            raise ConfigError(f"sigma must lie in (({p}-2)/({p}-1), 1) = ({lo:g}, 1), got {self.sigma}")
        if not self.theta0 > 1:
            raise ConfigError(f"theta0 must exceed 1, got {self.theta0}")
        if not (self.theta0 <= self.theta < self.theta_max):
            raise ConfigError(
                f"theta must lie in [theta0, 1/((p-1)(1-sigma))) = [{self.theta0}, {self.theta_max:g}), got {self.theta}"
            )
        if not self.mu > 1:
            raise ConfigError(f"mu must exceed 1, got {self.mu}")
        if not self.T > 0:
            raise ConfigError(f"T must be positive, got {self.T}")
        if not self.rho > 0:
            raise ConfigError(f"rho must be positive, got {self.rho}")
        if not (0 < self.rho_prime < self.rho):
            raise ConfigError(f"rho_prime must lie in (0, rho), got {self.rho_prime}")
        if not self.h >= 1:
            raise ConfigError(f"h must be >= 1, got {self.h}")
        if self.K < 0:
            raise ConfigError(f"K must be >= 0, got {self.K}")
        if not self.R_ap > 1:
            raise ConfigError(f"R_ap must exceed 1, got {self.R_ap}")
        if self.M:
            if len(self.M) != p - 1:
                raise ConfigError(f"M needs p-1 = {p - 1} entries, got {len(self.M)}")
            bad = [m for m in self.M if not isfinite(m) or m < 0 or (m == 0 and not self.allow_zero_M)]
            if bad:
                raise ConfigError(f"M entries must be positive, got {list(self.M)}")
        for name in ("x_window", "xi_window"):
            a, b = getattr(self, name)
            if not 0 < a < b <= 1:
                raise ConfigError(f"{name} must satisfy 0 < flat < edge <= 1, got {(a, b)}")

    def check_overflow(self, xi_max: float, rho: float | None = None, h: float | None = None):
        """Guard rho * <xi_max>_h^(1/theta) < 690 for the exponential weights."""
        rho = self.rho if rho is None else rho
        h = self.h if h is None else h
        e = abs(rho) * (h * h + xi_max * xi_max) ** (0.5 / self.theta)
        if e >= OVERFLOW_EXPONENT:
            raise ConfigError(f"exponential weight overflows: rho*<xi_max>^(1/theta) = {e:.1f} >= 690")
        return e

    def with_(self, **changes) -> "GevreyConfig":
        return replace(self, **changes)

    def to_dict(self) -> dict:
        d = asdict(self)
        d.pop("allow_zero_M")
        d["M"] = list(self.M)
        d["x_window"] = list(self.x_window)
        d["xi_window"] = list(self.xi_window)
        return d


PRESET_CONFIGS = {
    "kdv3": dict(p=3, sigma=0.9, theta0=1.5, theta=2.0, T=0.1, rho=1.0, rho_prime=0.5),
    "schrodinger2": dict(p=2, sigma=0.9, theta0=1.5, theta=2.0, T=0.1, rho=1.0, rho_prime=0.5),
    "kawahara5": dict(p=5, sigma=0.9, theta0=1.5, theta=2.0, T=0.1, rho=1.0, rho_prime=0.5),
}


def preset_config(name: str, **overrides) -> GevreyConfig:
    try:
        base = dict(PRESET_CONFIGS[name])
    except KeyError:
        raise ConfigError(f"unknown preset {name!r}; choose from {sorted(PRESET_CONFIGS)}") from None
    base.update(overrides)
    return GevreyConfig(**base)
