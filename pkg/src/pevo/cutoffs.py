"""Smooth cutoffs built from the bump exp(-1/(1-v^2)).

``smooth_step(t)`` rises from 0 (t <= 0) to 1 (t >= 1); every cutoff of the
package (the frequency switch omega, the support cutoff psi and the two
periodization windows) is an affine reparametrization of it, so derivatives
of any order come from a single closed-form recursion for the bump.
"""

from __future__ import annotations

from functools import lru_cache
from math import factorial

import numpy as np
from numpy.polynomial import polynomial as P

# int_{-1}^{1} exp(-1/(1-v^2)) dv to 30 digits (mpmath, 50-digit precision)
BUMP_MASS = 0.443993816168079437823048921171

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(48)


@lru_cache(maxsize=None)
def _bump_poly(n: int) -> np.ndarray:
    """P_n with bump^(n)(v) = bump(v) P_n(v) / (1-v^2)^(2n)."""
    if n == 0:
        return np.array([1.0])
    prev = _bump_poly(n - 1)
    m = n - 1
    w = np.array([1.0, 0.0, -1.0])  # 1 - v^2
    term1 = P.polymul(P.polymul(w, w), P.polyder(prev)) if len(prev) > 1 else np.zeros(1)
    term2 = P.polymul(np.array([0.0, 4.0 * m]), P.polymul(w, prev))
    term3 = P.polymul(np.array([0.0, -2.0]), prev)
    out = P.polyadd(P.polyadd(term1, term2), term3)
    return out


def bump_derivative(v, n: int) -> np.ndarray:
    """n-th derivative of exp(-1/(1-v^2)) (zero outside (-1, 1))."""
    v = np.asarray(v, dtype=float)
    out = np.zeros_like(v)
    inside = np.abs(v) < 1
    vi = v[inside]
    w = 1.0 - vi * vi
    with np.errstate(divide="ignore", under="ignore"):
        logmag = -1.0 / w - 2 * n * np.log(w)
        out[inside] = np.exp(logmag) * P.polyval(vi, _bump_poly(n))
    return out


def _step_value(t: np.ndarray) -> np.ndarray:
    # value on [0, 1/2] by Gauss-Legendre; the upper half by S(t) = 1 - S(1-t)
    lo = np.minimum(t, 1.0 - t)
    b = 2.0 * lo - 1.0  # upper limit in [-1, 0]
    half = 0.5 * (b + 1.0)
    v = half[..., None] * _GL_NODES + 0.5 * (b[..., None] - 1.0)
    acc = half * np.sum(_GL_WEIGHTS * bump_derivative(v, 0), axis=-1) / BUMP_MASS
    return np.where(t <= 0.5, acc, 1.0 - acc)


def smooth_step(t, order: int = 0) -> np.ndarray:
    """Derivatives 0..order of the step; array of shape (order+1, *t.shape)."""
    t0 = np.asarray(t, dtype=float)
    t = np.atleast_1d(t0)
    out = np.zeros((order + 1,) + t.shape)
    inside = (t > 0) & (t < 1)
    out[0] = np.where(t >= 1, 1.0, 0.0)
    if np.any(inside):
        ti = t[inside]
        out[0][inside] = np.clip(_step_value(ti), 0.0, 1.0)
        v = 2.0 * ti - 1.0
        for k in range(1, order + 1):
            out[k][inside] = 2.0**k * bump_derivative(v, k - 1) / BUMP_MASS
    return out.reshape((order + 1,) + t0.shape)


def _even_transition(u, start, width, order, falling):
    """g(u) = S((|u|-start)/width) (or 1 - that) with derivatives in u."""
    u = np.asarray(u, dtype=float)
    s = smooth_step((np.abs(u) - start) / width, order)
    sgn = np.where(u < 0, -1.0, 1.0)
    out = np.empty_like(s)
    for k in range(order + 1):
        out[k] = s[k] * (sgn**k) / width**k
    if falling:
        out = -out
        out[0] += 1.0
    return out


def omega(xi, R_ap: float = 2.0, sign_ap: int = 1, p: int = 3, order: int = 0) -> np.ndarray:
    """Frequency switch: 0 on |xi| <= 1 and -sign_ap * sgn(xi)^(p-1) beyond R_ap.

    The sgn(xi)^(p-1) factor keeps -a_p (d/dxi xi^p) omega positive for even p.
    Returns derivatives 0..order stacked on the first axis.
    """
    xi = np.asarray(xi, dtype=float)
    base = _even_transition(xi, 1.0, R_ap - 1.0, order, falling=False)
    sign = -float(np.sign(sign_ap)) * (np.where(xi < 0, -1.0, 1.0) ** (p - 1))
    return base * sign


def psi(y, order: int = 0) -> np.ndarray:
    """Support cutoff: 1 on |y| <= 1/2, 0 on |y| >= 1; derivatives stacked."""
    return _even_transition(y, 0.5, 0.5, order, falling=True)


def window(u, flat: float, edge: float, order: int = 0) -> np.ndarray:
    """Even window: 1 on |u| <= flat, 0 on |u| >= edge; derivatives stacked."""
    if not 0 < flat < edge:
        raise ValueError("window needs 0 < flat < edge")
    return _even_transition(u, flat, edge - flat, order, falling=True)


def gevrey_fit(derivs: np.ndarray, mu: float, kmax: int = 4) -> dict:
    """Smallest C with sup|f^(k)| <= C^(k+1) k!^mu for k = 1..kmax.

    ``derivs`` are derivative samples stacked on the first axis.
    """
    per_order = {}
    for k in range(1, min(kmax, derivs.shape[0] - 1) + 1):
        sup = float(np.max(np.abs(derivs[k])))
        per_order[k] = (sup / factorial(k) ** mu) ** (1.0 / (k + 1))
    return {"per_order": per_order, "C": max(per_order.values()) if per_order else 0.0}
