"""Truncated bivariate Taylor arithmetic with an optional bookkeeping grade.

A :class:`Jet` stores, for every sample point, the normalized Taylor
coefficients

    c[g, a, b] = eps^g part of  d_x^a d_xi^b f / (a! b!)

of a function f(x, xi) around that point.  The grade axis ``g`` is a formal
small parameter used to sort terms of an asymptotic expansion by level.

Validity.  A slot (g, a, b) is kept iff a + g <= nx, b + g <= nxi and
a + b <= tot.  The rule "one more level costs one derivative in each
direction" is what makes truncated products exact: every valid output slot
only ever reads valid input slots.  Invalid slots are held at zero.
"""

from __future__ import annotations

from math import factorial

import numpy as np


class Jet:
    __slots__ = ("c", "nx", "nxi", "tot", "_mask")

    def __init__(self, c, nx: int, nxi: int, tot: int | None = None, copy: bool = True):
        c = np.asarray(c)
        if c.ndim < 3 or c.shape[1] != nx + 1 or c.shape[2] != nxi + 1:
            raise ValueError(f"coefficient shape {c.shape} does not match orders ({nx}, {nxi})")
        self.nx = nx
        self.nxi = nxi
        self.tot = nx + nxi if tot is None else min(tot, nx + nxi)
        self._mask = _mask(c.shape[0], nx, nxi, self.tot)
        if c.dtype.kind not in "fc":
            c = c.astype(float)
        elif copy:
            c = c.copy()
        c[~self._mask] = 0
        self.c = c

    # -- construction ---------------------------------------------------
    @property
    def ng(self) -> int:
        return self.c.shape[0]

    @property
    def pshape(self) -> tuple:
        return self.c.shape[3:]

    @classmethod
    def zeros(cls, nx, nxi, pshape=(), ng=1, tot=None, dtype=float):
        return cls(np.zeros((ng, nx + 1, nxi + 1) + tuple(pshape), dtype=dtype), nx, nxi, tot)

    @classmethod
    def constant(cls, value, nx, nxi, ng=1, tot=None, grade=0):
        value = np.asarray(value)
        j = cls.zeros(nx, nxi, value.shape, ng, tot, dtype=np.result_type(value, float))
        if _valid(grade, 0, 0, nx, nxi, j.tot):
            j.c[grade, 0, 0] = value
        return j

    @classmethod
    def coordinate_x(cls, x, nx, nxi, ng=1, tot=None):
        x = np.asarray(x, dtype=float)
        j = cls.zeros(nx, nxi, x.shape, ng, tot)
        j.c[0, 0, 0] = x
        if nx >= 1 and j.tot >= 1:
            j.c[0, 1, 0] = 1.0
        return j

    @classmethod
    def coordinate_xi(cls, xi, nx, nxi, ng=1, tot=None):
        xi = np.asarray(xi, dtype=float)
        j = cls.zeros(nx, nxi, xi.shape, ng, tot)
        j.c[0, 0, 0] = xi
        if nxi >= 1 and j.tot >= 1:
            j.c[0, 0, 1] = 1.0
        return j

    @classmethod
    def from_x_derivatives(cls, derivs, nx, nxi, ng=1, tot=None):
        """Jet of a function of x alone, from [f, f', f'', ...] arrays."""
        derivs = [np.asarray(d) for d in derivs]
        shape = np.broadcast_shapes(*(d.shape for d in derivs))
        dt = np.result_type(*derivs, float)
        j = cls.zeros(nx, nxi, shape, ng, tot, dtype=dt)
        for a in range(min(nx, j.tot) + 1):
            if a < len(derivs):
                j.c[0, a, 0] = derivs[a] / factorial(a)
        return j

    @classmethod
    def from_xi_derivatives(cls, derivs, nx, nxi, ng=1, tot=None):
        derivs = [np.asarray(d) for d in derivs]
        shape = np.broadcast_shapes(*(d.shape for d in derivs))
        dt = np.result_type(*derivs, float)
        j = cls.zeros(nx, nxi, shape, ng, tot, dtype=dt)
        for b in range(min(nxi, j.tot) + 1):
            if b < len(derivs):
                j.c[0, 0, b] = derivs[b] / factorial(b)
        return j

    def copy(self) -> "Jet":
        return Jet(self.c, self.nx, self.nxi, self.tot)

    def like(self, c) -> "Jet":
        return Jet(c, self.nx, self.nxi, self.tot)

    # -- access ---------------------------------------------------------
    @property
    def value(self) -> np.ndarray:
        """Grade-summed point values."""
        return self.c[:, 0, 0].sum(axis=0)

    def derivative(self, a: int, b: int, grade: int | None = None) -> np.ndarray:
        """d_x^a d_xi^b at the base points (summed over grades unless given)."""
        if a > self.nx or b > self.nxi:
            raise ValueError(f"derivative ({a}, {b}) exceeds jet orders ({self.nx}, {self.nxi})")
        s = self.c[:, a, b] if grade is None else self.c[grade, a, b]
        if grade is None:
            s = s.sum(axis=0)
        return s * (factorial(a) * factorial(b))

    def grade(self, g: int) -> "Jet":
        """Ungraded jet of the eps^g slot (keeps that slot's available orders)."""
        nx, nxi = self.nx - g, self.nxi - g
        tot = max(self.tot - 0, 0)
        c = self.c[g : g + 1, : nx + 1, : nxi + 1]
        return Jet(c, nx, nxi, min(tot, nx + nxi))

    def at_grade(self, g: int, ng: int) -> "Jet":
        """Place an ungraded jet in slot g of an ng-graded jet."""
        if self.ng != 1:
            raise ValueError("at_grade expects an ungraded jet")
        c = np.zeros((ng,) + self.c.shape[1:], dtype=self.c.dtype)
        if g < ng:
            c[g] = self.c[0]
        return Jet(c, self.nx, self.nxi, self.tot)

    # -- arithmetic -----------------------------------------------------
    def _coerce(self, other):
        if isinstance(other, Jet):
            if (other.nx, other.nxi, other.ng) != (self.nx, self.nxi, self.ng):
                raise ValueError("jet shapes differ")
            return other
        return None

    def __add__(self, other):
        o = self._coerce(other)
        if o is None:
            c = self.c.astype(np.result_type(self.c, np.asarray(other)), copy=True)
            shape = np.broadcast_shapes(c.shape[3:], np.shape(other))
            c = np.broadcast_to(c, c.shape[:3] + shape).copy()
            c[0, 0, 0] = c[0, 0, 0] + other
            return self.like(c)
        return Jet(_bsum(self.c, o.c), self.nx, self.nxi, min(self.tot, o.tot), copy=False)

    __radd__ = __add__

    def __neg__(self):
        return self.like(-self.c)

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        o = self._coerce(other)
        if o is None:
            return self.like(self.c * np.asarray(other))
        return _multiply(self, o)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, Jet):
            return self * other.power(-1.0)
        return self.like(self.c / np.asarray(other))

    def diff(self, a: int = 0, b: int = 0, grade_shift: int = 0) -> "Jet":
        """Jet of d_x^a d_xi^b f, optionally moved up by grade_shift levels."""
        ng, nx, nxi = self.ng, self.nx, self.nxi
        c = np.zeros_like(self.c)
        for g in range(ng - grade_shift):
            for i in range(nx + 1 - a):
                for j in range(nxi + 1 - b):
                    w = (factorial(i + a) // factorial(i)) * (factorial(j + b) // factorial(j))
                    c[g + grade_shift, i, j] = w * self.c[g, i + a, j + b]
        return Jet(c, self.nx, self.nxi, self.tot, copy=False)

    def compose(self, derivs) -> "Jet":
        """f(self) given derivs[k] = f^(k)(value at grade 0) for k = 0.."""
        u0 = self.c[0, 0, 0]
        delta = self - u0
        kmax = min(len(derivs) - 1, self.tot + (self.ng - 1))
        base = np.broadcast_to(np.asarray(derivs[0]), np.shape(u0))
        out = Jet.constant(base, self.nx, self.nxi, self.ng, self.tot)
        out = out + 0 * delta  # dtype of the argument
        term = None
        for k in range(1, kmax + 1):
            term = delta if term is None else term * delta
            out = out + term * (np.asarray(derivs[k]) / factorial(k))
        return out

    def exp_shifted(self) -> "Jet":
        """exp(f - f_0) where f_0 is the grade-0 base value."""
        kmax = self.tot + (self.ng - 1)
        return self.compose([1.0] * (kmax + 1))

    def power(self, r: float) -> "Jet":
        u0 = np.asarray(self.c[0, 0, 0], dtype=float)
        kmax = self.tot + (self.ng - 1)
        derivs, coef = [], 1.0
        for k in range(kmax + 1):
            derivs.append(coef * u0 ** (r - k))
            coef *= r - k
        return self.compose(derivs)

    def sqrt(self) -> "Jet":
        return self.power(0.5)

    def conj(self) -> "Jet":
        return self.like(np.conj(self.c))

    @property
    def real(self) -> "Jet":
        return self.like(self.c.real)

    def __repr__(self):
        return f"Jet(ng={self.ng}, nx={self.nx}, nxi={self.nxi}, tot={self.tot}, points={self.pshape})"


# -- helpers ---------------------------------------------------------------

_MASKS: dict = {}


def _valid(g, a, b, nx, nxi, tot):
    return a + g <= nx and b + g <= nxi and a + b <= tot


def _mask(ng, nx, nxi, tot):
    key = (ng, nx, nxi, tot)
    m = _MASKS.get(key)
    if m is None:
        g = np.arange(ng)[:, None, None]
        a = np.arange(nx + 1)[None, :, None]
        b = np.arange(nxi + 1)[None, None, :]
        m = (a + g <= nx) & (b + g <= nxi) & (a + b <= tot)
        _MASKS[key] = m
    return m


def _bsum(c1, c2):
    shape = np.broadcast_shapes(c1.shape, c2.shape)
    out = np.zeros(shape, dtype=np.result_type(c1, c2))
    out += c1
    out += c2
    return out


def _multiply(p: Jet, q: Jet) -> Jet:
    ng, nx, nxi = p.ng, p.nx, p.nxi
    tot = min(p.tot, q.tot)
    mask = _mask(ng, nx, nxi, tot)
    pshape = np.broadcast_shapes(p.pshape, q.pshape)
    out = np.zeros((ng, nx + 1, nxi + 1) + pshape, dtype=np.result_type(p.c, q.c))
    for g1 in range(ng):
        for a1 in range(nx + 1):
            for b1 in range(nxi + 1):
                if not mask[g1, a1, b1]:
                    continue
                s = p.c[g1, a1, b1]
                if not np.any(s):
                    continue
                out[g1:, a1:, b1:] += s * q.c[: ng - g1, : nx + 1 - a1, : nxi + 1 - b1]
    return Jet(out, nx, nxi, tot, copy=False)
