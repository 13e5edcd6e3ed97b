# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled direct sums for left/reverse quantization.

Phases exp(i x_i xi_j) are read from a table of N-th roots of unity indexed
by (i * n) mod N, so the inner loops contain no transcendental calls.
"""

import numpy as np
cimport numpy as cnp

ctypedef double complex cplx


def roots_of_unity(Py_ssize_t N):
    return np.exp(2j * np.pi * np.arange(N) / N)


def left_apply(const cplx[:, ::1] P, const cplx[::1] s, const cplx[::1] root):
    """out_i = sum_j root[(i n_j) mod N] P_ij s_j with n_j = j - N/2."""
    cdef Py_ssize_t N = P.shape[0], i, j, m, start
    cdef cplx acc
    out = np.empty(N, dtype=np.complex128)
    cdef cplx[::1] o = out
    for i in range(N):
        start = (i * (N - N // 2)) % N  # i * (-N/2) mod N
        m = start
        acc = 0
        for j in range(N):
            acc = acc + root[m] * P[i, j] * s[j]
            m += i
            if m >= N:
                m -= N
        o[i] = acc
    return out


def reverse_apply(const cplx[:, ::1] P, const cplx[::1] u, const cplx[::1] root):
    """w_j = sum_i conj(root[(i n_j) mod N]) P_ij u_i."""
    cdef Py_ssize_t N = P.shape[0], i, j, m
    cdef cplx ui, r
    w = np.zeros(N, dtype=np.complex128)
    cdef cplx[::1] wv = w
    for i in range(N):
        ui = u[i]
        m = (i * (N - N // 2)) % N
        for j in range(N):
            r = root[m]
            wv[j] = wv[j] + (r.real - 1j * r.imag) * P[i, j] * ui
            m += i
            if m >= N:
                m -= N
    return w


def assemble(const cplx[:, ::1] P, int sign, const cplx[::1] root):
    """B_ik = (1/N) sum_n P[i, n] root[(sign n (i - k)) mod N]."""
    cdef Py_ssize_t N = P.shape[0], i, k, j, m, d
    cdef cplx acc
    cdef double inv = 1.0 / N
    out = np.empty((N, N), dtype=np.complex128)
    cdef cplx[:, ::1] o = out
    for i in range(N):
        for k in range(N):
            d = (sign * (i - k)) % N
            if d < 0:
                d += N
            m = (d * (N - N // 2)) % N
            acc = 0
            for j in range(N):
                acc = acc + P[i, j] * root[m]
                m += d
                if m >= N:
                    m -= N
            o[i, k] = acc * inv
    return out
