"""numpy fallback with the same interface as the compiled kernels."""

import numpy as np


def roots_of_unity(N):
    return np.exp(2j * np.pi * np.arange(N) / N)


def _phases(N, root):
    i = np.arange(N)[:, None]
    n = np.arange(N)[None, :] - N // 2
    return root[np.mod(i * n, N)]


def left_apply(P, s, root):
    return np.einsum("ij,ij,j->i", _phases(P.shape[0], root), P, s)


def reverse_apply(P, u, root):
    return np.einsum("ij,ij,i->j", np.conj(_phases(P.shape[0], root)), P, u)


def assemble(P, sign, root):
    N = P.shape[0]
    W = _phases(N, root)
    if sign > 0:
        return (P * W) @ np.conj(W).T / N
    return (P * np.conj(W)) @ W.T / N
