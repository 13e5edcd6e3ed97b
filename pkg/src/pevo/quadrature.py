"""Batched adaptive Simpson quadrature.

Many independent intervals are refined together: each pass evaluates the
integrand once on every still-active half interval, so a Python-level loop
runs only ``depth`` times regardless of how many integrals are requested.
"""

from __future__ import annotations

import numpy as np


class QuadratureError(RuntimeError):
    pass


def adaptive_simpson(f, a, b, tol=1e-10, max_depth=40):
    """Integrate ``f`` over each [a_i, b_i].

    ``f(y, owner)`` receives abscissae and the index of the interval each
    belongs to and returns values of shape (len(y), m).  ``tol`` is the
    absolute tolerance per interval (componentwise).  Returns an (n, m) array.
    """
    a = np.asarray(a, dtype=float).ravel()
    b = np.asarray(b, dtype=float).ravel()
    n = a.size
    owner = np.arange(n)
    m = 0.5 * (a + b)
    ys = np.concatenate([a, m, b])
    vals = f(ys, np.concatenate([owner, owner, owner]))
    vals = np.asarray(vals)
    if vals.ndim == 1:
        vals = vals[:, None]
    fa, fm, fb = vals[:n], vals[n : 2 * n], vals[2 * n :]
    whole = ((b - a) / 6.0)[:, None] * (fa + 4 * fm + fb)
    result = np.zeros((n, vals.shape[1]), dtype=vals.dtype)
    eps = np.full(n, float(tol))

    for depth in range(max_depth + 1):
        if a.size == 0:
            return result
        lm = 0.5 * (a + m)
        rm = 0.5 * (m + b)
        k = a.size
        v = np.asarray(f(np.concatenate([lm, rm]), np.concatenate([owner, owner])))
        if v.ndim == 1:
            v = v[:, None]
        flm, frm = v[:k], v[k:]
        left = ((m - a) / 6.0)[:, None] * (fa + 4 * flm + fm)
        right = ((b - m) / 6.0)[:, None] * (fm + 4 * frm + fb)
        delta = left + right - whole
        err = np.max(np.abs(delta), axis=1)
        done = err <= 15.0 * eps
        if depth == max_depth and not np.all(done):
            worst = int(np.argmax(err))
            raise QuadratureError(
                f"adaptive Simpson did not converge on [{a[worst]:.6g}, {b[worst]:.6g}] "
                f"(error estimate {err[worst]:.3g} > {15 * eps[worst]:.3g})"
            )
        if np.any(done):
            np.add.at(result, owner[done], (left + right + delta / 15.0)[done])
        keep = ~done
        if not np.any(keep):
            return result
        # split every unfinished interval into its two halves
        a_k, m_k, b_k = a[keep], m[keep], b[keep]
        a = np.concatenate([a_k, m_k])
        b = np.concatenate([m_k, b_k])
        m = np.concatenate([lm[keep], rm[keep]])
        fa_new = np.concatenate([fa[keep], fm[keep]])
        fm_new = np.concatenate([flm[keep], frm[keep]])
        fb_new = np.concatenate([fm[keep], fb[keep]])
        fa, fm, fb = fa_new, fm_new, fb_new
        whole = np.concatenate([left[keep], right[keep]])
        owner = np.concatenate([owner[keep], owner[keep]])
        eps = np.concatenate([eps[keep], eps[keep]]) * 0.5
    return result


def cumulative_simpson(f, nodes, tol=1e-10, max_depth=40):
    """Integrals from nodes[0] to each node (nodes sorted ascending).

    The tolerance is split over the cells so the accumulated error stays
    within ``tol``.
    """
    nodes = np.asarray(nodes, dtype=float)
    if nodes.size < 2:
        probe = np.asarray(f(nodes[:1], np.zeros(1, dtype=int)))
        width = 1 if probe.ndim == 1 else probe.shape[1]
        return np.zeros((nodes.size, width))
    cells = adaptive_simpson(f, nodes[:-1], nodes[1:], tol / (nodes.size - 1), max_depth)
    out = np.zeros((nodes.size, cells.shape[1]), dtype=cells.dtype)
    out[1:] = np.cumsum(cells, axis=0)
    return out
