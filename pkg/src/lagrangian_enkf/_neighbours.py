"""Cell-list Gaussian sums for free-space 2D particle sets.

Summation order is fixed by a stable sort of the sources, so results do
not depend on how callers schedule work across threads.
"""

import numpy as np
from numba import njit

_INV_2PI = 1.0 / (2.0 * np.pi)


@njit(cache=True, nogil=True)
def _cells(src, rc):
    n = src.shape[0]
    x0 = src[0, 0]
    y0 = src[0, 1]
    x1 = x0
    y1 = y0
    for i in range(n):
        x0 = min(x0, src[i, 0])
        x1 = max(x1, src[i, 0])
        y0 = min(y0, src[i, 1])
        y1 = max(y1, src[i, 1])
    nx = int((x1 - x0) / rc) + 1
    ny = int((y1 - y0) / rc) + 1
    cid = np.empty(n, np.int64)
    for i in range(n):
        cx = min(int((src[i, 0] - x0) / rc), nx - 1)
        cy = min(int((src[i, 1] - y0) / rc), ny - 1)
        cid[i] = cx * ny + cy
    order = np.argsort(cid, kind="mergesort")
    start = np.zeros(nx * ny + 1, np.int64)
    for i in range(n):
        start[cid[i] + 1] += 1
    for c in range(nx * ny):
        start[c + 1] += start[c]
    return order, start, x0, y0, nx, ny


@njit(cache=True, nogil=True, fastmath=True)
def gaussian_sum_2d(targets, src, weights, eps, rc):
    """``out[t] = sum_j weights[j] * phi_eps(targets[t] - src[j])`` truncated at ``rc``."""
    nt = targets.shape[0]
    out = np.zeros(nt)
    if src.shape[0] == 0 or nt == 0:
        return out
    order, start, x0, y0, nx, ny = _cells(src, rc)
    rc2 = rc * rc
    a = 0.5 / (eps * eps)
    norm = _INV_2PI / (eps * eps)
    for t in range(nt):
        tx = targets[t, 0]
        ty = targets[t, 1]
        cx = int(np.floor((tx - x0) / rc))
        cy = int(np.floor((ty - y0) / rc))
        acc = 0.0
        for ix in range(max(cx - 1, 0), min(cx + 2, nx)):
            for iy in range(max(cy - 1, 0), min(cy + 2, ny)):
                c = ix * ny + iy
                for k in range(start[c], start[c + 1]):
                    j = order[k]
                    dx = tx - src[j, 0]
                    dy = ty - src[j, 1]
                    r2 = dx * dx + dy * dy
                    if r2 < rc2:
                        acc += weights[j] * np.exp(-a * r2)
        out[t] = acc * norm
    return out


@njit(cache=True, nogil=True, fastmath=True)
def pse_exchange_2d(pos, strengths, volumes, eps, rc, eta_norm):
    """``sum_q (V_p G_q - V_q G_p) eta_eps(x_p - x_q)`` for every particle ``p``.

    Each pair is visited once and its exchange added to ``p`` and
    subtracted from ``q``, so the total is conserved to round-off.
    """
    n = pos.shape[0]
    out = np.zeros(n)
    if n == 0:
        return out
    order, start, x0, y0, nx, ny = _cells(pos, rc)
    # cell-sorted copies keep the inner loop on contiguous memory
    xs = np.empty(n)
    ys = np.empty(n)
    gs = np.empty(n)
    vs = np.empty(n)
    for k in range(n):
        j = order[k]
        xs[k] = pos[j, 0]
        ys[k] = pos[j, 1]
        gs[k] = strengths[j]
        vs[k] = volumes[j]
    acc = np.zeros(n)
    rc2 = rc * rc
    a = 0.5 / (eps * eps)
    norm = eta_norm * _INV_2PI / (eps * eps)
    for cx in range(nx):
        for cy in range(ny):
            c = cx * ny + cy
            for p in range(start[c], start[c + 1]):
                px = xs[p]
                py = ys[p]
                for ix in range(max(cx - 1, 0), min(cx + 2, nx)):
                    for iy in range(max(cy - 1, 0), min(cy + 2, ny)):
                        c2 = ix * ny + iy
                        lo = max(start[c2], p + 1)
                        for q in range(lo, start[c2 + 1]):
                            dx = px - xs[q]
                            dy = py - ys[q]
                            r2 = dx * dx + dy * dy
                            if r2 < rc2:
                                ex = (vs[p] * gs[q] - vs[q] * gs[p]) * np.exp(-a * r2)
                                acc[p] += ex
                                acc[q] -= ex
    for k in range(n):
        out[order[k]] = acc[k] * norm
    return out


@njit(cache=True, nogil=True, inline="always")
def _m4(a):
    a = abs(a)
    if a < 1.0:
        return 1.0 - 2.5 * a * a + 1.5 * a * a * a
    if a < 2.0:
        return 0.5 * (2.0 - a) * (2.0 - a) * (1.0 - a)
    return 0.0


@njit(cache=True, nogil=True)
def m4_assign_2d(pos, weights, x0, y0, h, nx, ny):
    """M4' assignment on an ``nx x ny`` node box; nodes beyond the box are clamped onto it."""
    out = np.zeros((nx, ny))
    for p in range(pos.shape[0]):
        rx = (pos[p, 0] - x0) / h
        ry = (pos[p, 1] - y0) / h
        ix = int(np.floor(rx))
        iy = int(np.floor(ry))
        for a in range(ix - 1, ix + 3):
            wx = _m4(rx - a)
            if wx == 0.0:
                continue
            ca = min(max(a, 0), nx - 1)
            for b in range(iy - 1, iy + 3):
                wy = _m4(ry - b)
                if wy == 0.0:
                    continue
                cb = min(max(b, 0), ny - 1)
                out[ca, cb] += weights[p] * wx * wy
    return out


@njit(cache=True, nogil=True)
def m4_interp_2d(pts, f, g, x0, y0, h):
    """M4' interpolation of two nodal fields; nodes outside the array contribute nothing."""
    nx, ny = f.shape
    out = np.zeros((pts.shape[0], 2))
    for p in range(pts.shape[0]):
        rx = (pts[p, 0] - x0) / h
        ry = (pts[p, 1] - y0) / h
        ix = int(np.floor(rx))
        iy = int(np.floor(ry))
        sf = 0.0
        sg = 0.0
        for a in range(max(ix - 1, 0), min(ix + 3, nx)):
            wx = _m4(rx - a)
            for b in range(max(iy - 1, 0), min(iy + 3, ny)):
                wxy = wx * _m4(ry - b)
                sf += f[a, b] * wxy
                sg += g[a, b] * wxy
        out[p, 0] = sf
        out[p, 1] = sg
    return out
