"""Pure numpy versions of the kernels in ``_core.pyx``.

Same signatures and conventions; used when the extension is not built or
when ``CYLSTEREO_PURE_PYTHON=1`` is set.
"""

import math

import numpy as np

TWO_PI = 2.0 * math.pi
_CHUNK = 1 << 20  # max elements of an (m, n) block held at once


def _q(kind, h, t):
    if kind == 0:
        return np.broadcast_to(t, np.broadcast(h, t).shape)
    if kind == 1:
        return (h * t) * (h * t)
    if kind == 2:
        s = t / TWO_PI
        half = 0.5 * h
        root = np.sqrt(half * half + s)
        r = np.where(4.0 * s < h * h, s / (root + half), root - half)
        return r * r
    return t / (math.pi * h)


def _u_term(kind, z, h, w):
    rd = np.sqrt(z - w)
    base = w / (np.sqrt(z) + rd)
    if kind == 0:
        return 2.0 * base
    if kind == 3:
        return 2.0 * math.pi * h * base
    if kind == 1:
        return np.arctan2(np.sqrt(w), rd) / h
    return 4.0 * math.pi * base + 2.0 * math.pi * h * np.arctan2(np.sqrt(w), rd)


def _blocks(n, m):
    step = max(1, _CHUNK // max(n, 1))
    for start in range(0, m, step):
        yield slice(start, min(m, start + step))


def poles(z, h, kind):
    z = np.asarray(z, dtype=float)
    h = np.asarray(h, dtype=float)
    if kind == 0:
        return z.copy()
    if kind == 1:
        return np.sqrt(z) / h
    if kind == 2:
        return TWO_PI * (z + h * np.sqrt(z))
    return math.pi * h * z


def un_grid(z, h, kind, t):
    z = np.ascontiguousarray(z, dtype=float)
    h = np.ascontiguousarray(h, dtype=float)
    t = np.ascontiguousarray(t, dtype=float)
    p = poles(z, h, kind)
    out = np.empty(t.size)
    for sl in _blocks(z.size, t.size):
        tk = t[sl, None]
        w = np.where(p <= tk, z, np.minimum(_q(kind, h, tk), z))
        out[sl] = np.sum(_u_term(kind, z, h, w), axis=1) / z.size
    return out


def ntilde_grid(z, h, kind, t):
    z = np.ascontiguousarray(z, dtype=float)
    h = np.ascontiguousarray(h, dtype=float)
    t = np.ascontiguousarray(t, dtype=float)
    p = poles(z, h, kind)
    out = np.empty(t.size)
    hits = np.zeros(t.size, dtype=np.int64)
    for sl in _blocks(z.size, t.size):
        tk = t[sl, None]
        d = z - _q(kind, h, tk)
        live = tk <= p
        pole = live & ((tk == p) | (d <= 0))
        active = live & ~pole
        with np.errstate(divide="ignore", invalid="ignore"):
            terms = np.where(active, 1.0 / np.sqrt(np.where(active, d, 1.0)), 0.0)
        out[sl] = np.sum(terms, axis=1) / z.size
        hits[sl] = np.sum(pole, axis=1)
    return out, hits


def window_count_grid(z, h, kind, t, b):
    z = np.ascontiguousarray(z, dtype=float)
    h = np.ascontiguousarray(h, dtype=float)
    t = np.ascontiguousarray(t, dtype=float)
    out = np.empty(t.size, dtype=np.int64)
    for sl in _blocks(z.size, t.size):
        d = z - _q(kind, h, t[sl, None])
        out[sl] = np.sum((d >= -b) & (d <= b), axis=1)
    return out


def upper_hull(t, u):
    t = np.asarray(t, dtype=float)
    u = np.asarray(u, dtype=float)
    st = []
    for i in range(t.size):
        while len(st) >= 2:
            a, b = st[-2], st[-1]
            if (u[b] - u[a]) * (t[i] - t[a]) <= (u[i] - u[a]) * (t[b] - t[a]):
                st.pop()
            else:
                break
        st.append(i)
    return np.asarray(st, dtype=np.intp)
