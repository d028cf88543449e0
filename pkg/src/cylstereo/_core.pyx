# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled kernels for the O(n*m) sums over observations and grid points.

Every function here has a numpy twin in ``_core_py`` with the same
signature; ``cylstereo.kernels`` picks one at import time.  Kind codes:
0 squared radius, 1 aspect ratio, 2 surface area, 3 volume.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt, atan2, M_PI

cnp.import_array()

cdef double TWO_PI = 2.0 * M_PI


cdef inline double q_val(int kind, double h, double t) noexcept nogil:
    cdef double s, half, root
    if kind == 0:
        return t
    elif kind == 1:
        return (h * t) * (h * t)
    elif kind == 2:
        s = t / TWO_PI
        half = 0.5 * h
        root = sqrt(half * half + s)
        if 4.0 * s < h * h:
            s = s / (root + half)
        else:
            s = root - half
        return s * s
    return t / (M_PI * h)


cdef inline double p_val(int kind, double h, double u) noexcept nogil:
    if kind == 0:
        return u
    elif kind == 1:
        return sqrt(u) / h
    elif kind == 2:
        return TWO_PI * (u + h * sqrt(u))
    return M_PI * h * u


cdef inline double u_term(int kind, double z, double h, double w) noexcept nogil:
    # integral of (z - u)^(-1/2) * p'(h; u) over [0, w], 0 <= w <= z
    cdef double rd = sqrt(z - w)
    cdef double base = w / (sqrt(z) + rd)
    if kind == 0:
        return 2.0 * base
    elif kind == 3:
        return 2.0 * M_PI * h * base
    elif kind == 1:
        return atan2(sqrt(w), rd) / h
    return 4.0 * M_PI * base + 2.0 * M_PI * h * atan2(sqrt(w), rd)


cdef inline void neumaier(double x, double* s, double* c) noexcept nogil:
    cdef double t = s[0] + x
    if (s[0] if s[0] >= 0 else -s[0]) >= (x if x >= 0 else -x):
        c[0] += (s[0] - t) + x
    else:
        c[0] += (x - t) + s[0]
    s[0] = t


def poles(const double[::1] z, const double[::1] h, int kind):
    cdef Py_ssize_t i, n = z.shape[0]
    out = np.empty(n, dtype=np.float64)
    cdef double[::1] o = out
    for i in range(n):
        o[i] = p_val(kind, h[i], z[i])
    return out


def un_grid(const double[::1] z, const double[::1] h, int kind, const double[::1] t):
    """Integrated plug-in estimator U_n at every grid point (closed form)."""
    cdef Py_ssize_t n = z.shape[0], m = t.shape[0]
    cdef Py_ssize_t i, j, k, idx
    cdef double s, c, tk, w, q

    p_all = poles(z, h, kind)
    order = np.argsort(p_all, kind="stable")
    zs_a = np.ascontiguousarray(np.asarray(z)[order])
    hs_a = np.ascontiguousarray(np.asarray(h)[order])
    ps_a = np.ascontiguousarray(p_all[order])
    cdef double[::1] zs = zs_a
    cdef double[::1] hs = hs_a
    cdef double[::1] ps = ps_a

    # completed terms: prefix sums of the full per-term integrals
    pref_a = np.empty(n + 1, dtype=np.float64)
    cdef double[::1] pref = pref_a
    s = 0.0
    c = 0.0
    pref[0] = 0.0
    for i in range(n):
        neumaier(u_term(kind, zs[i], hs[i], zs[i]), &s, &c)
        pref[i + 1] = s + c

    torder_a = np.argsort(np.asarray(t), kind="stable").astype(np.intp)
    cdef Py_ssize_t[::1] torder = torder_a
    out = np.empty(m, dtype=np.float64)
    cdef double[::1] o = out

    j = 0
    with nogil:
        for k in range(m):
            idx = torder[k]
            tk = t[idx]
            while j < n and ps[j] <= tk:
                j += 1
            s = pref[j]
            c = 0.0
            for i in range(j, n):
                q = q_val(kind, hs[i], tk)
                w = q if q < zs[i] else zs[i]
                neumaier(u_term(kind, zs[i], hs[i], w), &s, &c)
            o[idx] = (s + c) / n
    return out


def ntilde_grid(const double[::1] z, const double[::1] h, int kind, const double[::1] t):
    """Plug-in estimator at every grid point; second output counts exact poles."""
    cdef Py_ssize_t n = z.shape[0], m = t.shape[0]
    cdef Py_ssize_t i, k
    cdef double s, c, tk, d, pi
    cdef long cnt
    out = np.empty(m, dtype=np.float64)
    hits = np.zeros(m, dtype=np.int64)
    cdef double[::1] o = out
    cdef long long[::1] hv = hits
    p_all = poles(z, h, kind)
    cdef double[::1] p = p_all
    with nogil:
        for k in range(m):
            tk = t[k]
            s = 0.0
            c = 0.0
            cnt = 0
            for i in range(n):
                pi = p[i]
                if tk > pi:
                    continue
                d = z[i] - q_val(kind, h[i], tk)
                if tk == pi or d <= 0.0:
                    cnt += 1
                    continue
                neumaier(1.0 / sqrt(d), &s, &c)
            o[k] = (s + c) / n
            hv[k] = cnt
    return out, hits


def window_count_grid(const double[::1] z, const double[::1] h, int kind,
                      const double[::1] t, double b):
    """Number of observations with |z_i - q(h_i; t)| <= b, per grid point."""
    cdef Py_ssize_t n = z.shape[0], m = t.shape[0]
    cdef Py_ssize_t i, k
    cdef double tk, d
    cdef long cnt
    out = np.zeros(m, dtype=np.int64)
    cdef long long[::1] o = out
    with nogil:
        for k in range(m):
            tk = t[k]
            cnt = 0
            for i in range(n):
                d = z[i] - q_val(kind, h[i], tk)
                if -b <= d <= b:
                    cnt += 1
            o[k] = cnt
    return out


def upper_hull(const double[::1] t, const double[::1] u):
    """Indices of the upper convex hull of (t, u); t strictly increasing."""
    cdef Py_ssize_t m = t.shape[0], i, top = 0, a, b
    stack_a = np.empty(m, dtype=np.intp)
    cdef Py_ssize_t[::1] st = stack_a
    with nogil:
        for i in range(m):
            while top >= 2:
                a = st[top - 2]
                b = st[top - 1]
                if (u[b] - u[a]) * (t[i] - t[a]) <= (u[i] - u[a]) * (t[b] - t[a]):
                    top -= 1
                else:
                    break
            st[top] = i
            top += 1
    return stack_a[:top].copy()
