# cython: boundscheck=False, wraparound=False, cdivision=True
# cython: language_level=3
"""Compiled bound-propagation kernels.

Contracts match ``_fallback.py`` exactly; the compiled versions fuse the
sign-dependent selections into single passes over contiguous float64
arrays instead of materialising masked temporaries.
"""

import numpy as np

from libc.math cimport tanh as c_tanh


def affine_ibp(weight, bias, lb, ub):
    """Interval image of ``x -> weight @ x + bias`` over the box [lb, ub]."""
    cdef const double[:, ::1] w = np.ascontiguousarray(weight, dtype=np.float64)
    cdef const double[::1] bv = np.ascontiguousarray(bias, dtype=np.float64)
    cdef const double[:, ::1] lo = np.ascontiguousarray(lb, dtype=np.float64)
    cdef const double[:, ::1] hi = np.ascontiguousarray(ub, dtype=np.float64)
    cdef Py_ssize_t n = lo.shape[0], cols = lo.shape[1], rows = w.shape[0]
    out_lb = np.empty((n, rows))
    out_ub = np.empty((n, rows))
    cdef double[:, ::1] olb = out_lb
    cdef double[:, ::1] oub = out_ub
    cdef Py_ssize_t b, j, i
    cdef double wj, acc_l, acc_u
    with nogil:
        for b in range(n):
            for j in range(rows):
                acc_l = bv[j]
                acc_u = bv[j]
                for i in range(cols):
                    wj = w[j, i]
                    if wj >= 0.0:
                        acc_l += wj * lo[b, i]
                        acc_u += wj * hi[b, i]
                    else:
                        acc_l += wj * hi[b, i]
                        acc_u += wj * lo[b, i]
                olb[b, j] = acc_l
                oub[b, j] = acc_u
    return out_lb, out_ub


def relu_relaxation(lb, ub):
    """Linear relaxation of ReLU over per-element intervals."""
    cdef const double[:, ::1] lo = np.ascontiguousarray(lb, dtype=np.float64)
    cdef const double[:, ::1] hi = np.ascontiguousarray(ub, dtype=np.float64)
    cdef Py_ssize_t n = lo.shape[0], d = lo.shape[1]
    slope_l = np.empty((n, d))
    icpt_l = np.zeros((n, d))
    slope_u = np.empty((n, d))
    icpt_u = np.empty((n, d))
    cdef double[:, ::1] sl = slope_l
    cdef double[:, ::1] il = icpt_l
    cdef double[:, ::1] su = slope_u
    cdef double[:, ::1] iu = icpt_u
    cdef Py_ssize_t b, i
    cdef double l, u, s
    with nogil:
        for b in range(n):
            for i in range(d):
                l = lo[b, i]
                u = hi[b, i]
                if u <= 0.0:
                    sl[b, i] = 0.0
                    su[b, i] = 0.0
                    iu[b, i] = 0.0
                elif l >= 0.0:
                    sl[b, i] = 1.0
                    su[b, i] = 1.0
                    iu[b, i] = 0.0
                else:
                    s = u / (u - l)
                    su[b, i] = s
                    iu[b, i] = -l * s
                    sl[b, i] = 1.0 if u >= -l else 0.0
    return slope_l, icpt_l, slope_u, icpt_u


def tanh_relaxation(lb, ub):
    """Linear relaxation of tanh over per-element intervals."""
    cdef const double[:, ::1] lo = np.ascontiguousarray(lb, dtype=np.float64)
    cdef const double[:, ::1] hi = np.ascontiguousarray(ub, dtype=np.float64)
    cdef Py_ssize_t n = lo.shape[0], d = lo.shape[1]
    slope_l = np.empty((n, d))
    icpt_l = np.empty((n, d))
    slope_u = np.empty((n, d))
    icpt_u = np.empty((n, d))
    cdef double[:, ::1] sl = slope_l
    cdef double[:, ::1] il = icpt_l
    cdef double[:, ::1] su = slope_u
    cdef double[:, ::1] iu = icpt_u
    cdef Py_ssize_t b, i
    cdef double l, u, tl, tu, sec, mid, tm, dm, dl, du, s
    with nogil:
        for b in range(n):
            for i in range(d):
                l = lo[b, i]
                u = hi[b, i]
                tl = c_tanh(l)
                tu = c_tanh(u)
                if u - l <= 0.0:
                    dm = 1.0 - tl * tl
                    sl[b, i] = dm
                    su[b, i] = dm
                    il[b, i] = tl - dm * l
                    iu[b, i] = il[b, i]
                elif u <= 0.0:
                    # convex region: secant above, midpoint tangent below
                    sec = (tu - tl) / (u - l)
                    su[b, i] = sec
                    iu[b, i] = tl - sec * l
                    mid = 0.5 * (l + u)
                    tm = c_tanh(mid)
                    dm = 1.0 - tm * tm
                    sl[b, i] = dm
                    il[b, i] = tm - dm * mid
                elif l >= 0.0:
                    # concave region: secant below, midpoint tangent above
                    sec = (tu - tl) / (u - l)
                    sl[b, i] = sec
                    il[b, i] = tl - sec * l
                    mid = 0.5 * (l + u)
                    tm = c_tanh(mid)
                    dm = 1.0 - tm * tm
                    su[b, i] = dm
                    iu[b, i] = tm - dm * mid
                else:
                    # crossing zero: endpoint lines with the smaller endpoint
                    # derivative as slope (tanh' is minimal at an endpoint)
                    dl = 1.0 - tl * tl
                    du = 1.0 - tu * tu
                    s = dl if dl < du else du
                    sl[b, i] = s
                    il[b, i] = tl - s * l
                    su[b, i] = s
                    iu[b, i] = tu - s * u
    return slope_l, icpt_l, slope_u, icpt_u


def backsub(coef, offset, slope_pos, icpt_pos, slope_neg, icpt_neg):
    """Substitute per-element linear relaxations into an affine bound."""
    cdef const double[:, ::1] c = np.ascontiguousarray(coef, dtype=np.float64)
    cdef const double[::1] off = np.ascontiguousarray(offset, dtype=np.float64)
    cdef const double[:, ::1] sp = np.ascontiguousarray(slope_pos, dtype=np.float64)
    cdef const double[:, ::1] ip = np.ascontiguousarray(icpt_pos, dtype=np.float64)
    cdef const double[:, ::1] sn = np.ascontiguousarray(slope_neg, dtype=np.float64)
    cdef const double[:, ::1] inn = np.ascontiguousarray(icpt_neg, dtype=np.float64)
    cdef Py_ssize_t n = c.shape[0], d = c.shape[1]
    new_coef = np.empty((n, d))
    new_off = np.empty(n)
    cdef double[:, ::1] oc = new_coef
    cdef double[::1] oo = new_off
    cdef Py_ssize_t b, i
    cdef double v, acc
    with nogil:
        for b in range(n):
            acc = off[b]
            for i in range(d):
                v = c[b, i]
                if v >= 0.0:
                    oc[b, i] = v * sp[b, i]
                    acc += v * ip[b, i]
                else:
                    oc[b, i] = v * sn[b, i]
                    acc += v * inn[b, i]
            oo[b] = acc
    return new_coef, new_off


def concretize_min(coef, offset, lb, ub):
    """Minimum of ``coef @ x + offset`` over the box [lb, ub], per row."""
    cdef const double[:, ::1] c = np.ascontiguousarray(coef, dtype=np.float64)
    cdef const double[::1] off = np.ascontiguousarray(offset, dtype=np.float64)
    cdef const double[:, ::1] lo = np.ascontiguousarray(lb, dtype=np.float64)
    cdef const double[:, ::1] hi = np.ascontiguousarray(ub, dtype=np.float64)
    cdef Py_ssize_t n = c.shape[0], d = c.shape[1]
    out = np.empty(n)
    cdef double[::1] o = out
    cdef Py_ssize_t b, i
    cdef double v, acc
    with nogil:
        for b in range(n):
            acc = off[b]
            for i in range(d):
                v = c[b, i]
                acc += v * (lo[b, i] if v >= 0.0 else hi[b, i])
            o[b] = acc
    return out


def concretize_max(coef, offset, lb, ub):
    """Maximum of ``coef @ x + offset`` over the box [lb, ub], per row."""
    cdef const double[:, ::1] c = np.ascontiguousarray(coef, dtype=np.float64)
    cdef const double[::1] off = np.ascontiguousarray(offset, dtype=np.float64)
    cdef const double[:, ::1] lo = np.ascontiguousarray(lb, dtype=np.float64)
    cdef const double[:, ::1] hi = np.ascontiguousarray(ub, dtype=np.float64)
    cdef Py_ssize_t n = c.shape[0], d = c.shape[1]
    out = np.empty(n)
    cdef double[::1] o = out
    cdef Py_ssize_t b, i
    cdef double v, acc
    with nogil:
        for b in range(n):
            acc = off[b]
            for i in range(d):
                v = c[b, i]
                acc += v * (hi[b, i] if v >= 0.0 else lo[b, i])
            o[b] = acc
    return out


def interval_matvec(glb, gub, weight):
    """Interval right-multiplication ``g @ weight`` with a scalar matrix."""
    cdef const double[:, ::1] gl = np.ascontiguousarray(glb, dtype=np.float64)
    cdef const double[:, ::1] gu = np.ascontiguousarray(gub, dtype=np.float64)
    cdef const double[:, ::1] w = np.ascontiguousarray(weight, dtype=np.float64)
    cdef Py_ssize_t n = gl.shape[0], rows = w.shape[0], cols = w.shape[1]
    out_lb = np.zeros((n, cols))
    out_ub = np.zeros((n, cols))
    cdef double[:, ::1] olb = out_lb
    cdef double[:, ::1] oub = out_ub
    cdef Py_ssize_t b, j, i
    cdef double wj, a, u
    with nogil:
        for b in range(n):
            for j in range(rows):
                a = gl[b, j]
                u = gu[b, j]
                for i in range(cols):
                    wj = w[j, i]
                    if wj >= 0.0:
                        olb[b, i] += wj * a
                        oub[b, i] += wj * u
                    else:
                        olb[b, i] += wj * u
                        oub[b, i] += wj * a
    return out_lb, out_ub


def interval_scale(glb, gub, dlb, dub):
    """Elementwise interval product [glb, gub] * [dlb, dub]."""
    cdef const double[:, ::1] gl = np.ascontiguousarray(glb, dtype=np.float64)
    cdef const double[:, ::1] gu = np.ascontiguousarray(gub, dtype=np.float64)
    cdef const double[:, ::1] dl = np.ascontiguousarray(dlb, dtype=np.float64)
    cdef const double[:, ::1] du = np.ascontiguousarray(dub, dtype=np.float64)
    cdef Py_ssize_t n = gl.shape[0], d = gl.shape[1]
    out_lb = np.empty((n, d))
    out_ub = np.empty((n, d))
    cdef double[:, ::1] olb = out_lb
    cdef double[:, ::1] oub = out_ub
    cdef Py_ssize_t b, i
    cdef double p1, p2, p3, p4, mn, mx
    with nogil:
        for b in range(n):
            for i in range(d):
                p1 = gl[b, i] * dl[b, i]
                p2 = gl[b, i] * du[b, i]
                p3 = gu[b, i] * dl[b, i]
                p4 = gu[b, i] * du[b, i]
                mn = p1
                mx = p1
                if p2 < mn: mn = p2
                if p3 < mn: mn = p3
                if p4 < mn: mn = p4
                if p2 > mx: mx = p2
                if p3 > mx: mx = p3
                if p4 > mx: mx = p4
                olb[b, i] = mn
                oub[b, i] = mx
    return out_lb, out_ub


def tanh_derivative_interval(lb, ub):
    """Interval enclosing 1 - tanh(y)^2 for y in [lb, ub], elementwise."""
    cdef const double[:, ::1] lo = np.ascontiguousarray(lb, dtype=np.float64)
    cdef const double[:, ::1] hi = np.ascontiguousarray(ub, dtype=np.float64)
    cdef Py_ssize_t n = lo.shape[0], d = lo.shape[1]
    out_lb = np.empty((n, d))
    out_ub = np.empty((n, d))
    cdef double[:, ::1] olb = out_lb
    cdef double[:, ::1] oub = out_ub
    cdef Py_ssize_t b, i
    cdef double l, u, a, c
    with nogil:
        for b in range(n):
            for i in range(d):
                l = lo[b, i]
                u = hi[b, i]
                a = c_tanh(l)
                a = 1.0 - a * a
                c = c_tanh(u)
                c = 1.0 - c * c
                if a > c:
                    olb[b, i] = c
                    oub[b, i] = a
                else:
                    olb[b, i] = a
                    oub[b, i] = c
                if l <= 0.0 <= u:
                    oub[b, i] = 1.0
    return out_lb, out_ub
