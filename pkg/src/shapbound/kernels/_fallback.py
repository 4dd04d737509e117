"""Pure-NumPy implementations of the bound-propagation kernels.

Same contracts as the compiled core in ``_core.pyx``; used when the
extension is unavailable or explicitly disabled.  All arrays are float64;
batch arrays are (N, D) with the batch axis first.
"""

import numpy as np


def affine_ibp(weight, bias, lb, ub):
    """Interval image of ``x -> weight @ x + bias`` over the box [lb, ub].

    lb, ub: (N, cols).  Returns (out_lb, out_ub), each (N, rows).
    """
    wp = np.maximum(weight, 0.0)
    wn = np.minimum(weight, 0.0)
    out_lb = lb @ wp.T + ub @ wn.T + bias
    out_ub = ub @ wp.T + lb @ wn.T + bias
    return out_lb, out_ub


def relu_relaxation(lb, ub):
    """Linear relaxation of ReLU over per-element pre-activation intervals.

    Returns (slope_l, icpt_l, slope_u, icpt_u) with
    slope_l*y + icpt_l <= relu(y) <= slope_u*y + icpt_u on [lb, ub].
    Crossing intervals use the upper chord and a lower line through the
    origin with slope 1 when |ub| >= |lb|, else 0.
    """
    dead = ub <= 0.0
    alive = lb >= 0.0
    cross = ~(dead | alive)
    slope_u = np.zeros_like(lb)
    icpt_u = np.zeros_like(lb)
    slope_l = np.zeros_like(lb)
    icpt_l = np.zeros_like(lb)
    slope_u[alive] = 1.0
    slope_l[alive] = 1.0
    if np.any(cross):
        l = lb[cross]
        u = ub[cross]
        s = u / (u - l)
        slope_u[cross] = s
        icpt_u[cross] = -l * s
        slope_l[cross] = (u >= -l).astype(np.float64)
    return slope_l, icpt_l, slope_u, icpt_u


def tanh_relaxation(lb, ub):
    """Linear relaxation of tanh over per-element pre-activation intervals.

    On one-sided intervals the bounds are the secant and the tangent at the
    midpoint (sides chosen by concavity).  On intervals crossing zero, both
    bounds are lines through the endpoints with the smaller endpoint
    derivative as slope, which is sound because tanh' attains its minimum
    over the interval at an endpoint.
    """
    tl = np.tanh(lb)
    tu = np.tanh(ub)
    width = ub - lb
    degenerate = width <= 0.0

    slope_l = np.zeros_like(lb)
    icpt_l = np.zeros_like(lb)
    slope_u = np.zeros_like(lb)
    icpt_u = np.zeros_like(lb)

    # Point interval: tangent at the point on both sides (exact there).
    if np.any(degenerate):
        d = 1.0 - tl[degenerate] ** 2
        slope_l[degenerate] = d
        slope_u[degenerate] = d
        icpt_l[degenerate] = tl[degenerate] - d * lb[degenerate]
        icpt_u[degenerate] = icpt_l[degenerate]

    live = ~degenerate
    secant = np.zeros_like(lb)
    secant[live] = (tu[live] - tl[live]) / width[live]

    convex = live & (ub <= 0.0)  # tanh is convex left of 0
    concave = live & (lb >= 0.0)  # concave right of 0
    cross = live & ~(convex | concave)

    for region, sec_is_upper in ((convex, True), (concave, False)):
        if not np.any(region):
            continue
        mid = 0.5 * (lb[region] + ub[region])
        tm = np.tanh(mid)
        dm = 1.0 - tm * tm
        tan_icpt = tm - dm * mid
        sec_icpt = tl[region] - secant[region] * lb[region]
        if sec_is_upper:
            slope_u[region] = secant[region]
            icpt_u[region] = sec_icpt
            slope_l[region] = dm
            icpt_l[region] = tan_icpt
        else:
            slope_l[region] = secant[region]
            icpt_l[region] = sec_icpt
            slope_u[region] = dm
            icpt_u[region] = tan_icpt

    if np.any(cross):
        dl = 1.0 - tl[cross] ** 2
        du = 1.0 - tu[cross] ** 2
        s = np.minimum(dl, du)
        slope_l[cross] = s
        icpt_l[cross] = tl[cross] - s * lb[cross]
        slope_u[cross] = s
        icpt_u[cross] = tu[cross] - s * ub[cross]
    return slope_l, icpt_l, slope_u, icpt_u


def backsub(coef, offset, slope_pos, icpt_pos, slope_neg, icpt_neg):
    """Substitute per-element linear relaxations into an affine bound.

    coef: (N, D), offset: (N,).  Elements with coef >= 0 take the
    (slope_pos, icpt_pos) line, the rest (slope_neg, icpt_neg).
    Returns (new_coef, new_offset).
    """
    pos = coef >= 0.0
    new_coef = coef * np.where(pos, slope_pos, slope_neg)
    new_offset = offset + np.sum(coef * np.where(pos, icpt_pos, icpt_neg), axis=1)
    return new_coef, new_offset


def concretize_min(coef, offset, lb, ub):
    """Minimum of ``coef @ x + offset`` over the box [lb, ub], per row."""
    return np.sum(np.where(coef >= 0.0, coef * lb, coef * ub), axis=1) + offset


def concretize_max(coef, offset, lb, ub):
    """Maximum of ``coef @ x + offset`` over the box [lb, ub], per row."""
    return np.sum(np.where(coef >= 0.0, coef * ub, coef * lb), axis=1) + offset


def interval_matvec(glb, gub, weight):
    """Interval right-multiplication ``g @ weight`` with scalar weight.

    glb, gub: (N, rows); weight: (rows, cols).  Returns (out_lb, out_ub).
    """
    wp = np.maximum(weight, 0.0)
    wn = np.minimum(weight, 0.0)
    return glb @ wp + gub @ wn, gub @ wp + glb @ wn


def interval_scale(glb, gub, dlb, dub):
    """Elementwise interval product [glb, gub] * [dlb, dub]."""
    p1 = glb * dlb
    p2 = glb * dub
    p3 = gub * dlb
    p4 = gub * dub
    out_lb = np.minimum(np.minimum(p1, p2), np.minimum(p3, p4))
    out_ub = np.maximum(np.maximum(p1, p2), np.maximum(p3, p4))
    return out_lb, out_ub


def tanh_derivative_interval(lb, ub):
    """Interval enclosing 1 - tanh(y)^2 for y in [lb, ub], elementwise."""
    dl_at_lb = 1.0 - np.tanh(lb) ** 2
    dl_at_ub = 1.0 - np.tanh(ub) ** 2
    lo = np.minimum(dl_at_lb, dl_at_ub)
    hi = np.maximum(dl_at_lb, dl_at_ub)
    # The derivative peaks at 0, so intervals straddling 0 reach 1.
    hi = np.where((lb <= 0.0) & (ub >= 0.0), 1.0, hi)
    return lo, hi
