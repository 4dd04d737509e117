"""Sound interval and linear bound propagation of the masked value function.

A branch of coalition space is a box of relaxed masks inside [0, 1]^g.  For
each background row z the masked input is an affine function of the mask,
``mu -> diag(x - z) G mu + z`` with G the 0/1 group lift, so bounding the
value function over a mask box reduces to bound propagation through the
network prefixed by that affine lift, averaged over background rows
(the average of the per-row output bounds is a sound bound on the averaged
output because the mean is linear).

Two propagation methods are provided:

* ``ibp``  -- forward interval arithmetic, layer by layer;
* ``lbp``  -- a backward pass with linear bounding functions whose
  activation relaxations use the intermediate interval boxes from the
  forward pass.  The resulting interval is intersected with the forward
  interval, so it is never looser than ``ibp`` and is exact for purely
  affine networks in the sense that it returns the true range of the value
  over the box.

``gradient_interval`` runs a backward interval pass over the derivative,
used by the gradient-magnitude splitting heuristic.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import DimensionError
from .network import Affine
from .valuefn import AttributionProblem

PROPAGATION_METHODS = ("ibp", "lbp")


@dataclass(frozen=True)
class Interval:
    """Closed scalar interval with finite endpoints."""

    lb: float
    ub: float

    def __post_init__(self):
        if not (np.isfinite(self.lb) and np.isfinite(self.ub)):
            raise ValueError("interval endpoints must be finite")
        if self.lb > self.ub:
            raise ValueError(f"interval has lb {self.lb} > ub {self.ub}")

    @property
    def width(self) -> float:
        return self.ub - self.lb

    def contains(self, v: float, tol: float = 0.0) -> bool:
        return self.lb - tol <= v <= self.ub + tol

    def intersect(self, other: "Interval") -> "Interval":
        lo = max(self.lb, other.lb)
        hi = min(self.ub, other.ub)
        if lo > hi:  # only reachable through rounding noise
            lo, hi = hi, lo
        return Interval(lo, hi)


class Box:
    """Axis-aligned box: per-coordinate interval vector."""

    __slots__ = ("lb", "ub")

    def __init__(self, lb, ub):
        lb = np.ascontiguousarray(lb, dtype=np.float64)
        ub = np.ascontiguousarray(ub, dtype=np.float64)
        if lb.shape != ub.shape or lb.ndim != 1:
            raise DimensionError("box bounds must be 1-d arrays of equal length")
        if not (np.isfinite(lb).all() and np.isfinite(ub).all()):
            raise ValueError("box bounds must be finite")
        if np.any(lb > ub):
            raise ValueError("box has lb > ub in some coordinate")
        lb.setflags(write=False)
        ub.setflags(write=False)
        self.lb = lb
        self.ub = ub

    def __len__(self) -> int:
        return self.lb.shape[0]

    def coordinate(self, j: int) -> Interval:
        return Interval(float(self.lb[j]), float(self.ub[j]))

    def contains_point(self, x, tol: float = 0.0) -> bool:
        x = np.asarray(x, dtype=np.float64)
        return bool(np.all(self.lb - tol <= x) and np.all(x <= self.ub + tol))

    @classmethod
    def unit(cls, d: int) -> "Box":
        return cls(np.zeros(d), np.ones(d))

    @classmethod
    def point(cls, x) -> "Box":
        x = np.asarray(x, dtype=np.float64)
        return cls(x, x.copy())

    def __repr__(self):
        return f"Box(lb={self.lb!r}, ub={self.ub!r})"


@dataclass(frozen=True)
class LinearBounds:
    """Paired affine lower/upper bounding functions over a mask box.

    For every mu in the associated box,
    ``lower_coef @ mu + lower_offset <= v(mu) <= upper_coef @ mu + upper_offset``.
    """

    lower_coef: np.ndarray
    lower_offset: float
    upper_coef: np.ndarray
    upper_offset: float

    def evaluate_lower(self, mu) -> float:
        return float(self.lower_coef @ np.asarray(mu, dtype=np.float64)
                     + self.lower_offset)

    def evaluate_upper(self, mu) -> float:
        return float(self.upper_coef @ np.asarray(mu, dtype=np.float64)
                     + self.upper_offset)


def ibp_affine(weight, bias, box: Box) -> Box:
    """Exact per-coordinate interval image of an affine map over a box."""
    weight = np.asarray(weight, dtype=np.float64)
    bias = np.asarray(bias, dtype=np.float64)
    if weight.ndim != 2 or weight.shape[1] != len(box):
        raise DimensionError(
            f"weight has shape {weight.shape}, box has length {len(box)}"
        )
    out_lb, out_ub = kernels.affine_ibp(weight, bias, box.lb[None, :], box.ub[None, :])
    return Box(out_lb[0], out_ub[0])


def ibp_activation(kind: str, box: Box) -> Box:
    """Componentwise monotone image [sigma(lb), sigma(ub)]."""
    if kind == "relu":
        return Box(np.maximum(box.lb, 0.0), np.maximum(box.ub, 0.0))
    if kind == "tanh":
        return Box(np.tanh(box.lb), np.tanh(box.ub))
    raise ValueError(f"unknown activation kind {kind!r}")


class Propagator:
    """Precomputed propagation state for one attribution problem.

    All methods are pure and batched over N mask boxes given as (N, g)
    lower/upper arrays; internally every background row is propagated
    separately and the per-row output bounds are averaged endpoint-wise.
    """

    def __init__(self, problem: AttributionProblem):
        self.problem = problem
        net = problem.net
        self.layers = net.layers
        self.g = problem.num_features
        self.n = net.input_dim
        self.out_dim = net.output_dim
        self.k = problem.target_output
        self.num_rows = problem.background.shape[0]
        self.gidx = problem.group_index

        coeff = problem.explicand[None, :] - problem.background  # (B, n)
        self._coeff_pos = np.maximum(coeff, 0.0)
        self._coeff_neg = np.minimum(coeff, 0.0)
        self._z = problem.background
        lift_mat = np.zeros((self.n, self.g))
        lift_mat[np.arange(self.n), self.gidx] = 1.0
        self._lift = coeff[:, :, None] * lift_mat[None, :, :]  # (B, n, g)
        self._lift_pos = np.maximum(self._lift, 0.0)
        self._lift_neg = np.minimum(self._lift, 0.0)

    def _check_boxes(self, mask_lb: np.ndarray, mask_ub: np.ndarray):
        if mask_lb.shape != mask_ub.shape or mask_lb.ndim != 2:
            raise DimensionError("mask boxes must be (N, g) arrays")
        if mask_lb.shape[1] != self.g:
            raise DimensionError(
                f"mask boxes have {mask_lb.shape[1]} coordinates, expected {self.g}"
            )

    def _input_box(self, mask_lb, mask_ub):
        """Lift (N, g) mask boxes to (B*N, n) input boxes."""
        exp_lb = mask_lb[:, self.gidx]
        exp_ub = mask_ub[:, self.gidx]
        cp = self._coeff_pos[:, None, :]
        cn = self._coeff_neg[:, None, :]
        z = self._z[:, None, :]
        in_lb = z + cp * exp_lb[None] + cn * exp_ub[None]
        in_ub = z + cp * exp_ub[None] + cn * exp_lb[None]
        flat = self.num_rows * mask_lb.shape[0]
        return in_lb.reshape(flat, self.n), in_ub.reshape(flat, self.n)

    def _ibp_forward(self, mask_lb, mask_ub):
        """Forward interval pass; returns pre-activation boxes and outputs."""
        lb, ub = self._input_box(mask_lb, mask_ub)
        pre_boxes = []
        for layer in self.layers:
            if isinstance(layer, Affine):
                lb, ub = kernels.affine_ibp(layer.weight, layer.bias, lb, ub)
            else:
                pre_boxes.append((lb, ub))
                if layer.kind == "relu":
                    lb = np.maximum(lb, 0.0)
                    ub = np.maximum(ub, 0.0)
                else:
                    lb = np.tanh(lb)
                    ub = np.tanh(ub)
        return pre_boxes, lb, ub

    def _close_over_mask(self, coef, offset, num_boxes):
        """Compose an affine bound on the input with the per-row mask lift.

        coef: (B*N, n), offset: (B*N,).  Returns coefficients over mask
        coordinates, shape (B*N, g), and the shifted offsets.
        """
        coef3 = coef.reshape(self.num_rows, num_boxes, self.n)
        mu_coef = np.matmul(coef3, self._lift)  # (B, N, g)
        shift = np.einsum("bnf,bf->bn", coef3, self._z)
        flat = self.num_rows * num_boxes
        return mu_coef.reshape(flat, self.g), offset + shift.reshape(flat)

    def _crown_functions(self, mask_lb, mask_ub, pre_boxes):
        """Backward linear-bound pass, averaged over background rows.

        The per-row affine bounding functions are averaged at the
        functional level (the mean is linear, so the averaged functions
        bound the averaged value), which is tighter than averaging
        per-row concretisations because every row would otherwise pick
        its own extremal mask.  Returns mask-space coefficients
        (N, g) and offsets (N,) for the lower and upper functions.
        """
        num_boxes = mask_lb.shape[0]
        flat = self.num_rows * num_boxes
        seed = np.zeros((flat, self.out_dim))
        seed[:, self.k] = 1.0
        a_low = seed
        a_up = seed.copy()
        c_low = np.zeros(flat)
        c_up = np.zeros(flat)
        boxes = list(pre_boxes)
        for layer in reversed(self.layers):
            if isinstance(layer, Affine):
                c_low = c_low + a_low @ layer.bias
                c_up = c_up + a_up @ layer.bias
                a_low = a_low @ layer.weight
                a_up = a_up @ layer.weight
            else:
                plb, pub = boxes.pop()
                if layer.kind == "relu":
                    sl, il, su, iu = kernels.relu_relaxation(plb, pub)
                else:
                    sl, il, su, iu = kernels.tanh_relaxation(plb, pub)
                a_low, c_low = kernels.backsub(a_low, c_low, sl, il, su, iu)
                a_up, c_up = kernels.backsub(a_up, c_up, su, iu, sl, il)
        mu_low, c_low = self._close_over_mask(a_low, c_low, num_boxes)
        mu_up, c_up = self._close_over_mask(a_up, c_up, num_boxes)
        b = self.num_rows
        g = self.g
        return (
            mu_low.reshape(b, num_boxes, g).mean(axis=0),
            c_low.reshape(b, num_boxes).mean(axis=0),
            mu_up.reshape(b, num_boxes, g).mean(axis=0),
            c_up.reshape(b, num_boxes).mean(axis=0),
        )

    def _crown_backward(self, mask_lb, mask_ub, pre_boxes):
        """Concretised backward linear bounds; returns ((N,) lv, (N,) uv)."""
        mu_low, c_low, mu_up, c_up = self._crown_functions(
            mask_lb, mask_ub, pre_boxes
        )
        lv = kernels.concretize_min(mu_low, c_low, mask_lb, mask_ub)
        uv = kernels.concretize_max(mu_up, c_up, mask_lb, mask_ub)
        return lv, uv

    def value_bounds(self, mask_lb, mask_ub, method: str = "lbp"):
        """Sound value bounds over N mask boxes; returns ((N,) lv, (N,) uv)."""
        mask_lb = np.ascontiguousarray(mask_lb, dtype=np.float64)
        mask_ub = np.ascontiguousarray(mask_ub, dtype=np.float64)
        self._check_boxes(mask_lb, mask_ub)
        if method not in PROPAGATION_METHODS:
            raise ValueError(f"unknown propagation method {method!r}")
        num_boxes = mask_lb.shape[0]
        pre_boxes, out_lb, out_ub = self._ibp_forward(mask_lb, mask_ub)
        lv = out_lb[:, self.k].reshape(self.num_rows, num_boxes).mean(axis=0)
        uv = out_ub[:, self.k].reshape(self.num_rows, num_boxes).mean(axis=0)
        if method == "lbp":
            crown_lv, crown_uv = self._crown_backward(mask_lb, mask_ub, pre_boxes)
            # Intersect with the forward interval: sound, and never looser
            # than plain interval propagation.
            lv = np.maximum(lv, crown_lv)
            uv = np.minimum(uv, crown_uv)
            swap = lv > uv  # rounding noise on (near-)degenerate bounds
            if np.any(swap):
                lv[swap], uv[swap] = uv[swap], lv[swap].copy()
        return lv, uv

    def gradient_bounds(self, mask_lb, mask_ub):
        """Interval enclosure of the value gradient w.r.t. mask coordinates.

        Returns ((N, g) lower, (N, g) upper) containing d v / d mu_j for
        every mask in each box.
        """
        mask_lb = np.ascontiguousarray(mask_lb, dtype=np.float64)
        mask_ub = np.ascontiguousarray(mask_ub, dtype=np.float64)
        self._check_boxes(mask_lb, mask_ub)
        num_boxes = mask_lb.shape[0]
        pre_boxes, _, _ = self._ibp_forward(mask_lb, mask_ub)
        flat = self.num_rows * num_boxes
        glb = np.zeros((flat, self.out_dim))
        glb[:, self.k] = 1.0
        gub = glb.copy()
        boxes = list(pre_boxes)
        for layer in reversed(self.layers):
            if isinstance(layer, Affine):
                glb, gub = kernels.interval_matvec(glb, gub, layer.weight)
            else:
                plb, pub = boxes.pop()
                if layer.kind == "relu":
                    dlo = (plb > 0.0).astype(np.float64)
                    dhi = (pub > 0.0).astype(np.float64)
                else:
                    dlo, dhi = kernels.tanh_derivative_interval(plb, pub)
                glb, gub = kernels.interval_scale(glb, gub, dlo, dhi)
        glb3 = glb.reshape(self.num_rows, num_boxes, self.n)
        gub3 = gub.reshape(self.num_rows, num_boxes, self.n)
        out_lb = np.matmul(glb3, self._lift_pos) + np.matmul(gub3, self._lift_neg)
        out_ub = np.matmul(gub3, self._lift_pos) + np.matmul(glb3, self._lift_neg)
        return out_lb.mean(axis=0), out_ub.mean(axis=0)

    def linear_bounds(self, mask_lb, mask_ub) -> LinearBounds:
        """Affine bounding functions over one mask box, averaged over rows."""
        mask_lb = np.ascontiguousarray(mask_lb, dtype=np.float64)[None, :]
        mask_ub = np.ascontiguousarray(mask_ub, dtype=np.float64)[None, :]
        self._check_boxes(mask_lb, mask_ub)
        pre_boxes, _, _ = self._ibp_forward(mask_lb, mask_ub)
        mu_low, c_low, mu_up, c_up = self._crown_functions(
            mask_lb, mask_ub, pre_boxes
        )
        return LinearBounds(
            lower_coef=mu_low[0],
            lower_offset=float(c_low[0]),
            upper_coef=mu_up[0],
            upper_offset=float(c_up[0]),
        )


def _validate_mask_box(problem: AttributionProblem, mask_box: Box):
    g = problem.num_features
    if len(mask_box) != g:
        raise DimensionError(f"mask box has {len(mask_box)} coordinates, expected {g}")
    if np.any(mask_box.lb < 0.0) or np.any(mask_box.ub > 1.0):
        raise ValueError("mask box must lie within the unit box")


def ibp_value_bounds(problem: AttributionProblem, mask_box: Box) -> Interval:
    """Sound interval containing the masked value for every mask in the box,
    computed by forward interval propagation."""
    _validate_mask_box(problem, mask_box)
    lv, uv = Propagator(problem).value_bounds(
        mask_box.lb[None, :], mask_box.ub[None, :], method="ibp"
    )
    return Interval(float(lv[0]), float(uv[0]))


def lbp_value_bounds(problem: AttributionProblem, mask_box: Box) -> Interval:
    """Sound interval from the backward linear-bound pass (never looser than
    the forward interval pass; true range for purely affine networks)."""
    _validate_mask_box(problem, mask_box)
    lv, uv = Propagator(problem).value_bounds(
        mask_box.lb[None, :], mask_box.ub[None, :], method="lbp"
    )
    return Interval(float(lv[0]), float(uv[0]))


def value_bounds(problem: AttributionProblem, mask_box: Box,
                 method: str = "lbp") -> Interval:
    if method == "ibp":
        return ibp_value_bounds(problem, mask_box)
    if method == "lbp":
        return lbp_value_bounds(problem, mask_box)
    raise ValueError(f"unknown propagation method {method!r}")


def gradient_interval(problem: AttributionProblem, mask_box: Box) -> Box:
    """Per-coordinate interval containing the value gradient over the box."""
    _validate_mask_box(problem, mask_box)
    glb, gub = Propagator(problem).gradient_bounds(
        mask_box.lb[None, :], mask_box.ub[None, :]
    )
    return Box(glb[0], gub[0])


def linear_value_bounds(problem: AttributionProblem, mask_box: Box) -> LinearBounds:
    """The backward pass's affine bounding functions over the given box."""
    _validate_mask_box(problem, mask_box)
    return Propagator(problem).linear_bounds(mask_box.lb, mask_box.ub)
