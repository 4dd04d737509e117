"""Masked value function and marginal contributions over Boolean masks.

A coalition of input features is encoded as a Boolean mask ``mu``: feature
``j`` is taken from the explicand where the mask bit is 1 and from a
background sample where it is 0.  The value of a coalition is the network
output at the masked input, averaged over the background dataset
("marginal") or taken at a single baseline row ("baseline").

Features may optionally be tied together into groups (e.g. superpixels);
masks then live over the groups and are expanded through a fixed 0/1 lift
before touching the network, so the coalition machinery stays
group-dimensional throughout.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, PreconditionError
from .network import Network, forward_batch

VALUE_KINDS = ("marginal", "baseline")


def as_mask(bits, g: int | None = None) -> np.ndarray:
    """Normalise array-like 0/1 bits to a uint8 vector."""
    m = np.asarray(bits)
    m = (m != 0).astype(np.uint8)
    if m.ndim != 1:
        raise DimensionError("mask must be a 1-d bit vector")
    if g is not None and m.shape[0] != g:
        raise DimensionError(f"mask has length {m.shape[0]}, expected {g}")
    return m


@dataclass(frozen=True)
class AttributionProblem:
    """One attribution instance: network, explicand, background and target.

    ``groups``, when given, must partition the feature indices
    ``0..n-1`` into disjoint nonempty sets; the effective number of
    attributed features is then the number of groups.
    """

    net: Network
    explicand: np.ndarray  # (n,)
    background: np.ndarray  # (B, n)
    kind: str = "marginal"
    target_output: int = 0
    groups: tuple[tuple[int, ...], ...] | None = None

    def __post_init__(self):
        x = np.ascontiguousarray(self.explicand, dtype=np.float64)
        bg = np.atleast_2d(np.ascontiguousarray(self.background, dtype=np.float64))
        x.setflags(write=False)
        bg.setflags(write=False)
        object.__setattr__(self, "explicand", x)
        object.__setattr__(self, "background", bg)
        n = self.net.input_dim
        if x.shape != (n,):
            raise DimensionError(f"explicand has shape {x.shape}, expected ({n},)")
        if bg.ndim != 2 or bg.shape[1] != n:
            raise DimensionError(
                f"background has shape {bg.shape}, expected (B, {n})"
            )
        if bg.shape[0] < 1:
            raise DimensionError("background must have at least one row")
        if not np.isfinite(x).all() or not np.isfinite(bg).all():
            raise ValueError("explicand/background contain non-finite entries")
        if self.kind not in VALUE_KINDS:
            raise ValueError(f"kind must be one of {VALUE_KINDS}, got {self.kind!r}")
        if self.kind == "baseline" and bg.shape[0] != 1:
            raise ValueError("baseline kind requires exactly one background row")
        if not 0 <= self.target_output < self.net.output_dim:
            raise DimensionError(
                f"target_output {self.target_output} outside [0, "
                f"{self.net.output_dim})"
            )
        if self.groups is not None:
            groups = tuple(tuple(int(i) for i in grp) for grp in self.groups)
            object.__setattr__(self, "groups", groups)
            seen = [idx for grp in groups for idx in grp]
            if any(len(grp) == 0 for grp in groups):
                raise ValueError("groups must be nonempty")
            if sorted(seen) != list(range(n)):
                raise ValueError("groups must cover each feature index exactly once")

    @property
    def num_features(self) -> int:
        """Effective feature count g: number of groups, else n."""
        if self.groups is not None:
            return len(self.groups)
        return self.net.input_dim

    @property
    def group_index(self) -> np.ndarray:
        """Map from raw feature index to effective (group) index, shape (n,)."""
        n = self.net.input_dim
        gidx = np.arange(n, dtype=np.intp)
        if self.groups is not None:
            for j, grp in enumerate(self.groups):
                gidx[list(grp)] = j
        return gidx

    def expand_mask(self, mask: np.ndarray) -> np.ndarray:
        """Lift a g-dimensional mask to the n raw features."""
        mask = as_mask(mask, self.num_features)
        return mask[self.group_index]


def mask_apply(problem: AttributionProblem, mask, x, z) -> np.ndarray:
    """Compose the masked input: explicand where the bit is 1, z where 0."""
    x = np.asarray(x, dtype=np.float64)
    z = np.asarray(z, dtype=np.float64)
    n = problem.net.input_dim
    if x.shape != (n,) or z.shape != (n,):
        raise DimensionError(f"x and z must have shape ({n},)")
    bits = problem.expand_mask(mask).astype(np.float64)
    return bits * x + (1.0 - bits) * z


def mask_insert(mask, i: int) -> np.ndarray:
    """Copy of the mask with bit ``i`` set; other bits unchanged."""
    m = as_mask(mask)
    if not 0 <= i < m.shape[0]:
        raise IndexError(f"feature index {i} outside [0, {m.shape[0]})")
    out = m.copy()
    out[i] = 1
    return out


def value(problem: AttributionProblem, mask) -> float:
    """The masked value: mean over background rows of the target output."""
    return float(value_batch(problem, as_mask(mask, problem.num_features)[None, :])[0])


def value_batch(problem: AttributionProblem, masks: np.ndarray) -> np.ndarray:
    """Evaluate the masked value function at many masks, shape (M, g) -> (M,)."""
    masks = np.atleast_2d(np.asarray(masks))
    if masks.shape[1] != problem.num_features:
        raise DimensionError(
            f"masks have {masks.shape[1]} columns, expected {problem.num_features}"
        )
    bits = (masks != 0).astype(np.float64)[:, problem.group_index]  # (M, n)
    x = problem.explicand
    total = np.zeros(masks.shape[0])
    for z in problem.background:
        inputs = bits * x + (1.0 - bits) * z
        total += forward_batch(problem.net, inputs)[:, problem.target_output]
    return total / problem.background.shape[0]


def contribution(problem: AttributionProblem, i: int, mask) -> float:
    """Marginal contribution of feature ``i`` to the coalition ``mask``."""
    m = as_mask(mask, problem.num_features)
    if not 0 <= i < problem.num_features:
        raise IndexError(f"feature index {i} outside [0, {problem.num_features})")
    if m[i]:
        raise PreconditionError(f"bit {i} of the mask is already set")
    return value(problem, mask_insert(m, i)) - value(problem, m)
