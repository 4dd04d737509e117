"""Branches over coalition space, coalition-weight sums and the batched queue.

A branch is the set of coalitions that include every feature in ``In`` and
exclude every feature in ``Ex``, encoded as a pair of Boolean mask vectors:
``mask_lb[j] = 1`` iff j is included, ``mask_ub[j] = 0`` iff j is excluded,
and a feature is *free* where the bits differ.  The total Shapley weight of
all coalitions in a branch depends only on r = |In| and s = |In| + |Ex| and
has the closed form 1 / ((s+1) * C(s, r)); splitting a branch on a free
feature distributes the weight onto the children as (r+1)/(s+2) and
(s+1-r)/(s+2), which is how weights are maintained in practice.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DimensionError,
    DomainError,
    EmptyQueueError,
    PreconditionError,
)
from .propagate import Interval

SELECT_STRATEGIES = ("max_diam", "min_diam")

_LAMBDA_REL_TOL = 1e-9


def sum_coalition_weights(r: int, s: int) -> float:
    """Total coalition weight of a branch with r included of s fixed features.

    Computed by the recursive product path from (0, 0), which never forms
    large binomial intermediates and is stable for s up to 64.
    """
    r = int(r)
    s = int(s)
    if r < 0 or s < r:
        raise DomainError(f"need 0 <= r <= s, got r={r}, s={s}")
    lam = 1.0
    for t in range(s):
        if t < r:
            lam *= (t + 1) / (t + 2)
        else:
            lam *= (t + 1 - r) / (t + 2)
    return lam


def closed_form_lambda(r: int, s: int) -> float:
    """Direct evaluation of 1 / ((s+1) * C(s, r)) through exact integers."""
    if r < 0 or s < r:
        raise DomainError(f"need 0 <= r <= s, got r={r}, s={s}")
    return 1.0 / float((s + 1) * math.comb(s, r))


def child_lambdas(lam: float, r: int, s: int) -> tuple[float, float]:
    """Weights of the two children created by splitting a free feature.

    The include-child gets lam * (r+1)/(s+2), the exclude-child
    lam * (s+1-r)/(s+2); they sum to lam exactly up to rounding.
    """
    if r < 0 or s < r:
        raise DomainError(f"need 0 <= r <= s, got r={r}, s={s}")
    if not lam > 0.0:
        raise DomainError(f"lambda must be positive, got {lam}")
    return lam * (r + 1) / (s + 2), lam * (s + 1 - r) / (s + 2)


@dataclass(eq=False)
class Branch:
    """One element of the coalition-space partition.

    ``value_bounds`` is None until the branch has been propagated; it is
    treated as immutable afterwards.  ``seq`` is the creation sequence
    number used for deterministic tie-breaking in the queue.
    """

    mask_lb: np.ndarray
    mask_ub: np.ndarray
    lam: float
    value_bounds: Interval | None = None
    seq: int = 0
    r: int = field(init=False)
    s: int = field(init=False)

    def __post_init__(self):
        self.mask_lb = np.ascontiguousarray(self.mask_lb, dtype=np.uint8)
        self.mask_ub = np.ascontiguousarray(self.mask_ub, dtype=np.uint8)
        if self.mask_lb.shape != self.mask_ub.shape or self.mask_lb.ndim != 1:
            raise DimensionError("mask bounds must be 1-d vectors of equal length")
        if np.any(self.mask_lb > self.mask_ub):
            raise ValueError("mask_lb must be <= mask_ub componentwise")
        self.r = int(self.mask_lb.sum())
        self.s = self.r + int((self.mask_ub == 0).sum())
        reference = closed_form_lambda(self.r, self.s)
        if not math.isclose(self.lam, reference, rel_tol=_LAMBDA_REL_TOL):
            raise ValueError(
                f"lambda {self.lam} inconsistent with closed form {reference} "
                f"for r={self.r}, s={self.s}"
            )

    @property
    def num_features(self) -> int:
        return self.mask_lb.shape[0]

    @property
    def free_mask(self) -> np.ndarray:
        """Boolean vector marking features not yet included or excluded."""
        return (self.mask_ub == 1) & (self.mask_lb == 0)

    @property
    def num_free(self) -> int:
        return int(self.free_mask.sum())

    @property
    def diameter(self) -> float:
        """Queue priority d = lambda * (ub_v - lb_v); requires propagation."""
        if self.value_bounds is None:
            raise ValueError("branch has no value bounds yet")
        return self.lam * self.value_bounds.width


def root_branch(g: int, value_bounds: Interval | None = None) -> Branch:
    """The trivial branch covering the whole power set."""
    if g < 1:
        raise DimensionError("need at least one feature")
    return Branch(np.zeros(g, dtype=np.uint8), np.ones(g, dtype=np.uint8),
                  lam=1.0, value_bounds=value_bounds, seq=0)


def split_branch(branch: Branch, j: int, seq_start: int = 0) -> tuple[Branch, Branch]:
    """Split on free feature j into an include-child and an exclude-child.

    The children inherit the parent's value bounds (to be refined by
    propagation and intersected with the parent's) and receive sequence
    numbers ``seq_start`` and ``seq_start + 1``.
    """
    if not 0 <= j < branch.num_features:
        raise IndexError(f"feature index {j} outside [0, {branch.num_features})")
    if not (branch.mask_lb[j] == 0 and branch.mask_ub[j] == 1):
        raise PreconditionError(f"feature {j} is not free in this branch")
    lam_in, lam_out = child_lambdas(branch.lam, branch.r, branch.s)
    lb_in = branch.mask_lb.copy()
    lb_in[j] = 1
    ub_out = branch.mask_ub.copy()
    ub_out[j] = 0
    child_in = Branch(lb_in, branch.mask_ub.copy(), lam_in,
                      value_bounds=branch.value_bounds, seq=seq_start)
    child_out = Branch(branch.mask_lb.copy(), ub_out, lam_out,
                       value_bounds=branch.value_bounds, seq=seq_start + 1)
    return child_in, child_out


def branch_contains(branch: Branch, mask) -> bool:
    """True iff mask_lb <= mask <= mask_ub componentwise."""
    m = np.asarray(mask)
    m = (m != 0).astype(np.uint8)
    if m.shape != branch.mask_lb.shape:
        raise DimensionError(
            f"mask has shape {m.shape}, branch has {branch.mask_lb.shape}"
        )
    return bool(np.all(branch.mask_lb <= m) and np.all(m <= branch.mask_ub))


class PartitionQueue:
    """Priority-ordered collection of branches keyed by their diameter.

    Pops return the extremal branches for the requested strategy, with ties
    broken by lower creation sequence number.  The heap is rebuilt lazily
    when the strategy changes between calls (in practice it is fixed for a
    whole run).  ``pruned_count`` / ``pruned_lambda_total`` aggregate the
    branches removed by pruning; pruned branch objects are not retained.
    """

    def __init__(self):
        self._heap: list[tuple[float, int, int, Branch]] = []
        self._strategy: str | None = None
        self._push_idx = 0
        self.pruned_count = 0
        self.pruned_lambda_total = 0.0

    def __len__(self) -> int:
        return len(self._heap)

    def branches(self) -> list[Branch]:
        """Snapshot of the active branches (in no particular order)."""
        return [entry[3] for entry in self._heap]

    @staticmethod
    def _key(branch: Branch, strategy: str) -> float:
        d = branch.diameter
        return -d if strategy == "max_diam" else d

    def _ensure_strategy(self, strategy: str):
        if strategy not in SELECT_STRATEGIES:
            raise ValueError(f"unknown select strategy {strategy!r}")
        if self._strategy != strategy:
            self._heap = [
                (self._key(br, strategy), seq, idx, br)
                for _, seq, idx, br in self._heap
            ]
            heapq.heapify(self._heap)
            self._strategy = strategy

    def push(self, branch: Branch):
        if branch.value_bounds is None:
            raise ValueError("only propagated branches can be queued")
        strategy = self._strategy or "max_diam"
        entry = (self._key(branch, strategy), branch.seq, self._push_idx, branch)
        self._push_idx += 1
        if self._strategy is None:
            self._strategy = strategy
        heapq.heappush(self._heap, entry)

    def pop_batch(self, b: int, strategy: str) -> list[Branch]:
        """Remove and return up to b branches extremal for the strategy."""
        if b < 1:
            raise ValueError("batch size must be >= 1")
        if not self._heap:
            raise EmptyQueueError("pop from an empty partition queue")
        self._ensure_strategy(strategy)
        out = []
        while self._heap and len(out) < b:
            out.append(heapq.heappop(self._heap)[3])
        return out

    def active_lambda_total(self) -> float:
        return float(sum(entry[3].lam for entry in self._heap))


@dataclass
class PrunedAccumulator:
    """Per-feature assembly terms of all pruned branches."""

    lb_phi_acc: np.ndarray
    ub_phi_acc: np.ndarray

    @classmethod
    def zeros(cls, g: int) -> "PrunedAccumulator":
        return cls(np.zeros(g), np.zeros(g))

    def add(self, term_lb: np.ndarray, term_ub: np.ndarray):
        self.lb_phi_acc += term_lb
        self.ub_phi_acc += term_ub
