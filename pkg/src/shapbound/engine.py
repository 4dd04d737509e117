"""The branch-and-bound loop producing anytime SHAP bounds for all features.

Every iteration pops a batch of branches, splits each on a chosen feature,
propagates value bounds for the children (intersected with the parent's so
bounds only ever tighten), updates the per-feature SHAP bounds
incrementally, and prunes children whose value bounds are (near-)tight or
that are fully split.  When the queue empties the bounds have collapsed to
the exact SHAP values.

Per-feature bounds are assembled from per-branch value intervals by
category: for feature i a branch either includes i, excludes i, or leaves
it free, contributing

    lb_i  +=  lam * (s+1)/r     * lb_v     (i included; the coalition-weight
                                            sum of the matching S-without-i
                                            branch)
    lb_i  +=  lam * (lb_v - ub_v)          (i free)
    lb_i  -=  lam * (s+1)/(s-r) * ub_v     (i excluded)

and symmetrically for ub_i.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .coalition import (
    Branch,
    PartitionQueue,
    PrunedAccumulator,
    root_branch,
    split_branch,
)
from .errors import CategoryError, ConfigError, EmptyQueueError, NoFreeFeatureError
from .network import forward
from .propagate import Interval, Propagator
from .valuefn import AttributionProblem

SELECT_STRATEGIES = ("max_diam", "min_diam")
SPLIT_STRATEGIES = ("in_order", "smears", "strong_branching", "smart_branching_ibp")
PROPAGATION_METHODS = ("ibp", "lbp")
STATUSES = ("converged_exact", "reached_delta", "reached_hr", "timeout", "max_iter")

# Strong/smart branching simulate each candidate split; cap the number of
# candidates per branch to bound the cost.
MAX_SPLIT_CANDIDATES = 32


@dataclass
class EngineConfig:
    """Run parameters.  At least one stop criterion must be set."""

    batch_size: int = 64
    select_strategy: str = "max_diam"
    split_strategy: str = "smears"
    propagation: str = "lbp"
    delta: float | None = None
    hr_fraction: float | None = None
    timeout_seconds: float | None = None
    max_iterations: int | None = None
    prune_tol: float = 1e-12

    def validate(self):
        if self.batch_size < 1:
            raise ConfigError("batch_size must be >= 1")
        if self.select_strategy not in SELECT_STRATEGIES:
            raise ConfigError(f"unknown select strategy {self.select_strategy!r}")
        if self.split_strategy not in SPLIT_STRATEGIES:
            raise ConfigError(f"unknown split strategy {self.split_strategy!r}")
        if self.propagation not in PROPAGATION_METHODS:
            raise ConfigError(f"unknown propagation method {self.propagation!r}")
        if self.prune_tol < 0:
            raise ConfigError("prune_tol must be >= 0")
        if (self.delta is None and self.hr_fraction is None
                and self.timeout_seconds is None and self.max_iterations is None):
            raise ConfigError("at least one stop criterion must be set")


@dataclass
class BoundsState:
    """Anytime per-feature SHAP bounds plus run counters.

    ``lb_phi``/``ub_phi`` are the reported bounds, which are intersected
    with the previous iteration's bounds so the gap vector is nonincreasing
    by construction.  The raw incremental assembly is kept separately so it
    can be compared against a full re-assembly.
    """

    lb_phi: np.ndarray
    ub_phi: np.ndarray
    iteration: int = 1
    branches_explored: int = 0
    branches_pruned: int = 0
    raw_lb_phi: np.ndarray = field(default=None, repr=False)  # type: ignore[assignment]
    raw_ub_phi: np.ndarray = field(default=None, repr=False)  # type: ignore[assignment]
    next_seq: int = field(default=1, repr=False)

    def __post_init__(self):
        if self.raw_lb_phi is None:
            self.raw_lb_phi = self.lb_phi.copy()
        if self.raw_ub_phi is None:
            self.raw_ub_phi = self.ub_phi.copy()

    @property
    def gap(self) -> np.ndarray:
        return self.ub_phi - self.lb_phi

    @property
    def max_gap(self) -> float:
        return float(self.gap.max())


@dataclass(frozen=True)
class TraceRecord:
    iteration: int
    active_branches: int
    pruned_total: int
    max_gap: float
    wall_seconds: float
    lb_phi: np.ndarray
    ub_phi: np.ndarray


@dataclass
class RunResult:
    bounds: BoundsState
    trace: list[TraceRecord]
    status: str


def branch_terms(branches: list[Branch]) -> tuple[np.ndarray, np.ndarray]:
    """Per-branch, per-feature assembly terms; returns (N, g) lb/ub arrays."""
    n = len(branches)
    g = branches[0].num_features
    in_m = np.empty((n, g), dtype=bool)
    ub_m = np.empty((n, g), dtype=bool)
    lam = np.empty(n)
    lv = np.empty(n)
    uv = np.empty(n)
    rr = np.empty(n)
    ss = np.empty(n)
    for idx, br in enumerate(branches):
        if br.value_bounds is None:
            raise ValueError("branch must be propagated before assembly")
        in_m[idx] = br.mask_lb.astype(bool)
        ub_m[idx] = br.mask_ub.astype(bool)
        lam[idx] = br.lam
        lv[idx] = br.value_bounds.lb
        uv[idx] = br.value_bounds.ub
        rr[idx] = br.r
        ss[idx] = br.s
    ex_m = ~ub_m
    free_m = ub_m & ~in_m

    if np.any(in_m.any(axis=1) & (rr == 0)):
        raise CategoryError("branch includes a feature but has r = 0")
    if np.any(ex_m.any(axis=1) & (ss == rr)):
        raise CategoryError("branch excludes a feature but has s = r")

    lam_minus = np.zeros(n)
    has_in = rr > 0
    lam_minus[has_in] = lam[has_in] * (ss[has_in] + 1.0) / rr[has_in]
    lam_plus = np.zeros(n)
    has_ex = ss > rr
    lam_plus[has_ex] = lam[has_ex] * (ss[has_ex] + 1.0) / (ss[has_ex] - rr[has_ex])

    gap = lam * (uv - lv)
    term_lb = (in_m * (lam_minus * lv)[:, None]
               - free_m * gap[:, None]
               - ex_m * (lam_plus * uv)[:, None])
    term_ub = (in_m * (lam_minus * uv)[:, None]
               + free_m * gap[:, None]
               - ex_m * (lam_plus * lv)[:, None])
    return term_lb, term_ub


def assemble(branches, acc: PrunedAccumulator) -> tuple[np.ndarray, np.ndarray]:
    """Full per-feature bound assembly over a branch collection + accumulator."""
    branches = list(branches)
    if not branches:
        return acc.lb_phi_acc.copy(), acc.ub_phi_acc.copy()
    term_lb, term_ub = branch_terms(branches)
    return (acc.lb_phi_acc + term_lb.sum(axis=0),
            acc.ub_phi_acc + term_ub.sum(axis=0))


def _choose_split_features(branches: list[Branch], strategy: str,
                           propagator: Propagator, method: str) -> list[int]:
    """The split feature for each branch in a batch (indices are 0-based)."""
    for br in branches:
        if br.num_free == 0:
            raise NoFreeFeatureError("branch is fully split")

    if strategy == "in_order":
        return [int(np.argmax(br.free_mask)) for br in branches]

    if strategy == "smears":
        mlb = np.stack([br.mask_lb for br in branches]).astype(np.float64)
        mub = np.stack([br.mask_ub for br in branches]).astype(np.float64)
        glb, gub = propagator.gradient_bounds(mlb, mub)
        score = np.maximum(np.abs(glb), np.abs(gub))
        out = []
        for idx, br in enumerate(branches):
            masked = np.where(br.free_mask, score[idx], -np.inf)
            out.append(int(np.argmax(masked)))  # argmax takes the first max
        return out

    # strong_branching / smart_branching_ibp: simulate candidate splits.
    sim_method = "ibp" if strategy == "smart_branching_ibp" else method
    cand_lb, cand_ub = [], []
    candidates: list[np.ndarray] = []
    for br in branches:
        free_idx = np.flatnonzero(br.free_mask)[:MAX_SPLIT_CANDIDATES]
        candidates.append(free_idx)
        base_lb = br.mask_lb.astype(np.float64)
        base_ub = br.mask_ub.astype(np.float64)
        for j in free_idx:
            lb_in = base_lb.copy()
            lb_in[j] = 1.0
            cand_lb.append(lb_in)
            cand_ub.append(base_ub)
            ub_out = base_ub.copy()
            ub_out[j] = 0.0
            cand_lb.append(base_lb)
            cand_ub.append(ub_out)
    lv, uv = propagator.value_bounds(np.stack(cand_lb), np.stack(cand_ub),
                                     method=sim_method)
    widths = uv - lv
    out = []
    pos = 0
    for free_idx in candidates:
        pair_scores = np.maximum(widths[pos:pos + 2 * len(free_idx):2],
                                 widths[pos + 1:pos + 2 * len(free_idx):2])
        out.append(int(free_idx[int(np.argmin(pair_scores))]))
        pos += 2 * len(free_idx)
    return out


def choose_split_feature(branch: Branch, strategy: str,
                         problem: AttributionProblem, method: str = "lbp",
                         propagator: Propagator | None = None) -> int:
    """Pick the feature to split for a single branch."""
    if strategy not in SPLIT_STRATEGIES:
        raise ValueError(f"unknown split strategy {strategy!r}")
    if propagator is None:
        propagator = Propagator(problem)
    return _choose_split_features([branch], strategy, propagator, method)[0]


def _update_reported(state: BoundsState):
    """Intersect the raw assembly with the previous reported bounds."""
    new_lb = np.maximum(state.raw_lb_phi, state.lb_phi)
    new_ub = np.minimum(state.raw_ub_phi, state.ub_phi)
    inverted = new_lb > new_ub  # only rounding noise on collapsed bounds
    if np.any(inverted):
        mid = 0.5 * (new_lb[inverted] + new_ub[inverted])
        new_lb[inverted] = mid
        new_ub[inverted] = mid
    state.lb_phi = new_lb
    state.ub_phi = new_ub


def step(state: BoundsState, queue: PartitionQueue, acc: PrunedAccumulator,
         config: EngineConfig, problem: AttributionProblem,
         propagator: Propagator | None = None) -> BoundsState:
    """One refinement iteration: pop a batch, split, propagate, update, prune."""
    if len(queue) == 0:
        raise EmptyQueueError("cannot step with an empty queue")
    if propagator is None:
        propagator = Propagator(problem)

    batch = queue.pop_batch(config.batch_size, config.select_strategy)
    split_js = _choose_split_features(batch, config.split_strategy, propagator,
                                      config.propagation)
    children: list[Branch] = []
    for parent, j in zip(batch, split_js):
        child_in, child_out = split_branch(parent, j, seq_start=state.next_seq)
        state.next_seq += 2
        children.extend((child_in, child_out))

    mlb = np.stack([c.mask_lb for c in children]).astype(np.float64)
    mub = np.stack([c.mask_ub for c in children]).astype(np.float64)
    lv, uv = propagator.value_bounds(mlb, mub, method=config.propagation)
    for idx, child in enumerate(children):
        parent = batch[idx // 2]
        lo = max(float(lv[idx]), parent.value_bounds.lb)
        hi = min(float(uv[idx]), parent.value_bounds.ub)
        if lo > hi:  # rounding noise between the two computation paths
            lo, hi = hi, lo
        child.value_bounds = Interval(lo, hi)

    parent_lb, parent_ub = branch_terms(batch)
    child_lb, child_ub = branch_terms(children)
    state.raw_lb_phi += child_lb.sum(axis=0) - parent_lb.sum(axis=0)
    state.raw_ub_phi += child_ub.sum(axis=0) - parent_ub.sum(axis=0)

    for idx, child in enumerate(children):
        if child.value_bounds.width <= config.prune_tol or child.num_free == 0:
            acc.add(child_lb[idx], child_ub[idx])
            queue.pruned_count += 1
            queue.pruned_lambda_total += child.lam
            state.branches_pruned += 1
        else:
            queue.push(child)

    state.branches_explored += len(batch)
    state.iteration += 1
    _update_reported(state)
    return state


def _stop_status(state: BoundsState, queue: PartitionQueue, config: EngineConfig,
                 abs_target_output: float, elapsed: float) -> str | None:
    if len(queue) == 0:
        return "converged_exact"
    max_gap = state.max_gap
    if config.delta is not None and max_gap <= config.delta:
        return "reached_delta"
    if (config.hr_fraction is not None
            and max_gap / 2.0 <= config.hr_fraction * abs_target_output):
        return "reached_hr"
    if config.timeout_seconds is not None and elapsed >= config.timeout_seconds:
        return "timeout"
    if config.max_iterations is not None and state.iteration >= config.max_iterations:
        return "max_iter"
    return None


def run(problem: AttributionProblem, config: EngineConfig,
        on_iteration=None) -> RunResult:
    """Iterate refinement steps until a stop criterion fires or the queue
    empties (in which case the bounds are the exact SHAP values).

    ``on_iteration(state, queue, acc)``, when given, is called after every
    iteration (including the initial root assembly); it is an inspection
    hook and must not mutate its arguments.
    """
    config.validate()
    g = problem.num_features
    propagator = Propagator(problem)
    abs_target = abs(float(
        forward(problem.net, problem.explicand)[problem.target_output]
    ))

    start = time.perf_counter()
    root = root_branch(g)
    lv, uv = propagator.value_bounds(
        np.zeros((1, g)), np.ones((1, g)), method=config.propagation
    )
    root.value_bounds = Interval(float(lv[0]), float(uv[0]))
    queue = PartitionQueue()
    queue.push(root)
    acc = PrunedAccumulator.zeros(g)
    lb0, ub0 = assemble([root], acc)
    state = BoundsState(lb_phi=lb0, ub_phi=ub0)

    trace: list[TraceRecord] = []

    def record():
        trace.append(TraceRecord(
            iteration=state.iteration,
            active_branches=len(queue),
            pruned_total=queue.pruned_count,
            max_gap=state.max_gap,
            wall_seconds=time.perf_counter() - start,
            lb_phi=state.lb_phi.copy(),
            ub_phi=state.ub_phi.copy(),
        ))
        if on_iteration is not None:
            on_iteration(state, queue, acc)

    record()
    status = _stop_status(state, queue, config, abs_target,
                          time.perf_counter() - start)
    while status is None:
        step(state, queue, acc, config, problem, propagator)
        record()
        status = _stop_status(state, queue, config, abs_target,
                              time.perf_counter() - start)
    return RunResult(bounds=state, trace=trace, status=status)
