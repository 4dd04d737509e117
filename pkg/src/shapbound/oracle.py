"""Brute-force exact SHAP by full coalition enumeration.

Ground truth for verifying the branch-and-bound engine: evaluates the
masked value function at all 2^g masks once and accumulates the classical
weighted marginal contributions per feature.  Guarded to g <= 20.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from . import engine as _engine
from .errors import TooManyFeaturesError
from .valuefn import AttributionProblem, value_batch

MAX_ORACLE_FEATURES = 20

_EVAL_CHUNK = 1 << 14


@dataclass(frozen=True)
class ExactShapResult:
    phi: np.ndarray
    coalitions_evaluated: int


def shapley_weights(n: int) -> np.ndarray:
    """Coalition weights w(k) = (1/n) / C(n-1, k) for k = 0..n-1.

    Built by the recursive ratio w(k+1) = w(k) * (k+1) / (n-1-k) so no
    large binomials are ever formed.
    """
    w = np.empty(n)
    w[0] = 1.0 / n
    for k in range(n - 1):
        w[k + 1] = w[k] * (k + 1) / (n - 1 - k)
    return w


def _guard(g: int):
    if g > MAX_ORACLE_FEATURES:
        raise TooManyFeaturesError(
            f"enumeration over {g} features would evaluate 2^{g} coalitions "
            f"(guard is g <= {MAX_ORACLE_FEATURES})"
        )


def all_mask_values(problem: AttributionProblem) -> np.ndarray:
    """The masked value at every one of the 2^g Boolean masks.

    Entry m holds the value of the mask whose bit j equals
    ``(m >> j) & 1``.
    """
    g = problem.num_features
    _guard(g)
    total = 1 << g
    bit_cols = np.arange(g, dtype=np.int64)
    values = np.empty(total)
    for start in range(0, total, _EVAL_CHUNK):
        codes = np.arange(start, min(start + _EVAL_CHUNK, total), dtype=np.int64)
        masks = (codes[:, None] >> bit_cols) & 1
        values[start:start + codes.shape[0]] = value_batch(problem, masks)
    return values


def exact_shap(problem: AttributionProblem) -> ExactShapResult:
    """Exact SHAP values of every feature by full enumeration."""
    g = problem.num_features
    _guard(g)
    values = all_mask_values(problem)
    weights = shapley_weights(g)
    codes = np.arange(1 << g, dtype=np.int64)
    popcount = np.bitwise_count(codes)
    phi = np.empty(g)
    for i in range(g):
        bit = 1 << i
        without = codes[(codes & bit) == 0]
        phi[i] = np.sum(
            weights[popcount[without]] * (values[without + bit] - values[without])
        )
    return ExactShapResult(phi=phi, coalitions_evaluated=1 << g)


def permutation_shap(problem: AttributionProblem) -> np.ndarray:
    """Independent cross-check: average marginal contribution over all g!
    feature orderings.  Exponentially slower; intended for g <= 6."""
    g = problem.num_features
    if g > 8:
        raise TooManyFeaturesError("permutation enumeration is limited to g <= 8")
    values = all_mask_values(problem)
    phi = np.zeros(g)
    count = 0
    for order in itertools.permutations(range(g)):
        code = 0
        for i in order:
            with_i = code | (1 << i)
            phi[i] += values[with_i] - values[code]
            code = with_i
        count += 1
    return phi / math.factorial(g)


@dataclass
class CheckReport:
    """Containment report of the engine's bounds against the enumeration."""

    contained: bool
    max_violation: float
    max_abs_error: float
    status: str
    phi: np.ndarray
    lb_phi: np.ndarray
    ub_phi: np.ndarray


def check_engine(problem: AttributionProblem, config: "_engine.EngineConfig",
                 slack: float = 1e-9) -> CheckReport:
    """Run both the engine and the enumeration; report containment.

    ``max_violation`` is how far any exact value escapes its bound interval
    (0 when contained); ``max_abs_error`` is max_i |phi_i - lb_phi_i|,
    which measures accuracy at convergence.
    """
    _guard(problem.num_features)
    result = _engine.run(problem, config)
    phi = exact_shap(problem).phi
    below = result.bounds.lb_phi - phi
    above = phi - result.bounds.ub_phi
    violation = float(np.maximum(below, above).max())
    return CheckReport(
        contained=bool(violation <= slack),
        max_violation=max(violation, 0.0),
        max_abs_error=float(np.abs(phi - result.bounds.lb_phi).max()),
        status=result.status,
        phi=phi,
        lb_phi=result.bounds.lb_phi,
        ub_phi=result.bounds.ub_phi,
    )
