"""Shared fixtures: random network/problem factories and independent
reference computations (kept free of the package's propagation code so
they can serve as oracles for it)."""

import numpy as np

from shapbound import Activation, Affine, AttributionProblem, Network


def make_affine_net(rng, n_in, n_out=1, scale=1.0):
    w = rng.normal(size=(n_out, n_in)) * scale / np.sqrt(n_in)
    b = rng.normal(size=n_out) * 0.1
    return Network((Affine(w, b),), n_in, n_out)


def make_net(rng, n_in, hidden, n_out=1, activation="relu"):
    """Fully connected net with the given hidden widths, 1/sqrt(fan_in) scale."""
    layers = []
    width = n_in
    for h in hidden:
        layers.append(Affine(rng.normal(size=(h, width)) / np.sqrt(width),
                             rng.normal(size=h) * 0.1))
        layers.append(Activation(activation))
        width = h
    layers.append(Affine(rng.normal(size=(n_out, width)) / np.sqrt(width),
                         rng.normal(size=n_out) * 0.1))
    return Network(tuple(layers), n_in, n_out)


def make_problem(rng, net, num_background=5, kind="marginal", groups=None):
    n = net.input_dim
    x = rng.normal(size=n)
    rows = 1 if kind == "baseline" else num_background
    bg = rng.normal(size=(rows, n))
    return AttributionProblem(net, x, bg, kind=kind, target_output=0, groups=groups)


def relaxed_value(problem, mu):
    """The continuous extension of the masked value at a real-valued mask.

    Straightforward per-row forward evaluation; independent of the
    propagation machinery.
    """
    mu = np.asarray(mu, dtype=np.float64)
    bits = mu[problem.group_index]
    x = problem.explicand
    total = 0.0
    for z in problem.background:
        v = bits * x + (1.0 - bits) * z
        for layer in problem.net.layers:
            if isinstance(layer, Affine):
                v = layer.weight @ v + layer.bias
            elif layer.kind == "relu":
                v = np.maximum(v, 0.0)
            else:
                v = np.tanh(v)
        total += v[problem.target_output]
    return total / problem.background.shape[0]


def analytic_value_gradient(problem, mu):
    """Chain-rule gradient of the relaxed value at a real-valued mask.

    Hand-rolled forward/backward over the layer list; valid wherever no
    ReLU pre-activation is exactly zero.
    """
    mu = np.asarray(mu, dtype=np.float64)
    bits = mu[problem.group_index]
    x = problem.explicand
    g = problem.num_features
    grad_mu = np.zeros(g)
    for z in problem.background:
        v = bits * x + (1.0 - bits) * z
        pre_acts = []
        for layer in problem.net.layers:
            if isinstance(layer, Affine):
                v = layer.weight @ v + layer.bias
            else:
                pre_acts.append(v)
                v = np.maximum(v, 0.0) if layer.kind == "relu" else np.tanh(v)
        grad = np.zeros(problem.net.output_dim)
        grad[problem.target_output] = 1.0
        for layer in reversed(problem.net.layers):
            if isinstance(layer, Affine):
                grad = grad @ layer.weight
            else:
                pre = pre_acts.pop()
                if layer.kind == "relu":
                    grad = grad * (pre > 0.0)
                else:
                    grad = grad * (1.0 - np.tanh(pre) ** 2)
        per_feature = grad * (x - z)
        for j in range(g):
            grad_mu[j] += per_feature[problem.group_index == j].sum()
    return grad_mu / problem.background.shape[0]


def brute_force_branch_weight(n, r, s):
    """Sum of Eq.-style coalition weights over one branch, by enumeration.

    Coalitions S over n-1 other features with r fixed included, s - r
    fixed excluded, and the remaining n-1-s features free:
    sum_k C(n-1-s, k) * w(r+k) with w(k) = (1/n) / C(n-1, k).
    """
    import math

    total = 0.0
    free = n - 1 - s
    for k in range(free + 1):
        w = 1.0 / (n * math.comb(n - 1, r + k))
        total += math.comb(free, k) * w
    return total


def sample_masks_in_branch(rng, branch, count):
    """Random Boolean masks inside a branch's mask box, shape (count, g)."""
    g = branch.num_features
    free = branch.free_mask
    masks = np.tile(branch.mask_lb, (count, 1)).astype(np.uint8)
    if free.any():
        masks[:, free] = (rng.random((count, int(free.sum()))) < 0.5)
    return masks
