#!/usr/bin/env python3
"""Benchmark the compiled kernel core against the NumPy fallback.

Micro-benchmarks time each kernel on engine-representative shapes
(branch batch x background rows flattened along the batch axis); the
end-to-end benchmark runs the full bounding engine on a 20-feature
problem under both backends.

Usage: python benchmarks/bench_kernels.py [--quick]
"""

import argparse
import time

import numpy as np

from shapbound import AttributionProblem, EngineConfig, kernels, run
from shapbound.network import Activation, Affine, Network


def best_of(fn, repeats, *args):
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def micro_cases(rng, batch):
    rows, cols = 16, 20
    lb = rng.normal(size=(batch, cols))
    ub = lb + rng.random((batch, cols))
    w = rng.normal(size=(rows, cols))
    b = rng.normal(size=rows)
    coef = rng.normal(size=(batch, cols))
    off = rng.normal(size=batch)
    slope = rng.random((batch, cols))
    icpt = rng.random((batch, cols))
    return {
        "affine_ibp": ("affine_ibp", (w, b, lb, ub)),
        "relu_relaxation": ("relu_relaxation", (lb, ub)),
        "tanh_relaxation": ("tanh_relaxation", (lb, ub)),
        "backsub": ("backsub", (coef, off, slope, icpt, slope, icpt)),
        "concretize_min": ("concretize_min", (coef, off, lb, ub)),
        "interval_matvec": ("interval_matvec", (lb, ub, w.T.copy())),
        "interval_scale": ("interval_scale", (lb, ub, np.abs(lb), np.abs(ub) + 1)),
        "tanh_derivative": ("tanh_derivative_interval", (lb, ub)),
    }


def engine_problem(rng):
    g = 20
    layers = (
        Affine(rng.normal(size=(8, g)) / np.sqrt(g), rng.normal(size=8) * 0.1),
        Activation("relu"),
        Affine(rng.normal(size=(1, 8)) / np.sqrt(8), rng.normal(size=1) * 0.1),
    )
    net = Network(layers, g, 1)
    x = rng.normal(size=g)
    background = rng.normal(size=(20, g))
    return AttributionProblem(net, x, background)


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--quick", action="store_true",
                        help="smaller batch and fewer repeats")
    args = parser.parse_args()

    backends = kernels.available_backends()
    if "compiled" not in backends:
        print("compiled core not built; benchmarking the fallback only")

    batch = 2_000 if args.quick else 20_000
    repeats = 3 if args.quick else 7
    rng = np.random.default_rng(0)
    cases = micro_cases(rng, batch)

    print(f"\nkernel micro-benchmarks (batch={batch}, best of {repeats}):")
    header = f"{'kernel':<18}" + "".join(f"{b:>12}" for b in backends)
    if len(backends) == 2:
        header += f"{'speedup':>10}"
    print(header)
    for label, (name, fn_args) in cases.items():
        times = {}
        for backend in backends:
            kernels.use_backend(backend)
            fn = getattr(kernels, name)
            fn(*fn_args)  # warm up
            times[backend] = best_of(fn, repeats, *fn_args)
        row = f"{label:<18}" + "".join(
            f"{times[b] * 1e3:>10.2f}ms" for b in backends
        )
        if len(backends) == 2:
            row += f"{times['python'] / times['compiled']:>9.2f}x"
        print(row)

    print("\nend-to-end engine run (20 features, 8 hidden units, 10% HR):")
    problem = engine_problem(np.random.default_rng(1))
    config = EngineConfig(batch_size=1024 if args.quick else 2048,
                          hr_fraction=0.10, max_iterations=100_000)
    for backend in backends:
        kernels.use_backend(backend)
        t0 = time.perf_counter()
        result = run(problem, config)
        elapsed = time.perf_counter() - t0
        print(f"  {backend:>9}: {elapsed:6.2f}s  status={result.status} "
              f"iterations={result.bounds.iteration} "
              f"expansions={result.bounds.branches_explored}")
    kernels.use_backend(backends[-1])


if __name__ == "__main__":
    main()
