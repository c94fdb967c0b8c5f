"""Benchmark the hot kernel: compiled extension vs numpy fallback.

Usage: python benchmarks/bench_kernels.py [--samples 8192] [--nodes 1536]
"""
import argparse
import time

import numpy as np

from qdlab._kernels import BACKEND, available_backends


def bench(fn, omega, alpha, eta, weights, repeats=3):
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        out = fn(omega, alpha, eta, weights)
        best = min(best, time.perf_counter() - t0)
    return best, out


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--samples", type=int, default=8192)
    parser.add_argument("--nodes", type=int, default=1536)
    parser.add_argument("--factors", type=int, default=6)
    args = parser.parse_args()

    rng = np.random.default_rng(1)
    omega = (
        rng.standard_normal((args.samples, args.factors)) * 2.0
        + 3.0
        - 0.05j * rng.random((args.samples, args.factors))
    )
    alpha = np.linspace(-2.0, 8.0, args.nodes)
    t = 20.0
    weights = np.exp(-1j * alpha * t) * (10.0 / args.nodes) / (2 * np.pi) + 0j

    print(f"active backend: {BACKEND}")
    print(f"shape: samples={args.samples} nodes={args.nodes} factors={args.factors}")
    results = {}
    for name, fn in available_backends().items():
        seconds, out = bench(fn, omega, alpha, 0.05, weights)
        results[name] = (seconds, out)
        rate = args.samples * args.nodes * args.factors / seconds / 1e9
        print(f"  {name:9s}: {seconds * 1e3:8.1f} ms   ({rate:.2f} Gfactor/s)")
    if len(results) == 2:
        diff = np.max(np.abs(results["python"][1] - results["compiled"][1]))
        speedup = results["python"][0] / results["compiled"][0]
        print(f"  agreement: max |diff| = {diff:.3e}")
        print(f"  speedup:   {speedup:.1f}x")


if __name__ == "__main__":
    main()
