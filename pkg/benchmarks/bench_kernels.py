"""Timing comparison of the compiled BFS kernels vs the pure-Python fallback.

Usage: python benchmarks/bench_kernels.py [--n 400] [--seed 0] [--repeat 3]
"""

from __future__ import annotations

import argparse
import os
import time

import numpy as np


def random_view(n: int, avg_degree: float, seed: int):
    from catnet.graph import HomoView

    rng = np.random.default_rng(seed)
    p = avg_degree / (n - 1)
    sets = [set() for _ in range(n)]
    iu = np.triu_indices(n, k=1)
    mask = rng.random(len(iu[0])) < p
    for u, v in zip(iu[0][mask], iu[1][mask]):
        sets[int(u)].add(int(v))
        sets[int(v)].add(int(u))
    return HomoView(sets)


def bench(fn, args, repeat: int) -> float:
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--n", type=int, default=400)
    ap.add_argument("--avg-degree", type=float, default=8.0)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()

    view = random_view(args.n, args.avg_degree, args.seed)
    print(f"graph: {view.n_nodes} nodes, {view.n_edges} edges")

    from catnet.kernels import _pure

    try:
        from catnet.kernels import _ckern
    except ImportError:
        _ckern = None
        print("compiled kernels unavailable; timing pure backend only")

    for name in ("closeness_paths", "betweenness"):
        t_pure = bench(getattr(_pure, name), (view.indptr, view.indices), args.repeat)
        line = f"{name:18s} pure: {t_pure * 1e3:9.2f} ms"
        if _ckern is not None:
            t_c = bench(getattr(_ckern, name), (view.indptr, view.indices), args.repeat)
            line += f"   compiled: {t_c * 1e3:9.2f} ms   speedup: {t_pure / t_c:6.1f}x"
        print(line)


if __name__ == "__main__":
    main()
