"""Time the pairwise kernel loops on both backends.

    python benchmarks/bench_kernels.py [--sizes 8 12 16] [--repeat 3]

For each grid size the full node set of the H^1 box (-1, 1)^3 is used as both
targets and sources, which is the shape of the work done by form assembly and
by the Gagliardo energy.
"""
import argparse
import os
import sys
import timeit

import numpy as np

from carnoteig import GroupSpec, build_grid, kernels


def bench(n, repeat, backends):
    spec = GroupSpec.heisenberg(1)
    grid, _ = build_grid(spec, (-1.0, 1.0), n)
    x = grid.nodes
    v = np.random.default_rng(0).standard_normal(len(x))
    alpha = spec.Q + 1.0
    jobs = {
        "pair_weights": lambda b: kernels.pair_weights(spec, x, x, alpha, backend=b),
        "difference_rows": lambda b: kernels.difference_rows(spec, x, v, x, v, alpha, 3.0, backend=b),
    }
    rows = []
    for name, job in jobs.items():
        best = {}
        for b in backends:
            job(b)
            best[b] = min(timeit.repeat(lambda: job(b), number=1, repeat=repeat))
        rows.append((n, len(x), name, best))
    return rows


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sizes", type=int, nargs="+", default=[8, 12, 16])
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)

    backends = ["python"]
    try:
        from carnoteig import _kernels_ext  # noqa: F401
        backends.append("compiled")
    except ImportError:
        print("compiled backend not built; timing the python fallback only", file=sys.stderr)

    print(f"threads={os.environ.get('CARNOT_THREADS', 'auto')}")
    print(f"{'N':>4} {'nodes':>6} {'kernel':<16}" + "".join(f"{b:>12}" for b in backends)
          + ("     speedup" if len(backends) == 2 else ""))
    for n in args.sizes:
        for n_, size, name, best in bench(n, args.repeat, backends):
            line = f"{n_:>4} {size:>6} {name:<16}" + "".join(f"{best[b]:>11.4f}s" for b in backends)
            if len(backends) == 2:
                line += f"{best['python'] / best['compiled']:>11.1f}x"
            print(line)


if __name__ == "__main__":
    main()
