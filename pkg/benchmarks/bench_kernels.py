"""Time every kernel under the compiled and the numpy backend.

    python benchmarks/bench_kernels.py [--repeat N]
"""

import argparse
import timeit

import numpy as np

from netdefense import kernels
from netdefense.graph import erdos_renyi


def cases():
    net = erdos_renyi(30, 4.0, seed=1)
    small = erdos_renyi(12, 3.0, seed=2)
    indptr, indices = net.csr
    sp, si = small.csr
    rng = np.random.default_rng(0)
    mask = (rng.random(net.n) < 0.7).astype(np.uint8)
    x = (rng.random((4096, net.n)) < 0.7).astype(np.uint8)
    seeds = rng.integers(0, net.n, 4096)
    keep = rng.random(net.n)
    R, T = 64, 50
    beta = np.full((R, net.n), 0.8)
    sigma0 = (rng.random((R, net.n)) < 0.05).astype(np.uint8)
    u = rng.random((R, T, net.n))
    return {
        "components_masked n=30": lambda k: k.components_masked(indptr, indices, mask),
        "state_labels n=12": lambda k: k.state_labels(sp, si, small.n),
        "mc_infected_counts 4096x30": lambda k: k.mc_infected_counts(indptr, indices, x, seeds),
        "walk_matrix L=4 grad": lambda k: k.walk_matrix(indptr, indices, keep, 4, True),
        "dynamics_batch 64x50": lambda k: k.dynamics_batch(indptr, indices, beta, sigma0, u, 0.9, 0.0, 0.0),
    }


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    names = kernels.available()
    print(f"{'kernel':<30}" + "".join(f"{n:>12}" for n in names) + ("     speedup" if len(names) > 1 else ""))
    for label, fn in cases().items():
        times = []
        for name in names:
            with kernels.backend_set(name):
                k = kernels.backend()
                fn(k)  # warm-up
                times.append(min(timeit.repeat(lambda: fn(k), number=1, repeat=args.repeat)))
        row = f"{label:<30}" + "".join(f"{t * 1e3:>10.3f}ms" for t in times)
        if len(times) > 1:
            row += f"{times[names.index('python')] / times[names.index('cython')]:>11.1f}x"
        print(row)


if __name__ == "__main__":
    main()
