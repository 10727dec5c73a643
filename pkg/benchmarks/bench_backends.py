"""Time the numba and numpy trajectory kernels on the same ensembles.

    python3 benchmarks/bench_backends.py [--nbar 1000] [--trajectories 2000] [--repeat 3]

Prints wall time per call, nanoseconds per trajectory step and the speedup of
numba over numpy for each feedback policy, after a warm-up call that absorbs
JIT compilation.
"""

import argparse
import time

from dynephase.policies import ConstantEpsilon, Corrected, Heterodyne, MarkII, TimeEpsilon, describe
from dynephase.sde import TimeGrid, simulate_ensemble
from dynephase.squeezed import make_optimal_squeezed


def best_time(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--nbar", type=float, default=1000.0)
    ap.add_argument("--trajectories", type=int, default=2000)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()

    state = make_optimal_squeezed(args.nbar)
    grid = TimeGrid.step_rule(args.nbar)
    steps = grid.n_steps * args.trajectories
    print(f"nbar={args.nbar:g}  trajectories={args.trajectories}  steps/trajectory={grid.n_steps}")
    print(f"{'policy':44s} {'numba s':>9s} {'ns/step':>8s} {'numpy s':>9s} {'ns/step':>8s} {'speedup':>8s}")
    for policy in (MarkII(), ConstantEpsilon(0.5), TimeEpsilon(), Corrected(lam=1e-3), Heterodyne()):
        res = {}
        for backend in ("numba", "numpy"):
            def call(b=backend):
                simulate_ensemble(state, policy, grid, range(args.trajectories), 1,
                                  random_phase=True, backend=b)
            simulate_ensemble(state, policy, grid, range(16), 1, backend=backend)  # warm-up
            res[backend] = best_time(call, args.repeat)
        nb, npy = res["numba"], res["numpy"]
        print(f"{describe(policy):44s} {nb:9.3f} {1e9 * nb / steps:8.1f} {npy:9.3f} "
              f"{1e9 * npy / steps:8.1f} {npy / nb:8.1f}x")


if __name__ == "__main__":
    main()
