"""Compare the compiled iteration kernels against the numpy fallback.

Runs the two data-driven solves end to end on a ladder of grid sizes, once
per backend, and reports best-of-N wall times plus the sup-norm disagreement
between the two backends' solutions (which should sit at rounding level).

    python3 benchmarks/bench_kernels.py [--sizes 200 800 3200] [--repeats 5]
"""

import argparse
import time

import numpy as np

from phibvp import Grid, PhiMap
from phibvp import kernels
from phibvp.auxiliary import solve_dirichlet, solve_neumann


def _time_best(fn, repeats):
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def _h(grid):
    return 0.4 * np.sin(2.0 * np.pi * grid.nodes / grid.big_t) + 0.1


def run_case(label, solve, repeats):
    kernels.force_pure_python(False)
    if kernels.active_backend() != "compiled":
        print(f"{label}: compiled extension not available; nothing to compare")
        return
    t_fast, u_fast = _time_best(solve, repeats)
    kernels.force_pure_python(True)
    try:
        t_pure, u_pure = _time_best(solve, repeats)
    finally:
        kernels.force_pure_python(False)
    dev = float(np.max(np.abs(u_fast - u_pure)))
    print(
        f"{label:<26} compiled {t_fast * 1e3:8.2f} ms   numpy {t_pure * 1e3:8.2f} ms   "
        f"speedup {t_pure / t_fast:5.2f}x   sup|diff| {dev:.2e}"
    )


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--sizes", type=int, nargs="+", default=[200, 800, 3200])
    parser.add_argument("--repeats", type=int, default=5)
    args = parser.parse_args()

    phi = PhiMap.relativistic(1.0)
    for m in args.sizes:
        grid = Grid(1.0, m)
        h = _h(grid)
        flux = (np.array([0.2]), np.array([-0.1]))
        pins = (np.array([0.0]), np.array([0.6]))
        run_case(
            f"flux data      M={m}",
            lambda: solve_neumann(phi, h, flux[0], flux[1], grid).values,
            args.repeats,
        )
        run_case(
            f"pinned data    M={m}",
            lambda: solve_dirichlet(phi, h, pins[0], pins[1], grid).values,
            args.repeats,
        )


if __name__ == "__main__":
    main()
