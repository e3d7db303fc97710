"""Numba versus numpy timings for the tridiagonal kernels.

Runs both implementations in one process on the same random systems,
checks that they agree, then times an end-to-end batched mode solve
(the Bromwich-line workload) with each backend.

    python3 benchmarks/bench_kernels.py [--batch 4096] [--n 161] [--repeat 5]
"""

import argparse
import time

import numpy as np

from layerwave import _kernels
from layerwave.model import PmlConfig, StripGeometry
from layerwave.stripsolver import Grid1D, GridSpec, ModeProblem, SourceSpec, solve_mode_batch
from layerwave.timedomain import BromwichGrid


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def random_systems(rng, batch, n):
    shape = (batch, n)
    lower = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
    upper = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
    # diagonally dominant so elimination without pivoting is safe
    diag = 4.0 + np.abs(lower) + np.abs(upper) + 1j * rng.standard_normal(shape)
    rhs = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
    return lower, diag, upper, rhs


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--batch", type=int, default=4096)
    ap.add_argument("--n", type=int, default=161)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()

    if _kernels._thomas_numba is None:
        print("numba not installed; only the numpy path is available")
        return

    rng = np.random.default_rng(0)
    lo, di, up, rhs = random_systems(rng, args.batch, args.n)

    # warm-up compiles the jitted kernels
    x_nb = _kernels._thomas_numba(lo, di, up, rhs)
    x_np = _kernels._thomas_numpy(lo, di, up, rhs)
    agree = np.max(np.abs(x_nb - x_np)) / np.max(np.abs(x_np))
    y_nb = _kernels._matvec_numba(lo, di, up, x_nb)
    y_np = _kernels._matvec_numpy(lo, di, up, x_nb)
    resid = np.max(np.abs(y_np - rhs)) / np.max(np.abs(rhs))

    print(f"systems: batch={args.batch} n={args.n}")
    print(f"solutions agree to {agree:.2e}; residual {resid:.2e}; matvec agree {np.max(np.abs(y_nb - y_np)):.2e}")
    print(f"{'kernel':<22}{'numpy [ms]':>12}{'numba [ms]':>12}{'speedup':>10}")
    rows = [
        ("thomas_batch", lambda: _kernels._thomas_numpy(lo, di, up, rhs), lambda: _kernels._thomas_numba(lo, di, up, rhs)),
        ("tridiag_matvec_batch", lambda: _kernels._matvec_numpy(lo, di, up, x_nb),
         lambda: _kernels._matvec_numba(lo, di, up, x_nb)),
    ]

    # end to end: one mode on a full Bromwich line, PML layer grid
    pml = PmlConfig(s1=0.1)
    geo = StripGeometry()
    grid = Grid1D.build(geo, GridSpec(40, 40, 40, 40), pml)
    prob = ModeProblem((1.0, 0.5), complex(0.1, 0.0), "TE", "PML_LAYER", SourceSpec.hat(-0.5, 0.0, 0.5), grid,
                       pml=pml)
    s_line = BromwichGrid(0.1, 40.0, args.batch).s

    def mode_batch(flag):
        def run():
            saved = _kernels.USE_NUMBA
            _kernels.USE_NUMBA = flag
            try:
                solve_mode_batch(prob, s_line)
            finally:
                _kernels.USE_NUMBA = saved
        return run

    mode_batch(True)()
    rows.append(("solve_mode_batch", mode_batch(False), mode_batch(True)))

    for name, f_np, f_nb in rows:
        t_np = best_of(f_np, args.repeat)
        t_nb = best_of(f_nb, args.repeat)
        print(f"{name:<22}{1e3 * t_np:>12.2f}{1e3 * t_nb:>12.2f}{t_np / t_nb:>10.1f}")


if __name__ == "__main__":
    main()
