"""Time the compiled integration kernel against the pure-Python fallback.

    python3 benchmarks/bench_kernels.py [--horizon 400] [--dt 0.01] [--repeat 3]

Both backends run the same bench39 scenario; the script also reports the
largest state difference between them.
"""
import argparse
import time

import numpy as np

from gitsmc_lfc import bench39, kernels
from gitsmc_lfc.sim import run_scenario


def best_time(cfg, backend, repeat):
    times, trace = [], None
    for _ in range(repeat):
        t0 = time.perf_counter()
        trace = run_scenario(cfg, backend=backend)
        times.append(time.perf_counter() - t0)
    return min(times), trace


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--horizon", type=float, default=400.0)
    ap.add_argument("--dt", type=float, default=0.01)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)
    print(f"default backend: {kernels.BACKEND}")
    for controller in ("gitsmc", "pi"):
        cfg = bench39.builtin_benchmark(controller, dt=args.dt).with_horizon(args.horizon)
        rows = {}
        for backend in ("cython", "python"):
            if backend == "cython" and kernels.BACKEND != "cython":
                continue
            rows[backend] = best_time(cfg, backend, 1 if backend == "python" else args.repeat)
        line = f"{controller:6s} {cfg.n_steps} steps:"
        for name, (t, _) in rows.items():
            line += f"  {name} {t:.3f} s"
        if len(rows) == 2:
            (tc, a), (tp, b) = rows["cython"], rows["python"]
            line += f"  speedup {tp / tc:.1f}x  max |dx| {np.abs(a.x - b.x).max():.1e}"
        print(line)


if __name__ == "__main__":
    main()
