"""Time the compiled and NumPy reservoir kernels on the same workload.

Usage::

    python benchmarks/bench_kernels.py [--nodes 64] [--steps 2000] [--repeat 5]

Both paths (sparse and dense) are timed for every available backend, and
the outputs are checked for bit-equality before anything is reported.
"""
import argparse
import time

import numpy as np

from rcbo import reservoir as rs
from rcbo import tasks
from rcbo.hyperspace import HyperPoint


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--nodes", type=int, default=64)
    ap.add_argument("--inputs", type=int, default=20)
    ap.add_argument("--steps", type=int, default=2000)
    ap.add_argument("--rho", type=float, default=0.05)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)

    cfg = rs.ReservoirConfig(args.nodes, args.inputs, HyperPoint(0.9, 0.1, 0.05, args.rho))
    W, b = rs.generate_interconnection(cfg), rs.generate_input_mask(cfg)
    u = np.random.default_rng(0).normal(size=(args.steps, args.inputs))

    print(f"N={args.nodes} K={args.inputs} T={args.steps} rho={args.rho} "
          f"(off-diagonal nonzeros {W.nnz_offdiag}, best of {args.repeat})")
    ref = None
    for backend in rs.available_backends():
        for path in ("sparse", "dense"):
            dt, out = best_of(lambda: rs.run_sequence(cfg, W, b, u, path=path, backend=backend),
                              args.repeat)
            if ref is None:
                ref = out
            same = "identical" if np.array_equal(out, ref) else "MISMATCH"
            print(f"  {backend:<7} {path:<6} {dt * 1e3:9.2f} ms  "
                  f"{dt / args.steps * 1e6:7.2f} us/step  {same}")

    # one full objective evaluation on the default synthetic task
    ds = tasks.generate_synthetic(tasks.SyntheticTaskSpec())
    point = HyperPoint(0.9, 0.1, 0.05, args.rho)
    rc = rs.ReservoirConfig(args.nodes, ds.n_features, point)
    for backend in rs.available_backends():
        dt, acc = best_of(lambda: tasks.evaluate_objective(ds, point, rc, backend=backend),
                          args.repeat)
        print(f"  objective on {len(ds)} sequences, {backend:<7} {dt * 1e3:9.1f} ms  "
              f"accuracy {acc:.3f}")


if __name__ == "__main__":
    main()
