"""Benchmark the compiled endpoint kernels against the pure-numpy fallback.

Runs the same workloads (single-schedule endpoint evaluation and the batched
variant the oracle screening uses) under both backends and reports timings
plus the worst agreement error.  Invoke from the repository root:

    python3 benchmarks/kernel_bench.py [--steps 32] [--batch 64] [--repeats 200]
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from driftless3d import (
    HAS_NUMBA,
    PackedSystem,
    endpoint,
    endpoints_batch,
    get_backend,
    get_fixture,
    set_backend,
)


def build_workload(batch: int, rng: np.random.Generator):
    system = get_fixture("generic")
    packed = PackedSystem(system)
    q0 = np.zeros(3)
    controls = np.array(
        [(-1.0, 1.0), (1.0, 1.0), (1.0, -1.0), (-1.0, -1.0), (-1.0, 1.0), (1.0, 1.0)]
    )
    durations = rng.uniform(0.02, 0.12, size=controls.shape[0])
    batch_durations = rng.uniform(0.02, 0.12, size=(batch, controls.shape[0]))
    return packed, q0, controls, durations, batch_durations


def time_backend(name: str, packed, q0, controls, durations, batch_durations, steps, repeats):
    set_backend(name)
    # one warm call so jit compilation is not billed to the loop
    endpoint(packed, q0, controls, durations, steps)
    endpoints_batch(packed, q0, controls, batch_durations, steps)

    t0 = time.perf_counter()
    for _ in range(repeats):
        single = endpoint(packed, q0, controls, durations, steps)
    t_single = (time.perf_counter() - t0) / repeats

    t0 = time.perf_counter()
    for _ in range(repeats):
        batched = endpoints_batch(packed, q0, controls, batch_durations, steps)
    t_batch = (time.perf_counter() - t0) / repeats

    return t_single, t_batch, single, batched


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--steps", type=int, default=32, help="RK4 steps per arc")
    parser.add_argument("--batch", type=int, default=64, help="schedules per batched call")
    parser.add_argument("--repeats", type=int, default=200, help="timing loop length")
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    rng = np.random.default_rng(args.seed)
    workload = build_workload(args.batch, rng)
    original = get_backend()

    backends = ["numpy"] + (["numba"] if HAS_NUMBA else [])
    results = {}
    try:
        for name in backends:
            results[name] = time_backend(name, *workload, args.steps, args.repeats)
    finally:
        set_backend(original)

    print(f"workload: 6-arc schedule, steps={args.steps}, batch={args.batch}, repeats={args.repeats}")
    print(f"{'backend':<8} {'endpoint':>12} {'batch':>12} {'batch/schedule':>15}")
    for name in backends:
        t_single, t_batch, _, _ = results[name]
        print(
            f"{name:<8} {t_single * 1e6:>10.1f}us {t_batch * 1e6:>10.1f}us"
            f" {t_batch / args.batch * 1e6:>13.2f}us"
        )

    if len(backends) == 2:
        t_np = results["numpy"]
        t_nb = results["numba"]
        print(f"speedup: endpoint x{t_np[0] / t_nb[0]:.1f}, batch x{t_np[1] / t_nb[1]:.1f}")
        err_single = float(np.max(np.abs(t_np[2] - t_nb[2])))
        err_batch = float(np.max(np.abs(t_np[3] - t_nb[3])))
        print(f"max backend disagreement: endpoint {err_single:.3g}, batch {err_batch:.3g}")
        if max(err_single, err_batch) > 1e-12:
            print("FAIL: backends disagree beyond 1e-12")
            return 1
    else:
        print("numba unavailable; timed the numpy fallback only")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
