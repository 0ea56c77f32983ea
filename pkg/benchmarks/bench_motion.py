#!/usr/bin/env python3
"""Benchmark the pallet motion kernel: compiled extension vs pure Python.

Runs the same randomized workload through both implementations, checks they
agree bit-for-bit, and reports throughput. The workload mirrors what the
acceptance suite's randomized audits do per tick.

    python benchmarks/bench_motion.py [--pallets N] [--iterations N]
"""

import argparse
import random
import time


def make_workload(rng, n_pallets, ring=8700):
    spacing = ring // max(n_pallets, 1)
    pos = sorted(rng.randrange(i * spacing, i * spacing + spacing // 2)
                 for i in range(n_pallets))
    movable = [1 if rng.random() < 0.8 else 0 for _ in range(n_pallets)]
    hold = [rng.choice((0, 0, 0, 3)) for _ in range(n_pallets)]
    stops = [1200, 2200, 3200, 4200, 5200, 6200, 7200]
    engaged = [1 if rng.random() < 0.7 else 0 for _ in stops]
    return pos, movable, hold, stops, engaged


def run(advance, iterations, n_pallets, seed=7):
    rng = random.Random(seed)
    pos, movable, hold, stops, engaged = make_workload(rng, n_pallets)
    outputs = []
    started = time.perf_counter()
    for i in range(iterations):
        new_pos, blocked = advance(
            pos, movable, list(hold), 5, stops, engaged, 7950, 10, 200, 50, 8700
        )
        pos = [p % 8700 for p in new_pos]
        if i % 97 == 0:
            engaged[i % len(engaged)] ^= 1
        outputs.append((tuple(pos), tuple(blocked)))
    elapsed = time.perf_counter() - started
    return elapsed, outputs


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--pallets", type=int, default=8)
    parser.add_argument("--iterations", type=int, default=200_000)
    args = parser.parse_args()

    from twinline.factory import _motion_py

    try:
        from twinline.factory import _motion
    except ImportError:
        _motion = None

    py_time, py_out = run(_motion_py.advance, args.iterations, args.pallets)
    print(f"pure python : {args.iterations / py_time:12.0f} ticks/s "
          f"({py_time:.2f}s for {args.iterations} ticks, {args.pallets} pallets)")

    if _motion is None:
        print("compiled    : extension not built (pip install -e . rebuilds it)")
        return

    cy_time, cy_out = run(_motion.advance, args.iterations, args.pallets)
    print(f"compiled    : {args.iterations / cy_time:12.0f} ticks/s "
          f"({cy_time:.2f}s)")
    print(f"speedup     : {py_time / cy_time:12.1f}x")
    if py_out != cy_out:
        raise SystemExit("MISMATCH: kernels disagree; determinism is broken")
    print("parity      : identical outputs across the whole workload")


if __name__ == "__main__":
    main()
