"""Benchmark the compiled kernels against the pure-Python fallback.

Usage:
    python benchmarks/bench_kernels.py [--quick]
"""

import argparse
import time

from anonboot._kernels import available_backends, get_backend

SEED = bytes(range(32))


def timeit(fn, reps: int) -> float:
    start = time.perf_counter()
    for _ in range(reps):
        fn()
    return (time.perf_counter() - start) / reps


def benchmarks(quick: bool):
    scale = 10 if quick else 1
    return [
        ("sha256 (40 B)", 20_000 // scale,
         lambda b: (lambda: b.sha256(SEED + bytes(8)))),
        ("hash256 (73 B)", 20_000 // scale,
         lambda b: (lambda: b.hash256(bytes(73)))),
        ("shuffle_prefix n=1000 k=100", 200 // scale,
         lambda b: (lambda: b.shuffle_prefix(SEED, 1000, 100))),
        ("sample_indices n=1000 k=100", 2_000 // scale,
         lambda b: (lambda: b.sample_indices(SEED, 1000, 100))),
        ("pow_scan d=12", 20 // scale,
         lambda b: (lambda: b.pow_scan(bytes(65), 0, 12, 1 << 16))),
        ("infiltration_cell 1000 trials", 2,
         lambda b: (lambda: b.infiltration_cell(SEED, 1000 // scale, 1000, 100, 250, 34))),
    ]


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--quick", action="store_true", help="smaller workloads")
    args = parser.parse_args()

    backends = {name: get_backend(name) for name in available_backends()}
    print(f"backends: {', '.join(backends)}\n")
    header = f"{'kernel':<32}" + "".join(f"{name:>14}" for name in backends)
    if len(backends) > 1:
        header += f"{'speedup':>10}"
    print(header)
    print("-" * len(header))
    for label, reps, make in benchmarks(args.quick):
        reps = max(reps, 1)
        times = {}
        for name, backend in backends.items():
            times[name] = timeit(make(backend), reps)
        row = f"{label:<32}"
        for name in backends:
            row += f"{times[name] * 1e6:>12.1f}us"
        if len(times) > 1 and "native" in times:
            row += f"{times['pure'] / times['native']:>9.1f}x"
        print(row)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
