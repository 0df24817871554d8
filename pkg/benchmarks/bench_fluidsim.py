"""Compare the pure-Python and compiled simulation kernels.

    python3 benchmarks/bench_fluidsim.py [--horizon 20000] [--apps 6] [--workers 4] [--repeat 3]

Both backends run the same random system; the script checks that the event
traces are bit-identical and prints the best wall-clock time of each.
"""

import argparse
import time

import numpy as np

from selfishsched.fluidsim import SimConfig, available_backends, run
from selfishsched.model import random_system


def best_time(fn, repeat):
    best = np.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--horizon", type=float, default=20000.0)
    ap.add_argument("--apps", type=int, default=6)
    ap.add_argument("--workers", type=int, default=4)
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)

    s = random_system(np.random.default_rng(args.seed), args.apps, args.workers, lo=0.2, hi=5.0)
    cfg = SimConfig(horizon=args.horizon)
    results = {}
    for backend in available_backends():
        elapsed, trace = best_time(lambda: run(s, cfg, backend=backend), args.repeat)
        results[backend] = (elapsed, trace)
        print(f"{backend:>9}: {elapsed:8.3f} s  ({trace.events.size} events)")
    if len(results) == 2:
        (tc, a), (tp, b) = results["compiled"], results["python"]
        assert a.events.tobytes() == b.events.tobytes(), "backends disagree"
        print(f"traces identical; compiled is {tp / tc:.1f}x faster")
    else:
        print("compiled kernel not built; only the Python backend was timed")


if __name__ == "__main__":
    main()
