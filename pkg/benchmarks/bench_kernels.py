"""Time the LSTM recurrence kernels: compiled Cython against the numpy fallback.

Usage::

    python3 benchmarks/bench_kernels.py [--batch 4] [--hidden 24] [--repeat 20]

Reports the median wall time of one forward plus backward pass over a
336-step lag window for each available backend, and the speed-up.
"""
import argparse
import statistics
import time

import numpy as np

from newsload import kernels
from newsload.forecaster import init_params, loss_and_grad
from newsload.timeseries import HORIZON, LAG_STEPS


def time_backend(backend, params, X, Y, repeat):
    loss_and_grad(params, X, Y, backend=backend)  # warm-up
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        loss_and_grad(params, X, Y, backend=backend)
        times.append(time.perf_counter() - t0)
    return statistics.median(times)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--batch", type=int, default=4)
    ap.add_argument("--hidden", type=int, default=24)
    ap.add_argument("--features", type=int, default=10)
    ap.add_argument("--repeat", type=int, default=20)
    args = ap.parse_args()

    rng = np.random.default_rng(0)
    params = init_params(args.features, args.hidden, HORIZON, seed=0)
    X = rng.standard_normal((args.batch, LAG_STEPS, args.features))
    Y = rng.standard_normal((args.batch, HORIZON))

    backends = ["numpy"] + (["cython"] if kernels.BACKEND == "cython" else [])
    results = {b: time_backend(b, params, X, Y, args.repeat) for b in backends}
    print(f"batch={args.batch} steps={LAG_STEPS} hidden={args.hidden} features={args.features}")
    for b, t in results.items():
        print(f"{b:>7}: {1e3 * t:8.2f} ms per forward+backward")
    if "cython" in results:
        print(f"speed-up: {results['numpy'] / results['cython']:.1f}x")
    else:
        print("compiled kernels not built; only the numpy fallback was timed")


if __name__ == "__main__":
    main()
