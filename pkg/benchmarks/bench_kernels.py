"""Compare the compiled and pure-Python kernels.

    python benchmarks/bench_kernels.py [--arrivals N] [--repeat R]

Times the event loop on a fixed simulated workload and the birth-death
weight recursion, checks that both backends return identical results, and
prints one line per (kernel, backend).
"""
import argparse
import time

import numpy as np

from cacwb import kernels
from cacwb.des import SimConfig, simulate
from cacwb.policies import UBT, UFB


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--arrivals", type=int, default=200_000)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)

    backends = kernels.available_backends()
    if "compiled" not in backends:
        print("compiled extension not built; only the Python backend is available")
    workloads = {
        "des UFB{100,90,94}": SimConfig(UFB(100, 90, 94, 0.5), (0.5, 3.0), mu=1 / 90,
                                        total_arrivals=args.arrivals, seed=1),
        "des UBT{120,4 classes}": SimConfig(UBT(120, (120, 110, 100, 90), (0.2, 0.3, 0.9)),
                                            tuple(100 / 120 * w / 13 for w in (1, 2, 4, 6)),
                                            mu=1 / 120, total_arrivals=args.arrivals, seed=2),
    }
    birth = np.linspace(400.0, 1.0, 4000)
    before = kernels.active_backend()
    try:
        for name, cfg in workloads.items():
            results = {}
            for b in backends:
                kernels.use_backend(b)
                t, rep = best_of(lambda: simulate(cfg, record_trace=True), args.repeat)
                results[b] = (t, rep.trace_digest)
                print(f"{name:24s} {b:9s} {t * 1e3:9.1f} ms  ({args.arrivals / t / 1e6:.2f} M arrivals/s)")
            _report(name, results)
        results = {}
        for b in backends:
            mod = kernels.get_backend(b)
            t, w = best_of(lambda: mod.birth_death_weights(birth, 0.1), args.repeat * 10)
            results[b] = (t, w.tobytes())
            print(f"{'weights C=4000':24s} {b:9s} {t * 1e3:9.3f} ms")
        _report("weights C=4000", results)
    finally:
        kernels.use_backend(before)


def _report(name, results):
    if len(results) < 2:
        return
    (tp, op), (tc, oc) = results["python"], results["compiled"]
    print(f"{name:24s} speedup {tp / tc:6.1f}x  identical output: {op == oc}")


if __name__ == "__main__":
    main()
