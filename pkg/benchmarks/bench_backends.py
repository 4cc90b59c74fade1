"""Time the compiled and NumPy kernels on the 100-interval hole problem.

    python benchmarks/bench_backends.py [--repeat N]
"""

import argparse
import time

import numpy as np

from ibmdiff import backend
from ibmdiff.metrics import TABLE1, Study, spline_alg
from ibmdiff.kernels import BasisFamily
from ibmdiff.solver import ClosureModel, Simulation, Staircase


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t)
    return min(times)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    study = Study(TABLE1[100])
    models = {
        "staircase": Staircase(),
        "ecmls": ClosureModel(spline_alg("ecmls", BasisFamily.INCOMPLETE_QUARTIC, 2.75)),
    }
    names = backend.available()
    print(f"backends: {', '.join(names)} (default {backend.NAME})")
    print(f"{'model':<10} {'backend':<8} {'run [s]':>9} {'ns/node/step':>13} {'fill [us]':>10}")
    results = {}
    for label, model in models.items():
        cfg = study.config(model)
        base = Simulation(cfg)
        nodes = int(base.active.sum())
        for name in names:
            sim = Simulation(cfg, backend=name, closures=base.closures, classification=base.classification)
            run_s = best_of(sim.run, args.repeat)
            fill_us = 0.0
            if base.closures is not None:
                vals = np.random.default_rng(0).random(cfg.grid.shape)
                fill_us = best_of(lambda: sim._refresh(vals), 50) * 1e6
            results[label, name] = sim.run().snapshot(cfg.t_end)
            per = run_s / (cfg.n_steps * nodes) * 1e9
            print(f"{label:<10} {name:<8} {run_s:9.4f} {per:13.2f} {fill_us:10.1f}")
        if len(names) == 2:
            same = np.array_equal(results[label, names[0]], results[label, names[1]])
            print(f"{label:<10} backends bitwise equal: {same}")


if __name__ == "__main__":
    main()
