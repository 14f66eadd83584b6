"""Benchmark: compiled ODE kernel vs the pure-NumPy fallback.

Runs a few built-in scenarios through both backends and reports wall time,
step counts, and the sup-norm gap between the sampled trajectories (the
backends share stepping semantics, so step counts should match and states
should agree to rounding noise).

Usage: python benchmarks/bench_backends.py [--t-end X] [--repeat R]
"""

import argparse
import dataclasses
import time

import numpy as np

import patchepi
from patchepi import backend
from patchepi.scenarios import builtin_scenario

SCENARIOS = ("sim1b", "sim3a", "sim5a", "sim5b")


def time_run(config, name, repeat):
    backend.use_backend(name)
    best = float("inf")
    traj = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        traj = patchepi.integrate(config.spec, config.initial, config.integration)
        best = min(best, time.perf_counter() - t0)
    return best, traj


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--t-end", type=float, default=2000.0)
    parser.add_argument("--repeat", type=int, default=3)
    args = parser.parse_args()

    if "compiled" not in backend.available_backends():
        raise SystemExit("compiled backend is not built; run pip install -e . first")

    print(f"{'scenario':10s} {'python':>10s} {'compiled':>10s} {'speedup':>8s} "
          f"{'steps':>8s}  state gap")
    for name in SCENARIOS:
        config = builtin_scenario(name)
        config = dataclasses.replace(
            config,
            integration=dataclasses.replace(config.integration, t_end=args.t_end),
        )
        t_py, traj_py = time_run(config, "python", max(1, args.repeat // 3))
        t_cy, traj_cy = time_run(config, "compiled", args.repeat)
        gap = float(np.max(np.abs(traj_py.states - traj_cy.states)))
        same_steps = traj_py.n_steps == traj_cy.n_steps
        print(
            f"{name:10s} {t_py * 1e3:9.1f}ms {t_cy * 1e3:9.1f}ms "
            f"{t_py / t_cy:7.1f}x {traj_cy.n_steps:8d}  "
            f"{gap:.2e}{'' if same_steps else '  (step counts differ)'}"
        )
    backend.use_backend("compiled")


if __name__ == "__main__":
    main()
