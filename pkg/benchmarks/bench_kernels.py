"""Compiled vs numpy trial kernel.

    python benchmarks/bench_kernels.py [--trials N] [--repeat R]

Times ``walk_trees`` on each registered scenario's outcome tree with both
backends, checks that they return identical outcomes, and prints the speedup.
"""

import argparse
import time

import numpy as np

from ensembleq import _walk_py
from ensembleq.ensemble import outcome_tree
from ensembleq.measurement import Mode
from ensembleq.scenarios import SCENARIO_IDS, get_scenario

try:
    from ensembleq._walk import walk_trees as compiled
except ImportError:
    compiled = None


def best_of(fn, repeat: int) -> float:
    times = []
    for _ in range(repeat):
        start = time.perf_counter()
        fn()
        times.append(time.perf_counter() - start)
    return min(times)


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--trials", type=int, default=1_000_000)
    parser.add_argument("--repeat", type=int, default=3)
    parser.add_argument("--seed", type=int, default=1)
    args = parser.parse_args()

    if compiled is None:
        print("compiled kernel not built; only the numpy kernel is available")
    print(f"{'scenario':<24}{'mode':<10}{'numpy s':>10}{'cython s':>10}{'speedup':>9}")
    cases = [(sid, False) for sid in SCENARIO_IDS] + [("sg-recombine", True)]
    for sid, intermediate in cases:
        scenario = get_scenario(sid, intermediate_readout=intermediate)
        label = sid + (" +path" if intermediate else "")
        for mode in Mode:
            tree = outcome_tree(scenario, mode)
            call_args = (args.seed, 0, args.trials, tree.cdf, tree.offsets, tree.sizes, tree.children, tree.depth)
            t_py = best_of(lambda: _walk_py.walk_trees(*call_args), args.repeat)
            if compiled is None:
                print(f"{label:<24}{mode.value:<10}{t_py:>10.4f}{'-':>10}{'-':>9}")
                continue
            if not np.array_equal(_walk_py.walk_trees(*call_args), compiled(*call_args)):
                raise SystemExit(f"backends disagree on {label} / {mode.value}")
            t_cy = best_of(lambda: compiled(*call_args), args.repeat)
            print(f"{label:<24}{mode.value:<10}{t_py:>10.4f}{t_cy:>10.4f}{t_py / t_cy:>8.1f}x")


if __name__ == "__main__":
    main()
