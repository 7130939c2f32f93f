"""Solver agreement and timing on random small windows.

Draws windows like the oracle tests do, solves each with the native branch
and bound, HiGHS MILP and exhaustive search, and prints a summary.

    python scripts/oracle_windows.py --count 200 --max-steps 4
"""
import argparse
import sys
import time
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "tests"))

from laserdebris import ilp  # noqa: E402
from laserdebris.ilp.brute import GUARD, search_space_size  # noqa: E402
from oracles import random_window  # noqa: E402


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--count", type=int, default=100)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--max-steps", type=int, default=4)
    ap.add_argument("--max-platforms", type=int, default=2)
    ap.add_argument("--max-debris", type=int, default=3)
    ap.add_argument("--max-slots", type=int, default=3)
    args = ap.parse_args(argv)

    rng = np.random.default_rng(args.seed)
    timing = {"bnb": 0.0, "highs": 0.0, "brute": 0.0}
    nodes, mismatches, skipped, done = [], 0, 0, 0
    while done < args.count:
        inst = random_window(rng, int(rng.integers(1, args.max_steps + 1)),
                             int(rng.integers(1, args.max_platforms + 1)),
                             int(rng.integers(0, args.max_debris + 1)), args.max_slots)
        if search_space_size(inst) > GUARD:
            skipped += 1
            continue
        model = ilp.build_model(inst)
        vals = {}
        for name in ("bnb", "highs"):
            t = time.perf_counter()
            sol = ilp.solve(model, method=name)
            timing[name] += time.perf_counter() - t
            vals[name] = sol.objective
            if name == "bnb":
                nodes.append(sol.nodes)
        t = time.perf_counter()
        vals["brute"] = ilp.brute_force_solve(inst).objective
        timing["brute"] += time.perf_counter() - t
        if len({round(v, 9) for v in vals.values()}) != 1:
            mismatches += 1
            print(f"window {done}: {vals}")
        done += 1
    print(f"{done} windows ({skipped} over the guard skipped), {mismatches} mismatches")
    print(f"bnb nodes: median {int(np.median(nodes))}, max {max(nodes)}")
    for name, secs in timing.items():
        print(f"{name:>6}: {secs:.2f} s total")
    return 1 if mismatches else 0


if __name__ == "__main__":
    sys.exit(main())
