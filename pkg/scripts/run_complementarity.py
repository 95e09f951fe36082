#!/usr/bin/env python3
"""Gripper complementarity on plane + sphere + small-box scenes.

With the oracle-driven fallback pipeline, measures how often the top-10
vacuum grasps land on flat surface points and the top-10 parallel grasps on
the small (graspable-width) objects.
"""

import argparse

import numpy as np

from dualgrasp.experiments import complementarity_stats

if __name__ == "__main__":
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--scenes", type=int, default=10)
    ap.add_argument("--base-seed", type=int, default=0)
    a = ap.parse_args()

    flat, small = complementarity_stats(n_scenes=a.scenes, base_seed=a.base_seed)
    for i, (f, s) in enumerate(zip(flat, small)):
        print(f"scene {i:2d}: vacuum-on-flat {f:.2f}   parallel-on-small {s:.2f}")
    print(f"\nmean vacuum-on-flat   {np.mean(flat):.3f}")
    print(f"mean parallel-on-small {np.mean(small):.3f}")
