#!/usr/bin/env python3
"""End-to-end demo: synthesize scenes, build labels, train, predict, evaluate.

Writes everything under runs/demo/ (override with --out). Uses the CLI
entry points, so the artifacts match what `dualgrasp <subcommand>` produces.
"""

import argparse
import sys
from pathlib import Path

from dualgrasp.cli import main as cli


def sh(*args) -> None:
    args = [str(a) for a in args]
    print("+ dualgrasp " + " ".join(args))
    code = cli(args)
    if code != 0:
        sys.exit(code)


def run(out: Path, seed: int) -> None:
    scenes = out / "scenes"
    sh("synth", "--out", scenes, "--scenes", "8", "--objects", "4", "--seed", seed,
       "--kinds", "box,sphere,plane-slab")
    sh("labels", "--scenes", scenes, "--out", out / "labels")
    sh("train", "--scenes", scenes, "--out", out / "model", "--seed", seed)
    sh("predict", "--scenes", scenes, "--out", out / "pred",
       "--checkpoint", out / "model" / "checkpoint.json")
    sh("eval", "--scenes", scenes, "--grasps", out / "pred", "--out", out / "metrics",
       "--clearing", "--checkpoint", out / "model" / "checkpoint.json", "--max-refine", "32")
    print(f"\nartifacts in {out}/ (scenes, labels, model, pred, metrics)")


if __name__ == "__main__":
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", type=Path, default=Path("runs/demo"))
    ap.add_argument("--seed", type=int, default=7)
    a = ap.parse_args()
    run(a.out, a.seed)
