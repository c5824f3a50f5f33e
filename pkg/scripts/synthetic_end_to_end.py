#!/usr/bin/env python3
"""Full synthetic experiment: synthesize, train both models, evaluate, infer.

Everything is driven through the CLI so the run is reproducible from the
manifests it leaves behind. With the default sizes this takes a few minutes
on a laptop-class CPU; shrink --count / --epochs for a smoke run.
"""

import argparse
import sys
from pathlib import Path

from fallcast.cli import main as fallcast


def run(args):
    print(f"\n$ fallcast {' '.join(str(a) for a in args)}")
    code = fallcast([str(a) for a in args])
    if code != 0:
        sys.exit(code)


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--workdir", default="runs/synthetic_end_to_end")
    ap.add_argument("--count", type=int, default=120)
    ap.add_argument("--hidden", type=int, default=64)
    ap.add_argument("--epochs", type=int, default=60)
    ap.add_argument("--max-windows", type=int, default=6000)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    work = Path(args.workdir)
    data = work / "data"
    run(["synth", "--out", data, "--count", args.count, "--seed", args.seed,
         "--noise-std", 1.0, "--occlusion", 0.02])
    run(["train-predictor", "--data", data, "--out", work / "predictor",
         "--t-obs", 25, "--t-pred", 50, "--np", 5, "--hidden", args.hidden,
         "--epochs", args.epochs, "--max-windows", args.max_windows,
         "--seed", args.seed])
    run(["train-classifier", "--data", data, "--out", work / "classifier",
         "--principle", "p3", "--epochs", 20, "--seed", args.seed])
    run(["eval", "--data", data, "--out", work / "eval",
         "--predictor", work / "predictor" / "predictor.json",
         "--classifier", work / "classifier" / "classifier.json",
         "--mode", "both"])
    first = sorted((data / "keypoints").glob("*fall_and_lie.json"))[0]
    run(["infer", "--input", first,
         "--predictor", work / "predictor" / "predictor.json",
         "--classifier", work / "classifier" / "classifier.json",
         "--mode", "forecast", "--out", work / "infer"])
    print(f"\nartifacts under {work}/")


if __name__ == "__main__":
    main()
