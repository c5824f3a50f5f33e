#!/usr/bin/env python3
"""Packing-width study: MCS for several (t_obs, t_pred) pairs across n_p.

Trains one small forecaster per grid point and writes mcs_sweep.csv plus an
mcs_sweep.svg line plot (n_p on the x axis, one line per window pair).
"""

import argparse
import sys
from pathlib import Path

from fallcast.cli import main as fallcast


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--workdir", default="runs/np_sweep")
    ap.add_argument("--count", type=int, default=80)
    ap.add_argument("--configs", default="25:25,25:50,10:50")
    ap.add_argument("--np-values", default="1,5,10,25")
    ap.add_argument("--epochs", type=int, default=25)
    ap.add_argument("--hidden", type=int, default=48)
    ap.add_argument("--max-windows", type=int, default=3000)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    work = Path(args.workdir)
    data = work / "data"
    for cmd in (
        ["synth", "--out", data, "--count", args.count, "--seed", args.seed,
         "--noise-std", 1.0, "--occlusion", 0.02],
        ["sweep", "--data", data, "--out", work / "sweep",
         "--configs", args.configs, "--np-values", args.np_values,
         "--hidden", args.hidden, "--epochs", args.epochs,
         "--max-windows", args.max_windows, "--seed", args.seed],
    ):
        print(f"\n$ fallcast {' '.join(str(a) for a in cmd)}")
        code = fallcast([str(a) for a in cmd])
        if code != 0:
            sys.exit(code)
    print(f"\nsweep table and plot under {work / 'sweep'}/")


if __name__ == "__main__":
    main()
