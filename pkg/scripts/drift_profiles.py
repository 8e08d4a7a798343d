"""fBm path and its smoothed drifts for a few smoothing levels.

    python scripts/drift_profiles.py --beta 0.25 --N 4 64 --out out/drifts
"""

import argparse
from pathlib import Path

import numpy as np

from mvsde.config import parse_config
from mvsde.experiments import generate_h, space_grid
from mvsde.mollifier import MollifierSpec, mollify_drift


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--beta", type=float, default=0.25)
    ap.add_argument("--N", type=float, nargs="+", default=[4.0, 64.0])
    ap.add_argument("--seed", type=int, default=None)
    ap.add_argument("--out", type=Path, default=Path("out/drifts"))
    args = ap.parse_args()

    overrides = {"beta": args.beta} if args.seed is None else {"beta": args.beta, "seed": args.seed}
    cfg = parse_config(overrides=overrides)
    grid = space_grid(cfg)
    h = generate_h(cfg, args.N)
    cols = [grid.nodes, np.interp(grid.nodes, h.grid.nodes, h.values)]
    for N in args.N:
        b = mollify_drift(h, MollifierSpec(N), grid)
        cols.append(b.values)
        print(f"N={N:g}: sup|b|={np.max(np.abs(b.values)):.4g}, std={b.values.std():.4g}")
    args.out.mkdir(parents=True, exist_ok=True)
    header = "x,h," + ",".join(f"bN_{N:g}" for N in args.N)
    np.savetxt(args.out / "drifts.csv", np.column_stack(cols), delimiter=",", header=header, comments="", fmt="%.17g")


if __name__ == "__main__":
    main()
