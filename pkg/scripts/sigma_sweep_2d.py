"""Final e_omega of both 2D filters against the observation noise level."""

import argparse
from pathlib import Path

from lagrangian_enkf.harness import preset, run_2d


def main():
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--sigmas", type=float, nargs="*", default=(0.2, 0.05, 0.0125))
    p.add_argument("--preset", choices=("paper", "desk"), default="desk")
    p.add_argument("--seed", type=int, default=2024)
    p.add_argument("--out", default="out/sigma_sweep_2d")
    args = p.parse_args()
    print("filter  sigma_obs  initial_e  final_e")
    for kind in ("remesh", "part"):
        for s in args.sigmas:
            cfg = preset("vortex2d", args.preset, filter=kind, sigma_obs=s, seed=args.seed)
            res = run_2d(cfg, Path(args.out) / f"{kind}_{s:g}")
            e = res.column("e_omega")
            print(f"{kind:7s} {s:9g}  {e[0]:9.4g}  {e[-1]:.4g}")


if __name__ == "__main__":
    main()
