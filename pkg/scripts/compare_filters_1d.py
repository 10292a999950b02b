"""Run the three 1D filters on the same ensemble and print the error histories."""

import argparse
from pathlib import Path

from lagrangian_enkf.harness import preset, run_1d


def main():
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--seed", type=int, default=2024)
    p.add_argument("--out", default="out/compare_1d")
    args = p.parse_args()
    for kind in ("remesh", "part", "grid"):
        res = run_1d(preset("adv1d", "paper", filter=kind, seed=args.seed), Path(args.out) / kind)
        r, v, D = res.column("rrmse"), res.column("rrmse_v"), res.column("rrmse_D")
        print(f"{kind:7s} rRMSE {r[0]:.3f} -> {r[-1]:.3f} (x{r[-1] / r[0]:.3f})  "
              f"rRMSE_v {v[0]:.3f} -> {v[-1]:.3f}  rRMSE_D {D[0]:.3f} -> {D[-1]:.3f}")


if __name__ == "__main__":
    main()
