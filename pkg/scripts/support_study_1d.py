"""Part-EnKF error against the size of the members' particle support.

The support is controlled by the intensity threshold eps_cut; the mean
particle count per member is reported next to the final errors.
"""

import argparse
from pathlib import Path

import numpy as np

from lagrangian_enkf.harness import preset, run_1d

CUTS = (0.0, 1e-11, 1e-3, 0.02, 0.05, 0.08, 0.12)


def main():
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--seed", type=int, default=2024)
    p.add_argument("--cuts", type=float, nargs="*", default=CUTS)
    p.add_argument("--out", default="out/support_1d")
    args = p.parse_args()
    print("eps_cut    mean_np  final_rRMSE  final_rRMSE_v  final_rRMSE_D")
    for cut in args.cuts:
        res = run_1d(preset("adv1d", "paper", filter="part", eps_cut=cut, seed=args.seed),
                     Path(args.out) / f"cut_{cut:g}")
        counts = np.array([[row[k] for k in row if k.startswith("np_")] for row in res.metrics])
        print(f"{cut:<10g} {counts.mean():7.1f}  {res.column('rrmse')[-1]:11.4f}  "
              f"{res.column('rrmse_v')[-1]:13.4f}  {res.column('rrmse_D')[-1]:13.4f}")


if __name__ == "__main__":
    main()
