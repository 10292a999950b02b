"""Single 2D dipole twin experiment; prints e_omega before and after each analysis."""

import argparse

from lagrangian_enkf.harness import preset, run_2d


def main():
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--filter", choices=("remesh", "part"), default="remesh")
    p.add_argument("--preset", choices=("paper", "desk"), default="desk")
    p.add_argument("--sigma-obs", type=float, default=None)
    p.add_argument("--seed", type=int, default=2024)
    p.add_argument("--out", default="out/vortex_2d")
    args = p.parse_args()
    over = {"filter": args.filter, "seed": args.seed}
    if args.sigma_obs is not None:
        over["sigma_obs"] = args.sigma_obs
    res = run_2d(preset("vortex2d", args.preset, **over), args.out)
    for row in res.metrics:
        print(f"step {row['step']:2d}  t={row['time']:5.2f}  before {row['e_omega_forecast']:.4g}"
              f"  after {row['e_omega']:.4g}")


if __name__ == "__main__":
    main()
