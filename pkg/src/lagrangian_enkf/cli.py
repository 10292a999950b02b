"""Command line: ``lagenkf run-1d | run-2d | verify``.

The member forecast thread count comes from ``LAGENKF_THREADS`` (default 1).
"""

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import replace
from pathlib import Path

from .harness.config import load_config, preset, save_config
from .harness.twin import run_1d, run_2d
from .verify import run_checks

log = logging.getLogger("lagrangian_enkf")


def _build_config(args, testbed: str):
    cfg = preset(testbed, args.preset)
    if args.config:
        cfg = load_config(args.config, base=cfg)
        if cfg.testbed != testbed:
            raise ValueError(f"config is for testbed {cfg.testbed!r}, not {testbed!r}")
    changes = {}
    if args.seed is not None:
        changes["seed"] = args.seed
    if args.filter is not None:
        changes["filter"] = args.filter
    return replace(cfg, **changes) if changes else cfg


def _summary(result, key: str) -> str:
    col = result.column(key)
    return f"{key}: initial {col[0]:.4g}, final {col[-1]:.4g}"


def _run(args, testbed: str) -> int:
    cfg = _build_config(args, testbed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    save_config(cfg, out / "config.json")
    runner, key = (run_1d, "rrmse") if testbed == "adv1d" else (run_2d, "e_omega")
    result = runner(cfg, out)
    print(f"{cfg.filter}: {_summary(result, key)} -> {out}")
    return 0


def make_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="lagenkf", description="Ensemble Kalman filters for particle models")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)
    for name, filters in (("run-1d", ("remesh", "part", "grid")), ("run-2d", ("remesh", "part"))):
        s = sub.add_parser(name, help=f"{'1D advection-diffusion' if name == 'run-1d' else '2D vortex'} twin experiment")
        s.add_argument("--config", type=str, default=None, help="JSON config overriding the preset")
        s.add_argument("--seed", type=int, default=None)
        s.add_argument("--filter", choices=filters, default=None)
        s.add_argument("--out", type=str, default="out")
        s.add_argument("--preset", choices=("paper", "desk"), default="paper")
    sub.add_parser("verify", help="run the built-in oracle checks")
    return p


def main(argv=None) -> int:
    args = make_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "verify":
            return 0 if run_checks() else 1
        return _run(args, "adv1d" if args.command == "run-1d" else "vortex2d")
    except Exception as exc:
        print(f"error: {exc}", file=sys.stderr)
        log.debug("traceback", exc_info=True)
        return 2


if __name__ == "__main__":
    sys.exit(main())
