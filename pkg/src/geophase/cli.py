"""``geophase`` command line.

    geophase simulate --scenario NAME [--config FILE] --out DIR [--grid-n N] [--dt D] [--workers W]
    geophase verify --out DIR

Exit status: 0 when every check passes, 1 when a check fails, 2 on a
configuration or precondition error.
"""

from __future__ import annotations

import argparse
import logging
import sys

from .config import SCENARIOS, load_config, load_preset
from .errors import PreconditionError


def _parser():
    p = argparse.ArgumentParser(prog="geophase", description=__doc__.split("\n")[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="run one scenario")
    s.add_argument("--scenario", required=True, choices=SCENARIOS)
    s.add_argument("--config", help="INI config; defaults to the bundled preset for the scenario")
    s.add_argument("--out", required=True, help="output root directory")
    s.add_argument("--grid-n", type=int, help="override grid points per axis")
    s.add_argument("--dt", type=float, help="override time step")
    s.add_argument("--workers", type=int, help="parallel simulations for sweeps")

    v = sub.add_parser("verify", help="run the gauge identity suite")
    v.add_argument("--out", required=True)
    v.add_argument("--config", help="INI config for the model parameters")

    sub.add_parser("presets", help="list bundled scenario presets")
    return p


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    from .scenarios import execute

    if args.command == "presets":
        print("\n".join(SCENARIOS))
        return 0
    try:
        if args.command == "verify":
            cfg = load_config(args.config) if args.config else load_preset("verify_fields")
            if cfg.scenario != "verify_fields":
                cfg = type(cfg)("verify_fields", model=cfg.model)
        else:
            cfg = load_config(args.config) if args.config else load_preset(args.scenario)
            if cfg.scenario != args.scenario:
                raise PreconditionError(f"config is for scenario {cfg.scenario!r}, not {args.scenario!r}")
            cfg = cfg.with_overrides(args.grid_n, args.dt, args.workers)
        run_dir, res, ok = execute(cfg, args.out)
    except (PreconditionError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print((run_dir / "report.txt").read_text(), end="")
    print(f"artifacts: {run_dir}")
    return 0 if ok else 1


if __name__ == "__main__":
    sys.exit(main())
