"""``splitsbi`` command-line entry point."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from ..errors import ConfigurationError
from .commands import cmd_dist_preserve, cmd_infer, cmd_phase_portrait, cmd_simulate, cmd_validate
from .config import SCALES, builtin_configs, load_config

DEFAULT_CONFIG = {
    "simulate": "two_pool",
    "dist-preserve": "repressilator",
    "phase-portrait": "lotka_volterra",
    "infer": "two_pool",
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help=f"built-in name ({', '.join(builtin_configs())}) or a TOML/JSON path")
    common.add_argument("--seed", type=int, help="master seed (overrides the config)")
    common.add_argument("--threads", type=int, default=1, help="worker threads; results do not depend on it")
    common.add_argument("--out", type=Path, help="output directory (default runs/<config>/<command>)")
    common.add_argument("--scale", choices=SCALES, default="desk", help="desk-sized or full-size settings")
    common.add_argument("--no-figures", action="store_true", help="write CSV/JSON only")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="splitsbi", description="Splitting-scheme simulation and ABC inference for CRNs.")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("simulate", parents=[common], help="simulate one trajectory and synthetic observations")
    sub.add_parser("dist-preserve", parents=[common], help="end-time distributions across step sizes")
    sub.add_parser("phase-portrait", parents=[common], help="phase-plane ensembles and breakdown counts")
    p_inf = sub.add_parser("infer", parents=[common], help="ABC-SMC with forward and data-conditional paths")
    p_inf.add_argument("--methods", nargs="+", choices=("forward", "dc"), help="subset of samplers to run")
    p_val = sub.add_parser("validate", parents=[common], help="oracle suites; nonzero exit on failure")
    p_val.add_argument("--quick", action="store_true", help="smaller sample sizes")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        if args.command == "validate":
            out = args.out or Path("runs") / "validate"
            report = cmd_validate(out, seed=args.seed or 0, quick=args.quick)
            for s in report["suites"]:
                print(f"{'PASS' if s['passed'] else 'FAIL'} {s['name']}")
            print(f"report: {out / 'report.json'}")
            return 0 if report["passed"] else 1

        cfg = load_config(args.config or DEFAULT_CONFIG[args.command], args.scale, args.seed)
        out = args.out or Path("runs") / cfg.name / args.command
        figures = not args.no_figures
        if args.command == "simulate":
            cmd_simulate(cfg, out, args.threads, figures)
        elif args.command == "dist-preserve":
            rep = cmd_dist_preserve(cfg, out, args.threads, figures)
            for row in rep["ks"]:
                print(f"t={row['t']:g} {row['scheme']} h={row['h']:g} KS={row['ks']:.4f}")
        elif args.command == "phase-portrait":
            rep = cmd_phase_portrait(cfg, out, args.threads, figures)
            for r in rep["runs"]:
                print(
                    f"{r['scheme']} h={r['h']:g} nonfinite={r['nonfinite_paths']} "
                    f"clamped={r['clamp_paths']} breakdown={r['breakdown']}"
                )
        else:
            rep = cmd_infer(cfg, out, args.threads, figures, args.methods)
            for m, st in rep["status"].items():
                print(f"{m}: {st}, final epsilon {rep['epsilons'][m][-1]}")
        print(f"outputs: {out}")
        return 0
    except ConfigurationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
