"""pinlab <command> --config FILE [--h ... --n ... --replicas ... --seed ... --out DIR]"""

import argparse
import logging
import sys

from .errors import ConfigError, ValidationError
from .runner import COMMANDS, EXIT_CONFIG, EXIT_VALIDATION, ExperimentConfig, load_config_dict, run_safely


def _numbers(text, cast):
    parts = [p for p in text.split(",") if p.strip()]
    return [cast(p) for p in parts]


def build_parser():
    p = argparse.ArgumentParser(prog="pinlab", description="Disordered pinning model experiments.")
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--config", required=True, help="YAML experiment config")
    p.add_argument("--h", help="pinning parameter, or comma-separated grid")
    p.add_argument("--n", help="system size, or comma-separated list")
    p.add_argument("--replicas", type=int)
    p.add_argument("--paths", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--out", help="output directory")
    p.add_argument("--suite", help="verification suite (quick or acceptance)")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def apply_overrides(cfg_dict, args):
    d = dict(cfg_dict)
    d["command"] = args.command
    if args.h is not None:
        hs = _numbers(args.h, float)
        d.pop("h", None), d.pop("h_grid", None)
        d.update({"h": hs[0]} if len(hs) == 1 else {"h_grid": hs})
    if args.n is not None:
        ns = _numbers(args.n, int)
        d.pop("n", None), d.pop("n_list", None)
        d.update({"n": ns[0]} if len(ns) == 1 else {"n_list": ns})
    for key, val in (("replicas", args.replicas), ("paths", args.paths), ("seed", args.seed),
                     ("output_dir", args.out), ("suite", args.suite)):
        if val is not None:
            d[key] = val
    return ExperimentConfig.from_dict(d)


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        base = load_config_dict(args.config)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        cfg = apply_overrides(base, args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ValidationError as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except TypeError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return run_safely(cfg)


if __name__ == "__main__":
    sys.exit(main())
