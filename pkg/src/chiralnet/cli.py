"""Command-line front end: ``chiralnet <command> [engine] --preset NAME | --config PATH``."""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import yaml

from .config import config_from_dict, load_preset, merge, preset_names
from .errors import ChiralNetError, ConfigError
from .runner import COMMANDS, run

OUT_ENV = "CHIRALNET_OUT"
DEFAULT_OUT = "chiralnet-out"
EXIT_CONFIG, EXIT_ENGINE = 2, 3


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="chiralnet", description=__doc__)
    parser.add_argument("--list-presets", action="store_true", help="print preset names and exit")
    sub = parser.add_subparsers(dest="command")
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("engine", nargs="?", choices=("markov", "tcl2", "redfield", "secular", "mps"),
                       help="override the engine named in the config")
        src = p.add_mutually_exclusive_group(required=True)
        src.add_argument("--config", type=Path, help="YAML config file")
        src.add_argument("--preset", help="bundled config name (see --list-presets)")
        p.add_argument("--seed", type=int, help="override the config seed")
        p.add_argument("--jobs", type=int, default=1, help="worker processes for sweeps and ensembles")
        p.add_argument("--out", type=Path, help=f"output directory (default ${OUT_ENV} or ./{DEFAULT_OUT})")
        p.add_argument("--dmax", type=int, help="override mps.d_max")
    return parser


def resolve_config(args):
    if args.preset:
        data, label = load_preset(args.preset), args.preset
    else:
        try:
            data = yaml.safe_load(args.config.read_text(encoding="utf-8"))
        except OSError as exc:
            raise ConfigError(f"cannot read {args.config}: {exc.strerror}",
                              violations=[{"path": "--config", "message": str(exc)}]) from None
        except yaml.YAMLError as exc:
            raise ConfigError(f"not valid YAML: {exc}", violations=[{"path": "--config", "message": str(exc)}]) from None
        label = args.config.stem
    if not isinstance(data, dict):
        raise ConfigError("configuration must be a mapping", violations=[{"path": "<root>", "message": "not a mapping"}])
    overrides = {}
    if args.engine:
        overrides["engine"] = args.engine
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.dmax is not None:
        overrides["mps"] = {"d_max": args.dmax}
    return config_from_dict(merge(data, overrides)), label


def output_dir(args, command: str, label: str) -> Path:
    if args.out is not None:
        return args.out
    return Path(os.environ.get(OUT_ENV, DEFAULT_OUT)) / f"{command}-{label}"


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.list_presets:
        print("\n".join(preset_names()))
        return 0
    if args.command is None:
        parser.print_help()
        return EXIT_CONFIG
    try:
        config, label = resolve_config(args)
        manifest = run(args.command, config, output_dir(args, args.command, label), jobs=max(1, args.jobs), label=label)
    except ConfigError as exc:
        print(json.dumps(exc.to_dict(), default=str), file=sys.stderr)
        return EXIT_CONFIG
    except ChiralNetError as exc:
        print(json.dumps(exc.to_dict(), default=str), file=sys.stderr)
        return EXIT_ENGINE
    print(json.dumps(manifest["summary"]["results"], indent=2, default=str))
    return 0


if __name__ == "__main__":
    sys.exit(main())
