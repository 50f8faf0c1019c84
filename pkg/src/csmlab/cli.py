"""``csmlab`` command: run, validate and list experiments.

Exit status: 0 success, 2 config error, 3 numeric or truncation error,
4 I/O error.
"""
from __future__ import annotations

import argparse
import json
import sys

from .errors import NumericError
from .experiments import (
    EXPERIMENTS,
    OUTPUT_ENV,
    ConfigError,
    bundled_config_path,
    resolve_config,
    run_experiment,
    validate_config,
)

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_IO = 0, 2, 3, 4


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="csmlab", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run an experiment config (path or bundled experiment name)")
    run.add_argument("config")
    run.add_argument("--seed", type=int, default=None, help="override the config seed")
    run.add_argument("--out", default=None, help=f"output directory (default: config, then ${OUTPUT_ENV})")
    run.add_argument("--threads", type=int, default=1, help="worker threads for independent trials")

    val = sub.add_parser("validate", help="check a config without running it")
    val.add_argument("config")

    sub.add_parser("list-experiments", help="list experiment names and bundled configs")
    return p


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        if args.command == "list-experiments":
            for name in EXPERIMENTS:
                print(f"{name}\t{bundled_config_path(name)}")
            return EXIT_OK
        config = resolve_config(args.config)
        if args.command == "validate":
            parsed = validate_config(config)
            print(f"ok: {config.experiment} {json.dumps(parsed, default=str)}")
            return EXIT_OK
        if args.seed is not None and not 0 <= args.seed < 2**64:
            raise ConfigError("--seed must be a 64-bit unsigned integer")
        manifest, paths = run_experiment(config, out=args.out, seed=args.seed, threads=args.threads)
        print(f"wrote {paths['csv']} and {paths['manifest']}")
        print(json.dumps(manifest.summary, default=str))
        return EXIT_OK
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericError as exc:
        print(f"numeric error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
