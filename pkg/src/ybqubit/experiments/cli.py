"""Command-line entry point: ``ybqubit <scenario> [--config PATH] ...``.

Exit status is 0 on success, 1 for configuration problems (including an
unknown subcommand) and 2 for runtime or fit failures. Errors are written
to stderr as ``ybqubit: error: <kind>: <message>``.
"""

import argparse
import json
import sys

from ..errors import ConfigError, YbQubitError
from .config import SCENARIOS, load_config
from .scenarios import RUNNERS

PROG = "ybqubit"
EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 1, 2


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits with status 2 on usage errors; 2 is reserved for runtime failures here.
    def error(self, message):
        raise _UsageError(message)


def _fail(kind, message, code):
    print(f"{PROG}: error: {kind}: {message}", file=sys.stderr)
    return code


def build_parser():
    parser = _Parser(prog=PROG, description="Simulated trapped-ion qubit experiments.")
    parser.add_argument("--version", action="store_true", help="print the version and exit")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND", parser_class=_Parser)
    for name in SCENARIOS:
        p = sub.add_parser(name, help=f"run the {name} scenario")
        p.add_argument("--config", metavar="PATH", help="YAML config layered over the defaults")
        p.add_argument("--seed", type=int, help="master seed (overrides the config)")
        p.add_argument("--out", metavar="DIR", help="output directory (default $YBQUBIT_OUT or .)")
        p.add_argument("--shots", type=int, help="override every shot or repetition count")
        p.add_argument("--format", choices=("csv", "json"), default="csv", help="table format")
    v = sub.add_parser("validate-config", help="check a config file without running it")
    v.add_argument("config", metavar="PATH")
    v.add_argument("--scenario", choices=SCENARIOS, help="scenario if the file does not name one")
    return parser


def _validate(args):
    cfg = load_config(args.config, scenario=args.scenario)
    print(json.dumps({"scenario": cfg.scenario, "config_sha256": cfg.sha256}))
    return EXIT_OK


def _run(args):
    if args.shots is not None and args.shots <= 0:
        raise ConfigError("--shots: must be a positive integer")
    if args.seed is not None and args.seed < 0:
        raise ConfigError("--seed: must be >= 0")
    cfg = load_config(args.config, scenario=args.command, seed=args.seed,
                      output_dir=args.out, shots=args.shots)
    art = RUNNERS[cfg.scenario](cfg)
    for path in art.write(args.out, args.format):
        print(path)
    return EXIT_OK


def cli_main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        parser.print_usage(sys.stderr)
        return _fail("usage", str(exc), EXIT_CONFIG)
    if args.version:
        from .. import __version__
        print(__version__)
        return EXIT_OK
    if args.command is None:
        parser.print_usage(sys.stderr)
        return _fail("usage", "a command is required", EXIT_CONFIG)
    try:
        if args.command == "validate-config":
            return _validate(args)
        return _run(args)
    except ConfigError as exc:
        return _fail("config", str(exc), EXIT_CONFIG)
    except (YbQubitError, ArithmeticError, ValueError, RuntimeError) as exc:
        return _fail("runtime", f"{type(exc).__name__}: {exc}", EXIT_RUNTIME)
    except OSError as exc:
        return _fail("io", str(exc), EXIT_RUNTIME)


def main():
    sys.exit(cli_main())


if __name__ == "__main__":
    main()
