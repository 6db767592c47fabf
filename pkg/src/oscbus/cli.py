"""Command line entry point: ``oscbus run``.

Exit codes: 0 success, 1 I/O failure, 2 configuration error, 3 numerical error.
"""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import __version__
from .config import PRESETS, apply_override, parse_config_dict, tomllib
from .errors import ConfigError, NumericError, OscbusError, StructuralViolationError
from .runner import emit_series, run_experiment, run_sweep

EXIT_OK = 0
EXIT_IO = 1
EXIT_CONFIG = 2
EXIT_NUMERIC = 3

STRUCTURAL_HINT = (
    "hint: the bath noise couples the resonant mode(s) to other modes; include the whole "
    "degenerate group in run.resonant_mode or use local thermal baths"
)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="oscbus", description="Oscillator-bus Gaussian dynamics")
    parser.add_argument("--version", action="version", version=f"oscbus {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run an experiment and write its data series")
    run.add_argument("config", nargs="?", help="TOML configuration file")
    run.add_argument("--out", required=True, help="output directory")
    run.add_argument("--format", choices=("csv", "json"), default="csv")
    run.add_argument("--preset", choices=sorted(PRESETS), help="start from a built-in preset")
    run.add_argument("--set", action="append", default=[], metavar="KEY=VALUE", help="override one key (repeatable)")
    run.add_argument("--sweep", metavar="KEY=V1,V2,...", help="run one point per value of KEY")
    run.add_argument("--allow-large-n", action="store_true", help="permit exact runs with more than 200 sites")
    sub.add_parser("presets", help="list built-in presets")
    return parser


def _split_assignment(text: str, option: str):
    key, sep, value = text.partition("=")
    if not sep or not key:
        raise ConfigError(f"expected KEY=VALUE, got {text!r}", option)
    return key.strip(), value.strip()


def _load_document(args) -> dict:
    doc: dict = {}
    if args.config:
        path = Path(args.config)
        try:
            text = path.read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigError(f"cannot read configuration: {exc.strerror}", str(path)) from exc
        try:
            doc = tomllib.loads(text)
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"malformed document: {exc}", str(path)) from exc
    if args.preset:
        doc["preset"] = args.preset
    if not doc:
        raise ConfigError("give a configuration file or --preset")
    for item in args.set:
        key, value = _split_assignment(item, "--set")
        doc = apply_override(doc, key, value)
    if args.allow_large_n:
        doc = apply_override(doc, "run.allow_large_n", True)
    return doc


def _run(args) -> int:
    doc = _load_document(args)
    if args.sweep:
        key, values = _split_assignment(args.sweep, "--sweep")
        points = [v.strip() for v in values.split(",") if v.strip()]
        done = run_sweep(doc, key, points, args.out, args.format)
        for value, target in done.items():
            print(f"{key}={value}: {target}")
        return EXIT_OK
    config = parse_config_dict(doc)
    result = run_experiment(config)
    written = emit_series(result, args.out, args.format)
    for w in result.manifest["warnings"]:
        print(f"warning: {w}", file=sys.stderr)
    for path in written:
        print(path)
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    if args.command == "presets":
        for name in sorted(PRESETS):
            print(name)
        return EXIT_OK
    try:
        return _run(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except StructuralViolationError as exc:
        print(f"numerical error: {exc}\n{STRUCTURAL_HINT}", file=sys.stderr)
        return EXIT_NUMERIC
    except NumericError as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except OscbusError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
