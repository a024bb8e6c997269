"""Command line: ``symplab run <config>``, ``symplab verify``, ``symplab families``.

Exit status: 0 success, 1 internal error, 2 usage or config error,
3 precondition failure, 4 acceptance criterion failed.
"""
from __future__ import annotations

import argparse
import logging
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

from . import io
from .errors import ConfigError, PreconditionError, SymplabError
from .maps import FAMILIES

EXIT_OK, EXIT_INTERNAL, EXIT_USAGE, EXIT_PRECONDITION, EXIT_FAILED = 0, 1, 2, 3, 4
OUTPUT_ENV = "SYMPLAB_OUTPUT"
DEFAULT_OUTPUT = "symplab-output"

log = logging.getLogger("symplab")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def _output_root(arg):
    return Path(arg or os.environ.get(OUTPUT_ENV) or DEFAULT_OUTPUT)


def cmd_run(args):
    from .config import load_config
    from .tasks import run_task

    cfg = load_config(args.config, args.override)
    root = _output_root(args.output or cfg.output)
    target = root / Path(args.config).stem
    files = run_task(cfg, target)
    for f in files:
        print(f)
    print(target / io.MANIFEST)
    return EXIT_OK


def _parse_overrides(items):
    from .acceptance import DEFAULTS
    from .config import parse_value

    out = {}
    for item in items:
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not key=value", item)
        key, value = (s.strip() for s in item.split("=", 1))
        if key not in DEFAULTS:
            raise ConfigError(f"unknown tolerance; known: {sorted(DEFAULTS)}", key)
        out[key] = parse_value(value)
    return out


def cmd_verify(args):
    from .acceptance import MODULES, run_criterion, select

    unknown = sorted(set(args.only or ()) - set(MODULES))
    if unknown:
        raise ConfigError(f"unknown module {unknown[0]!r}; known: {MODULES}", "--only")
    overrides = _parse_overrides(args.override)
    numbers = select(args.only)
    # results are gathered in criterion order whatever the scheduling
    if args.threads > 1:
        with ThreadPoolExecutor(max_workers=args.threads) as pool:
            results = list(pool.map(lambda n: run_criterion(n, overrides), numbers))
    else:
        results = [run_criterion(n, overrides) for n in numbers]
    for r in results:
        print(r.line())
        for c in r.checks:
            mark = "ok " if c.passed else "BAD"
            print(f"    {mark} {c.name}: expected {c.expected}, observed {c.observed}, tol {c.tolerance}")
    root = _output_root(args.output) / "verify"
    root.mkdir(parents=True, exist_ok=True)
    io.write_jsonl(root / "results.jsonl", results)
    io.write_manifest(root)
    failed = [r.number for r in results if not r.passed]
    print(f"{len(results) - len(failed)}/{len(results)} criteria passed" + (f"; failed: {failed}" if failed else ""))
    return EXIT_FAILED if failed else EXIT_OK


def cmd_families(args):
    for name in sorted(FAMILIES):
        print(f"{name:20s} {FAMILIES[name][1]}")
    return EXIT_OK


def build_parser():
    p = _Parser(prog="symplab", description="Homoclinic intersections of symplectic surface maps.")
    p.add_argument("--threads", type=int, default=1, help="worker threads for independent criteria")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)
    r = sub.add_parser("run", help="run one experiment config")
    r.add_argument("config")
    r.add_argument("--output", help=f"output root (default ${OUTPUT_ENV} or ./{DEFAULT_OUTPUT})")
    r.add_argument("--override", action="append", default=[], metavar="KEY=VALUE",
                   help="set a dotted config key, e.g. periodic-search.n=3")
    r.set_defaults(func=cmd_run)
    v = sub.add_parser("verify", help="run the acceptance criteria")
    v.add_argument("--only", action="append", metavar="MODULE", help="restrict to a module (repeatable)")
    v.add_argument("--override", action="append", default=[], metavar="KEY=VALUE",
                   help="replace a default tolerance, e.g. tol_hyp=10")
    v.add_argument("--output", help=f"output root (default ${OUTPUT_ENV} or ./{DEFAULT_OUTPUT})")
    v.set_defaults(func=cmd_verify)
    f = sub.add_parser("families", help="list built-in map families")
    f.set_defaults(func=cmd_families)
    return p


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.ERROR, format="%(levelname)s %(name)s: %(message)s")
    if args.command is None:
        parser.print_usage(sys.stderr)
        return EXIT_USAGE
    if args.threads < 1:
        print("symplab: error: --threads must be >= 1", file=sys.stderr)
        return EXIT_USAGE
    try:
        return args.func(args)
    except ConfigError as exc:
        where = f" at {exc.key_path}" if exc.key_path else ""
        print(f"symplab: config error{where}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except PreconditionError as exc:
        print(f"symplab: precondition failed: {exc}", file=sys.stderr)
        return EXIT_PRECONDITION
    except SymplabError as exc:
        print(f"symplab: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    except Exception as exc:  # noqa: BLE001
        log.exception("internal error")
        print(f"symplab: internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
