"""Command line entry point: ``autocomply analyze PATH...``."""

from __future__ import annotations

import argparse
import logging
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Optional

from . import __version__
from .apk import open_apk
from .ccfg import dump_ccfg
from .checkers import ALL_CHECKERS, CheckerConfig, analyze
from .errors import AutoComplyError
from .fixture import load_fixture_file
from .model import build_from_apk
from .report import EMITTERS, AppReport, Report, emit, exit_status

EX_USAGE = 64
log = logging.getLogger("autocomply")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EX_USAGE, f"{self.prog}: error: {message}\n")


def _positive(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}")
    if value < 1:
        raise argparse.ArgumentTypeError("must be at least 1")
    return value


def _depth(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}")
    if value < 0:
        raise argparse.ArgumentTypeError("must be at least 0")
    return value


def _checkers(text: str) -> frozenset[str]:
    names = frozenset(t.strip() for t in text.split(",") if t.strip())
    bad = names - ALL_CHECKERS
    if bad or not names:
        raise argparse.ArgumentTypeError(
            f"unknown checker(s) {', '.join(sorted(bad)) or '(none)'}; choose from {','.join(sorted(ALL_CHECKERS))}")
    return names


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="autocomply", description="Check Android Auto media apps for platform compliance.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    a = sub.add_parser("analyze", help="analyze APKs or text fixtures")
    a.add_argument("paths", nargs="+", metavar="PATH", help="APK file, fixture file, or a directory of them")
    a.add_argument("--format", choices=sorted(EMITTERS), default="text")
    a.add_argument("--checkers", type=_checkers, default=ALL_CHECKERS,
                   help="comma-separated subset of media,ui,voice,disc (default: all)")
    a.add_argument("--max-inline-depth", type=_depth, default=3, metavar="N")
    a.add_argument("--path-budget", type=_positive, default=10_000, metavar="N")
    a.add_argument("--step-budget", type=_positive, default=1_000_000, metavar="N")
    a.add_argument("--dump-ccfg", metavar="PATH",
                   help="write the graph dump here (a directory when several apps are analyzed)")
    a.add_argument("--fixture", action="store_true", help="inputs are YAML text fixtures, not APKs")
    a.add_argument("--output", "-o", metavar="PATH", help="write the report here instead of stdout")
    a.add_argument("--jobs", "-j", type=_positive, default=1, metavar="N")
    return parser


def expand_inputs(paths: list[str], fixture: bool) -> list[str]:
    out = []
    for p in paths:
        if os.path.isdir(p):
            patterns = ("*.yaml", "*.yml") if fixture else ("*.apk",)
            found = sorted({str(f) for pat in patterns for f in Path(p).glob(pat)})
            if not found:
                log.warning("directory %s contains no inputs", p)
            out.extend(found)
        else:
            out.append(p)
    return out


def analyze_one(path: str, fixture: bool, config: CheckerConfig, dump: bool = False) -> tuple[AppReport, Optional[str]]:
    """Run the full pipeline on one input; failures become report errors."""
    app = AppReport(path)
    clock = time.perf_counter
    try:
        t0 = clock()
        if fixture:
            with open(path, encoding="utf-8") as fh:
                fh.read()
            t1 = clock()
            model = load_fixture_file(path)
        else:
            contents = open_apk(path)
            t1 = clock()
            model = build_from_apk(contents, path)
        t2 = clock()
        app.timing.update({"open": t1 - t0, "decode": t2 - t1})
        result = analyze(model, config, clock)
        app.timing["ccfg"] = result.timing.get("ccfg", 0.0)
        app.timing["check"] = result.timing.get("check", 0.0)
        app.findings = result.findings
        text = dump_ccfg(result.ccfg) if dump and result.ccfg is not None else None
        return app, text
    except AutoComplyError as exc:
        app.errors.append(f"{type(exc).__name__}: {exc}")
    except OSError as exc:
        app.errors.append(f"{type(exc).__name__}: {exc.strerror or exc}")
    except Exception as exc:  # keep the batch going
        log.exception("internal error on %s", path)
        app.errors.append(f"InternalError: {type(exc).__name__}: {exc}")
    return app, None


def _write_dumps(target: str, inputs: list[str], dumps: list[Optional[str]]) -> None:
    if len(inputs) == 1:
        if dumps[0] is not None:
            Path(target).write_text(dumps[0], encoding="utf-8")
        return
    os.makedirs(target, exist_ok=True)
    for path, text in zip(inputs, dumps):
        if text is not None:
            Path(target, Path(path).name + ".ccfg").write_text(text, encoding="utf-8")


def run(args: argparse.Namespace) -> int:
    config = CheckerConfig(args.checkers, args.max_inline_depth, args.path_budget, args.step_budget)
    inputs = expand_inputs(args.paths, args.fixture)
    dump = args.dump_ccfg is not None
    if args.jobs > 1 and len(inputs) > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            results = list(pool.map(analyze_one, inputs, [args.fixture] * len(inputs),
                                    [config] * len(inputs), [dump] * len(inputs)))
    else:
        results = [analyze_one(p, args.fixture, config, dump) for p in inputs]
    report = Report([r[0] for r in results])
    if dump:
        _write_dumps(args.dump_ccfg, inputs, [r[1] for r in results])
    data = emit(report, args.format)
    if args.output:
        Path(args.output).write_bytes(data)
    else:
        sys.stdout.buffer.write(data)
        sys.stdout.flush()
    return exit_status(report)


def main(argv: Optional[list[str]] = None) -> int:
    level = os.environ.get("AUTOCOMPLY_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING), stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    return run(args)


if __name__ == "__main__":
    sys.exit(main())
