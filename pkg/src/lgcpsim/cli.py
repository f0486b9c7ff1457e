"""Command-line entry point: ``lgcpsim {generate,run,verify,compare-sched}``.

Exit codes: 0 success, 1 validation/config error, 2 run finished with
per-row failures (or failed verification properties).
"""

from __future__ import annotations

import argparse
import json
import logging
import re
import sys
from pathlib import Path

from . import experiment
from .config import PRESETS, load_config
from .errors import LgcpError

EXIT_OK, EXIT_INVALID, EXIT_ROW_FAILURES = 0, 1, 2


def parse_int_list(text: str) -> list[int]:
    """'1,2,5-7' -> [1, 2, 5, 6, 7]."""
    out = []
    for part in filter(None, (p.strip() for p in text.split(","))):
        m = re.fullmatch(r"(\d+)-(\d+)", part)
        if m:
            out.extend(range(int(m[1]), int(m[2]) + 1))
        else:
            out.append(int(part))
    return out


def parse_float_list(text: str) -> list[float]:
    return [float(p) for p in text.split(",") if p.strip()]


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="experiment config JSON file")
    common.add_argument("--preset", choices=sorted(PRESETS), help="install a named parameter preset")
    common.add_argument("--seeds", type=parse_int_list, help="e.g. 0-49 or 1,2,3")
    common.add_argument("--n-cavs", type=parse_int_list, help="CAV counts to sweep, e.g. 2-7")
    common.add_argument("--delta-g", type=parse_float_list, help="thresholds, e.g. 0.05,0.075")
    common.add_argument("--paradigms", type=lambda s: [p.strip() for p in s.split(",") if p.strip()])
    common.add_argument("--out", help="output file (directory for generate); stdout if omitted")
    common.add_argument("--format", choices=["csv", "json"])
    common.add_argument("--jobs", type=int, help="worker processes for sweeps")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="lgcpsim", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("generate", parents=[common], help="write one scenario file per (seed, n_cavs)")
    sub.add_parser("run", parents=[common], help="sweep paradigms and thresholds, emit a result table")
    sub.add_parser("verify", parents=[common], help="compare heuristics against exhaustive oracles")
    sub.add_parser("compare-sched", parents=[common], help="priority vs random scheduling order")
    return parser


def _emit(text: str, out: str | None) -> None:
    if out is None:
        sys.stdout.write(text)
    else:
        Path(out).parent.mkdir(parents=True, exist_ok=True)
        Path(out).write_text(text)


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    overrides = {"seeds": args.seeds, "n_cavs": args.n_cavs, "delta_g": args.delta_g,
                 "paradigms": args.paradigms, "out": args.out, "format": args.format,
                 "jobs": args.jobs}
    try:
        config = load_config(args.config, args.preset, overrides)
        if args.command == "generate":
            paths = experiment.cmd_generate(config, config.out or ".")
            for p in paths:
                print(p)
            return EXIT_OK
        if args.command == "run":
            result = experiment.cmd_run(config)
            _emit(result.to_csv() if config.format == "csv" else result.to_json(), config.out)
            return EXIT_ROW_FAILURES if result.n_errors else EXIT_OK
        if args.command == "verify":
            report = experiment.cmd_verify(config)
            _emit(json.dumps(report, indent=2) + "\n", config.out)
            return EXIT_OK if report["all_passed"] else EXIT_ROW_FAILURES
        report = experiment.cmd_compare_sched(config)
        _emit(json.dumps(report, indent=2) + "\n", config.out)
        return EXIT_OK
    except (LgcpError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
