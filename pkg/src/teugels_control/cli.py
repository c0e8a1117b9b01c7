"""Command line entry point.

Exit codes: 0 success, 1 invalid scenario or arguments, 2 numerical failure
while running a stage, 3 acceptance or comparison failure.
"""

from __future__ import annotations

import argparse
import os
import sys
import time

from . import __version__, report
from .runners import RUNNERS
from .scenario import Scenario, ScenarioError, load_scenario

OUT_ENV_VAR = "TEUGELS_CONTROL_OUT"

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_NUMERICAL = 2
EXIT_ACCEPT = 3


class _Parser(argparse.ArgumentParser):
    """argparse exits with 2 on bad arguments; remap to the validation code."""

    def error(self, message: str):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def _build_parser() -> _Parser:
    parser = _Parser(prog="teugels-control",
                     description="Polynomial-basis simulation, backward "
                                 "equations, and control values for jump "
                                 "diffusions driven by a Levy triplet.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    commands = {
        "basis": "build the orthonormal polynomial basis and report its defect",
        "simulate": "simulate the path ensemble and check bracket identities",
        "bsde": "solve the backward equation along simulated paths",
        "value-mc": "dynamic-programming value surface by regression Monte Carlo",
        "hjb": "finite-difference value surface with a refinement study",
        "compare": "cross-check the Monte Carlo and grid value surfaces",
        "accept": "run every acceptance criterion and write a summary table",
    }
    for name, summary in commands.items():
        p = sub.add_parser(name, help=summary, description=summary)
        p.add_argument("--scenario", required=True, metavar="FILE",
                       help="path to a scenario file")
        p.add_argument("--out", metavar="DIR", default=None,
                       help=f"output directory (default: ${OUT_ENV_VAR}, then "
                            "the scenario [outputs] section, then ./out)")
        p.add_argument("--workers", type=int, default=1, metavar="N",
                       help="worker processes; results are identical for any "
                            "value (accepted for interface compatibility)")
        p.add_argument("--no-plots", action="store_true",
                       help="skip figure rendering, write only delimited output")
    return parser


def _resolve_out(args: argparse.Namespace, scenario: Scenario) -> str:
    if args.out:
        return args.out
    env = os.environ.get(OUT_ENV_VAR, "")
    if env:
        return env
    if scenario.out_dir:
        return scenario.out_dir
    return "out"


def _write_manifest(scenario: Scenario, out_dir: str, command: str,
                    files: list[str], t0: float) -> str:
    outputs = {os.path.basename(f): report.sha256_file(f) for f in files}
    manifest = report.RunManifest(scenario_digest=scenario.digest,
                                  version=__version__,
                                  command=command,
                                  duration_seconds=time.monotonic() - t0,
                                  outputs=outputs)
    path = os.path.join(out_dir, scenario.filenames["manifest_json"])
    manifest.write(path)
    return path


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    if args.workers < 1:
        print("error: --workers must be at least 1", file=sys.stderr)
        return EXIT_USAGE

    try:
        scenario = load_scenario(args.scenario)
    except OSError as exc:
        print(f"error: cannot read scenario: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ScenarioError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE

    out_dir = _resolve_out(args, scenario)
    os.makedirs(out_dir, exist_ok=True)
    t0 = time.monotonic()

    if args.command == "accept":
        from .acceptance import run_accept
        try:
            res = run_accept(scenario, out_dir, plots=not args.no_plots)
        except Exception as exc:
            print(f"error: acceptance run failed: {exc}", file=sys.stderr)
            return EXIT_NUMERICAL
        res.files.append(_write_manifest(scenario, out_dir, "accept",
                                         res.files, t0))
        for line in res.lines:
            print(line)
        for f in res.files:
            print(f"wrote {f}")
        return EXIT_OK if res.ok else EXIT_ACCEPT

    runner = RUNNERS[args.command]
    try:
        res = runner(scenario, out_dir, plots=not args.no_plots)
    except Exception as exc:
        print(f"error: {args.command} failed: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    res.files.append(_write_manifest(scenario, out_dir, args.command,
                                     res.files, t0))
    for line in res.lines:
        print(line)
    for f in res.files:
        print(f"wrote {f}")
    if args.command == "compare" and not res.ok:
        return EXIT_ACCEPT
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
