"""Command-line entry point: run one JSON-described experiment.

    gbmcouple --run experiment.json [--out DIR] [--threads N] [--verbose]

Exit status: 0 on success, 1 on input errors (bad run file or
parameters), 2 when the experiment ran but a consistency check failed.
"""

from __future__ import annotations

import argparse
import sys
import warnings

from .params import SpecError
from .runfile import RunFileError, load_run_file


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gbmcouple",
        description="Coupling-time experiments for two geometric Brownian motions.",
    )
    parser.add_argument("--run", required=True, help="path to the JSON run file")
    parser.add_argument("--out", default=None, help="output directory (overrides the run file)")
    parser.add_argument("--threads", type=int, default=1, help="worker threads for path simulation")
    parser.add_argument("--verbose", action="store_true", help="list artifacts and failures")
    return parser


def main(argv=None) -> int:
    warnings.filterwarnings("ignore", message=".*TBB.*")
    args = build_parser().parse_args(argv)
    try:
        run_file = load_run_file(args.run)
        out_dir = args.out or run_file.output_dir
        if out_dir is None:
            raise RunFileError("no output directory: set output_dir in the run file or pass --out")
        if args.threads < 1:
            raise RunFileError("--threads must be at least 1")
    except (RunFileError, SpecError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    from . import experiments  # deferred: imports numba-compiled modules

    try:
        status = experiments.run(run_file, out_dir, threads=args.threads, verbose=args.verbose)
    except (RunFileError, SpecError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    if status != 0:
        print("consistency failures recorded in manifest.json", file=sys.stderr)
    return status


if __name__ == "__main__":
    sys.exit(main())
