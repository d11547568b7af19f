"""``qfp run <scenario> [--out DIR] [--batch GLOB] [--check]``.

Exit codes: 0 success, 1 invariant violated (``--check``), 2 scenario
validation failure, 3 numerical guard failure, 4 I/O failure.  Failures
print a one-line JSON error record on stderr and, when the output directory
is writable, also store it as ``error.json``.
"""

from __future__ import annotations

import argparse
import glob
import json
import os
import platform
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from .errors import ConsistencyError, NumericalGuardError, ValidationError
from .io import write_csv, write_json
from .scenario import load_scenario
from .stages import run_stage

EXIT_OK, EXIT_CHECK, EXIT_VALIDATION, EXIT_NUMERIC, EXIT_IO = 0, 1, 2, 3, 4


def _versions() -> dict:
    return {
        "qfp": __version__,
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "python": platform.python_version(),
    }


def _error_record(kind: str, exc: Exception, code: int, scenario: str) -> dict:
    rec = {"scenario": scenario, "error": kind, "message": str(exc), "exit_code": code}
    suggestion = getattr(exc, "suggestion", None)
    if suggestion is not None:
        rec["suggestion"] = suggestion
    return rec


def _write_outputs(out: Path, scenario, result):
    out.mkdir(parents=True, exist_ok=True)
    files = []
    for name, table in result.tables.items():
        write_csv(out / f"{name}.csv", table.header, table.rows)
        files.append(f"{name}.csv")
    for name, kernel in result.kernels.items():
        kernel.to_csv(out / f"{name}.csv")
        files.append(f"{name}.csv")
    write_json(out / "summary.json", dict(sorted(result.summary.items())))
    manifest = {
        "scenario": scenario.echo(),
        "stage": scenario.stage,
        "versions": _versions(),
        "files": sorted(files + ["summary.json"]),
    }
    write_json(out / "manifest.json", manifest)


def run_one(path, out_dir=None, check=False, stream=None) -> int:
    """Run a single scenario file and return its exit code."""
    stream = sys.stdout if stream is None else stream
    name = str(path)
    out = None
    try:
        try:
            scenario = load_scenario(path)
        except OSError as exc:
            raise _IOFailure(exc) from exc
        name = scenario.name
        if out_dir is not None:
            out = Path(out_dir)
        else:
            out = Path(scenario.get("output", "dir", f"runs/{scenario.name}"))
            if not out.is_absolute():
                out = scenario.base_dir / out
        result = run_stage(scenario)
        if check:
            for key, (ok, value) in sorted(result.checks.items()):
                print(f"[{'PASS' if ok else 'FAIL'}] {scenario.name}: {key} = {value:.3e}", file=stream)
            return EXIT_OK if result.ok else EXIT_CHECK
        try:
            _write_outputs(out, scenario, result)
        except OSError as exc:
            raise _IOFailure(exc) from exc
        print(f"{scenario.name}: wrote {out}", file=stream)
        return EXIT_OK
    except ValidationError as exc:
        return _fail("validation", exc, EXIT_VALIDATION, name, out)
    except (NumericalGuardError, ConsistencyError) as exc:
        return _fail("numerical", exc, EXIT_NUMERIC, name, out)
    except _IOFailure as exc:
        return _fail("io", exc.__cause__, EXIT_IO, name, None)
    except OSError as exc:  # e.g. a referenced table file
        return _fail("io", exc, EXIT_IO, name, out)


class _IOFailure(Exception):
    pass


def _fail(kind, exc, code, name, out) -> int:
    rec = _error_record(kind, exc, code, name)
    print(json.dumps(rec, sort_keys=True), file=sys.stderr)
    if out is not None:
        try:
            out.mkdir(parents=True, exist_ok=True)
            write_json(out / "error.json", rec)
        except OSError:
            pass
    return code


def _batch(paths, out_dir, check) -> int:
    threads = int(os.environ.get("QFP_THREADS", 0)) or os.cpu_count() or 1

    def job(p):
        sub = None if out_dir is None else Path(out_dir) / Path(p).stem
        return run_one(p, sub, check)

    with ThreadPoolExecutor(max_workers=threads) as pool:
        codes = list(pool.map(job, paths))
    return max(codes, default=EXIT_OK)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qfp", description="Quantum-to-Fokker-Planck scenario runner")
    sub = parser.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run a scenario file")
    run.add_argument("scenario", nargs="?", help="scenario file (INI format)")
    run.add_argument("--out", help="output directory (overrides [output] dir)")
    run.add_argument("--batch", metavar="GLOB", help="run every scenario matching GLOB in parallel")
    run.add_argument("--check", action="store_true", help="only evaluate invariants; exit 1 on violation")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.batch:
        paths = sorted(glob.glob(args.batch))
        if args.scenario:
            paths.insert(0, args.scenario)
        if not paths:
            print(json.dumps({"error": "io", "message": f"no scenario matches {args.batch!r}", "exit_code": EXIT_IO}), file=sys.stderr)
            return EXIT_IO
        return _batch(paths, args.out, args.check)
    if not args.scenario:
        print(json.dumps({"error": "validation", "message": "no scenario file given", "exit_code": EXIT_VALIDATION}), file=sys.stderr)
        return EXIT_VALIDATION
    return run_one(args.scenario, args.out, args.check)


if __name__ == "__main__":
    sys.exit(main())
