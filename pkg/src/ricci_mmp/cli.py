"""ricci-mmp command line: run and validate scenarios, list suites."""

from __future__ import annotations

import argparse
import json
import os
import sys
import tempfile
import traceback
from pathlib import Path

from . import runner, suites
from .scenario import SchemaError, load_scenario

EXIT_OK, EXIT_FAILED, EXIT_INPUT = 0, 1, 2


def write_atomic(path: Path, payload: bytes) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix="." + path.name, suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(payload)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _dump(doc) -> bytes:
    return (json.dumps(doc, sort_keys=True, indent=2, default=str) + "\n").encode()


def execute(sc, jobs: int = 1) -> runner.Outcome:
    if sc.kind == "mmp":
        return runner.run_mmp(sc)
    if sc.kind == "flow":
        return runner.run_flow_scenario(sc)
    if sc.kind == "elliptic":
        return runner.run_elliptic(sc)
    if sc.kind == "sphere":
        return runner.run_sphere_scenario(sc)
    try:
        names = suites.resolve(sc.suites)
    except KeyError as exc:
        raise SchemaError(str(exc.args[0])) from None
    results = suites.run_suites(names, seed=sc.seed, jobs=jobs)
    for r in results:
        print(r.line())
    return runner.Outcome(all(r.passed for r in results), {"suites": [r.to_dict() for r in results]})


def cmd_run(args) -> int:
    try:
        sc = load_scenario(args.scenario)
    except SchemaError as exc:
        print("input error: %s" % exc, file=sys.stderr)
        return EXIT_INPUT
    out = Path(args.out) if args.out else Path(args.scenario).with_suffix("").name + "_out"
    out = Path(out)
    header = {"scenario": Path(args.scenario).name, "kind": sc.kind, "seed": sc.seed,
              "paper_ref": sc.paper_ref}
    try:
        outcome = execute(sc, jobs=args.jobs)
    except SchemaError as exc:
        print("input error: %s" % exc, file=sys.stderr)
        return EXIT_INPUT
    except Exception as exc:
        diag = {**header, "error": type(exc).__name__, "message": str(exc),
                "diagnostic": getattr(exc, "diagnostic", None),
                "traceback": traceback.format_exc().splitlines()[-6:]}
        write_atomic(out / "diagnostic.json", _dump(diag))
        print(json.dumps(diag, default=str), file=sys.stderr)
        return EXIT_FAILED
    for name, payload in sorted(outcome.files.items()):
        write_atomic(out / name, payload)
    write_atomic(out / "summary.json", _dump({**header, "passed": outcome.passed, **outcome.summary}))
    print("%s %s -> %s" % ("PASS" if outcome.passed else "FAIL", header["scenario"], out))
    return EXIT_OK if outcome.passed else EXIT_FAILED


def cmd_validate(args) -> int:
    try:
        sc = load_scenario(args.scenario)
    except SchemaError as exc:
        print("input error: %s" % exc, file=sys.stderr)
        return EXIT_INPUT
    print("ok: %s scenario (%s)" % (sc.kind, sc.paper_ref))
    return EXIT_OK


def cmd_suites(args) -> int:
    sys.stdout.write(suites.list_suites())
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="ricci-mmp", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="run a scenario and write its artifacts")
    r.add_argument("scenario")
    r.add_argument("--out", help="output directory (default: <scenario>_out)")
    r.add_argument("--jobs", type=int, default=1, help="concurrent suites for suite scenarios")
    r.set_defaults(func=cmd_run)
    v = sub.add_parser("validate", help="check a scenario against the schema")
    v.add_argument("scenario")
    v.set_defaults(func=cmd_validate)
    s = sub.add_parser("suites", help="list the named acceptance suites")
    s.set_defaults(func=cmd_suites)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if getattr(args, "jobs", 1) < 1:
        print("input error: --jobs must be >= 1", file=sys.stderr)
        return EXIT_INPUT
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
