"""Command-line front end.

Subcommands:

- `rvm run PATHS` checks .vmtest files against a model and compares the
  computed verdicts with each test's [expected] section;
- `rvm meta PATHS` prints structural information about tests without running
  the models;
- `rvm table REPORT.json` renders a verdict table from a report previously
  written with `rvm run --json`.
"""

from __future__ import annotations

import argparse
import json
import multiprocessing
import sys
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Dict, List, Optional

from .candidates import GenerationError, enumerate_candidates
from .litmus import TestSpec, check_final, parse_test
from .models import (EraseError, check_base, check_strong, check_weak,
                     detect_bbm, erase, bbm_smt)
from .pagetable import SetupError, build_images
from . import dot as dotmod


@dataclass
class TestReport:
    name: str
    path: str
    model: str
    verdict: str                       # "allow" | "forbid" | "error"
    expected: Optional[str]
    ok: bool                           # verdict matches expectation (or none)
    candidates: int = 0
    consistent_candidates: int = 0
    bbm_flagged: bool = False
    seconds: float = 0.0
    error: Optional[str] = None
    warnings: List[str] = field(default_factory=list)


def _model_key(model: str, ets: bool) -> str:
    if model == "strong" and ets:
        return "ets"
    return model


def run_test(spec: TestSpec, model: str = "strong", ets: bool = False,
             reduction: bool = True, budget: int = 20000,
             dot_dir: Optional[str] = None, smt_dir: Optional[str] = None,
             dump_cycle: bool = False, path: str = "-") -> TestReport:
    key = _model_key(model, ets)
    expected = spec.expected.get(key)
    t0 = time.monotonic()
    report = TestReport(name=spec.name, path=path, model=key,
                        verdict="error", expected=expected, ok=False)
    try:
        image = build_images(spec.parsed_setup())
        allowed = False
        witness = None
        forbidden_example = None
        bbm = False
        for cand in enumerate_candidates(spec, image, budget=budget,
                                         reduction=reduction):
            report.candidates += 1
            report.warnings.extend(w for w in cand.warnings
                                   if w not in report.warnings)
            if model == "base":
                cand = erase(cand)
                res = check_base(cand)
            elif model == "weak":
                res = check_weak(cand)
            else:
                res = check_strong(cand, ets=ets)
            if res.consistent:
                report.consistent_candidates += 1
                if model == "strong" and detect_bbm(cand, res):
                    bbm = True
                    if smt_dir:
                        _write(Path(smt_dir), f"{spec.name}.smt2",
                               bbm_smt(cand))
                if check_final(spec.final, cand.outcome):
                    allowed = True
                    if witness is None:
                        witness = (cand, res)
            elif check_final(spec.final, cand.outcome) \
                    and forbidden_example is None:
                forbidden_example = (cand, res)
        report.verdict = "allow" if allowed else "forbid"
        report.bbm_flagged = bbm
        want_cands = spec.expected.get("candidates")
        if want_cands is not None and int(want_cands) != report.candidates:
            report.warnings.append(
                f"candidate count {report.candidates} differs from the "
                f"expected {want_cands}")
        want_bbm = spec.expected.get("bbm")
        if model == "strong" and want_bbm is not None \
                and bbm != (want_bbm == "flagged"):
            report.ok = False
            report.error = (f"break-before-make flag is {bbm}, "
                            f"expected {want_bbm}")
            return _finish(report, t0, expected)
        shown = witness or forbidden_example
        if dot_dir and shown is not None:
            _write(Path(dot_dir), f"{spec.name}.dot",
                   dotmod.render_dot(shown[0], shown[1]))
        if dump_cycle and not allowed and forbidden_example is not None:
            res = forbidden_example[1]
            if res.cycle:
                cyc = " -> ".join(
                    forbidden_example[0].events[e].short()
                    for e in res.cycle)
                report.warnings.append(f"cycle ({res.failed_axiom}): {cyc}")
                for a, b, lbl in res.cycle_edges:
                    report.warnings.append(f"  e{a} -> e{b} via {lbl}")
            elif res.failed_axiom:
                report.warnings.append(f"failed axiom: {res.failed_axiom}")
    except (SetupError, GenerationError, EraseError, ValueError,
            RuntimeError) as exc:
        report.error = f"{type(exc).__name__}: {exc}"
        return _finish(report, t0, expected)
    return _finish(report, t0, expected)


def _finish(report: TestReport, t0: float,
            expected: Optional[str]) -> TestReport:
    report.seconds = round(time.monotonic() - t0, 3)
    report.ok = report.error is None \
        and (expected is None or report.verdict == expected)
    return report


def _write(directory: Path, name: str, content: str) -> None:
    directory.mkdir(parents=True, exist_ok=True)
    (directory / name).write_text(content)


def discover(paths: List[str]) -> List[Path]:
    out: List[Path] = []
    for p in paths:
        path = Path(p)
        if path.is_dir():
            out.extend(sorted(path.rglob("*.vmtest")))
        else:
            out.append(path)
    return out


def _run_one(args) -> TestReport:
    path, ns = args
    try:
        spec = parse_test(Path(path).read_text())
    except Exception as exc:
        return TestReport(name=str(path), path=str(path),
                          model=_model_key(ns.model, ns.ets),
                          verdict="error", expected=None, ok=False,
                          error=f"{type(exc).__name__}: {exc}")
    return run_test(spec, model=ns.model, ets=ns.ets,
                    reduction=not ns.no_reduction,
                    budget=ns.max_candidates, dot_dir=ns.emit_dot,
                    smt_dir=ns.emit_smt, dump_cycle=ns.dump_cycle,
                    path=str(path))


def _cmd_run(ns) -> int:
    files = discover(ns.paths)
    if not files:
        print("no .vmtest files found", file=sys.stderr)
        return 2
    jobs = ns.jobs or 1
    work = [(f, ns) for f in files]
    if jobs > 1:
        with multiprocessing.Pool(jobs) as pool:
            reports = pool.map(_run_one, work)
    else:
        reports = [_run_one(w) for w in work]
    failed = 0
    for r in reports:
        mark = "ok " if r.ok else "FAIL"
        exp = r.expected if r.expected is not None else "-"
        line = (f"[{mark}] {r.name:42s} {r.model:8s} "
                f"verdict={r.verdict:7s} expected={exp:7s} "
                f"candidates={r.candidates:4d} {r.seconds:7.2f}s")
        if r.bbm_flagged:
            line += "  [BBM]"
        print(line)
        if r.error:
            print(f"       error: {r.error}")
        for w in r.warnings:
            print(f"       note: {w}")
        if not r.ok:
            failed += 1
    print(f"{len(reports) - failed}/{len(reports)} tests as expected")
    if ns.json:
        Path(ns.json).write_text(json.dumps([asdict(r) for r in reports],
                                            indent=2))
    return 0 if failed == 0 else 1


def _cmd_meta(ns) -> int:
    for path in discover(ns.paths):
        try:
            spec = parse_test(path.read_text())
            setup = spec.parsed_setup()
        except Exception as exc:
            print(f"{path}: parse error: {exc}")
            continue
        instrs = sum(len(v) for v in spec.threads.values())
        handlers = sum(len(v) for v in spec.handlers.values())
        print(f"{spec.name}")
        print(f"  file:      {path}")
        print(f"  threads:   {len(spec.threads)} ({instrs} instructions, "
              f"{handlers} handlers)")
        print(f"  addresses: virtual={setup.virtual} "
              f"intermediate={setup.intermediate} physical={setup.physical}")
        print(f"  tables:    {[t.name for t in setup.tables] or 'default'}")
        print(f"  expected:  {spec.expected or '(none)'}")
    return 0


def _cmd_table(ns) -> int:
    reports = json.loads(Path(ns.report).read_text())
    widths = (max((len(r["name"]) for r in reports), default=4), 8, 7, 7)
    header = (f"{'test':<{widths[0]}}  {'model':<8}  {'verdict':<7}  "
              f"{'expected':<8}  cands   time")
    print(header)
    print("-" * len(header))
    mismatched = 0
    for r in reports:
        exp = r["expected"] if r["expected"] is not None else "-"
        mark = "" if r["ok"] else "   <-- mismatch"
        if not r["ok"]:
            mismatched += 1
        print(f"{r['name']:<{widths[0]}}  {r['model']:<8}  "
              f"{r['verdict']:<7}  {exp:<8}  {r['candidates']:5d}  "
              f"{r['seconds']:5.2f}s{mark}")
    print(f"\n{len(reports) - mismatched}/{len(reports)} as expected")
    return 0 if mismatched == 0 else 1


def main(argv: Optional[List[str]] = None) -> int:
    parser = argparse.ArgumentParser(
        prog="rvm",
        description="relaxed virtual-memory litmus test checker")
    sub = parser.add_subparsers(dest="cmd", required=True)

    p_run = sub.add_parser("run", help="check tests against a model")
    p_run.add_argument("paths", nargs="+")
    p_run.add_argument("--model", choices=("strong", "weak", "base"),
                       default="strong")
    p_run.add_argument("--ets", action="store_true",
                       help="enable the ETS strengthening (strong model)")
    p_run.add_argument("--jobs", type=int, default=1)
    p_run.add_argument("--max-candidates", type=int, default=20000)
    p_run.add_argument("--no-reduction", action="store_true",
                       help="explore forced translation reads too")
    p_run.add_argument("--emit-dot", metavar="DIR")
    p_run.add_argument("--emit-smt", metavar="DIR")
    p_run.add_argument("--json", metavar="FILE",
                       help="write a JSON report")
    p_run.add_argument("--dump-cycle", action="store_true",
                       help="print the ordering cycle of forbidden outcomes")
    p_run.set_defaults(func=_cmd_run)

    p_meta = sub.add_parser("meta", help="describe tests without running")
    p_meta.add_argument("paths", nargs="+")
    p_meta.set_defaults(func=_cmd_meta)

    p_table = sub.add_parser("table", help="render a JSON report as a table")
    p_table.add_argument("report")
    p_table.set_defaults(func=_cmd_table)

    ns = parser.parse_args(argv)
    return ns.func(ns)


if __name__ == "__main__":
    sys.exit(main())
