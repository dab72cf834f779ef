"""Command-line entry point: verify, merge, score, combos, export-graphs."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from revex.dependency import build_fdg, compute_target_sets, extract_rw_sets, fdg_to_dot
from revex.harness import (
    DEFAULT_SIZES,
    DEFAULT_TOOLS,
    Metrics,
    enumerate_combos,
    format_table,
    load_truth,
    merge_reports,
    score,
    score_reports,
)
from revex.pruner import build_smc_cfg, to_dot
from revex.reports import LoadError, ReportSchemaError, WarningReport, dedupe, ingest_reports, load_bundle
from revex.solver import SolverError
from revex.verifier import Verdict, VerifyConfig, describe, verify


def _sizes(text: str) -> list[int]:
    try:
        sizes = [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a list of integers: {text!r}") from None
    if not sizes:
        raise argparse.ArgumentTypeError("empty size list")
    return sizes


def _tools(text: str) -> list[str]:
    if text.isdigit():
        n = int(text)
        if n > len(DEFAULT_TOOLS):
            raise argparse.ArgumentTypeError(f"only {len(DEFAULT_TOOLS)} default tool names are known")
        return list(DEFAULT_TOOLS[:n])
    return [t.strip() for t in text.split(",") if t.strip()]


def _positive(text: str) -> float:
    value = float(text)
    if value <= 0:
        raise argparse.ArgumentTypeError("must be positive")
    return value


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="revex", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    def reports_arg(sp, required=True):
        sp.add_argument("--report", nargs="+", action="extend", default=[], required=required, metavar="FILE",
                        help="warning report file(s); each holds one document or a list")

    v = sub.add_parser("verify", help="decide each warning of the given reports")
    v.add_argument("--corpus", required=True, metavar="DIR")
    reports_arg(v)
    v.add_argument("--timeout", type=_positive, default=120.0, metavar="SECONDS", help="budget per warning (default 120)")
    v.add_argument("--jobs", type=int, default=1, metavar="N")
    v.add_argument("--no-prune", action="store_true", help="explore every branch instead of the weighted order")
    v.add_argument("--max-steps", type=int, default=2_000_000)
    v.add_argument("--solver", metavar="CMD", help="SMT-LIB2 solver command line (default: z3 -in -smt2)")
    v.add_argument("--out", metavar="FILE", help="write one JSON verdict record per line")

    m = sub.add_parser("merge", help="OR-merge the reports of a tool combination")
    reports_arg(m)
    m.add_argument("--tools", type=_tools, help="comma-separated combination (default: every tool present)")
    m.add_argument("--out", metavar="FILE")

    s = sub.add_parser("score", help="precision/recall/F1 against ground truth")
    s.add_argument("--truth", required=True, metavar="FILE")
    s.add_argument("--verdicts", nargs="+", action="extend", default=[], metavar="FILE")
    reports_arg(s, required=False)
    s.add_argument("--out", metavar="FILE", help="write metrics as JSON")

    c = sub.add_parser("combos", help="list tool combinations, or score each one against a corpus")
    c.add_argument("--tools", type=_tools, default=list(DEFAULT_TOOLS), help="a count or comma-separated names")
    c.add_argument("--combo-sizes", type=_sizes, default=list(DEFAULT_SIZES), metavar="LIST")
    c.add_argument("--corpus", metavar="DIR")
    reports_arg(c, required=False)
    c.add_argument("--truth", metavar="FILE")
    c.add_argument("--timeout", type=_positive, default=120.0, metavar="SECONDS")
    c.add_argument("--jobs", type=int, default=1, metavar="N")
    c.add_argument("--no-prune", action="store_true")
    c.add_argument("--solver", metavar="CMD")
    c.add_argument("--out", metavar="FILE", help="write per-combination metrics as JSON")

    g = sub.add_parser("export-graphs", help="write weighted CFG and dependency graphs as DOT")
    g.add_argument("--corpus", required=True, metavar="DIR")
    g.add_argument("--out", required=True, metavar="DIR")
    return p


def _load_reports(paths, bundles=None) -> list[WarningReport]:
    out = []
    for path in paths:
        out.extend(ingest_reports(path, bundles))
    return out


def _write(path: str | None, text: str) -> None:
    if path:
        Path(path).write_text(text)


def cmd_verify(args) -> int:
    bundles = load_bundle(args.corpus)
    reports = _load_reports(args.report, bundles)
    warnings = dedupe(sorted(w for r in reports for w in r.warnings))
    config = VerifyConfig(
        timeout=args.timeout, prune=not args.no_prune, solver=args.solver,
        max_steps=args.max_steps, jobs=args.jobs,
    )
    verdicts = verify(bundles, warnings, config)
    for v in verdicts:
        print(describe(v))
    _write(args.out, "".join(json.dumps(v.to_json()) + "\n" for v in verdicts))
    return 0


def cmd_merge(args) -> int:
    reports = _load_reports(args.report)
    combo = args.tools or sorted({r.tool_name for r in reports})
    merged = merge_reports(reports, combo)
    text = json.dumps(merged.to_json(), indent=1) + "\n"
    if args.out:
        _write(args.out, text)
    else:
        sys.stdout.write(text)
    return 0


def _read_verdicts(paths) -> list[Verdict]:
    out = []
    for path in paths:
        for line in Path(path).read_text().splitlines():
            if line.strip():
                out.append(Verdict.from_json(json.loads(line)))
    return out


def cmd_score(args) -> int:
    truth = load_truth(args.truth)
    rows: list[tuple[str, Metrics]] = []
    if args.report:
        reports = _load_reports(args.report)
        for tool in sorted({r.tool_name for r in reports}):
            rows.append((tool, score_reports([r for r in reports if r.tool_name == tool], truth)))
    if args.verdicts or not args.report:
        rows.append(("verified", score(_read_verdicts(args.verdicts), truth)))
    sys.stdout.write(format_table(rows))
    _write(args.out, json.dumps({name: m.to_json() for name, m in rows}, indent=1) + "\n")
    return 0


def cmd_combos(args) -> int:
    combos = enumerate_combos(args.tools, args.combo_sizes)
    if not (args.corpus and args.report and args.truth):
        for combo in combos:
            print("+".join(combo))
        return 0
    bundles = load_bundle(args.corpus)
    reports = _load_reports(args.report, bundles)
    truth = load_truth(args.truth)
    config = VerifyConfig(timeout=args.timeout, prune=not args.no_prune, solver=args.solver, jobs=args.jobs)
    every = dedupe(sorted(w for r in reports for w in r.warnings))
    decided = {(v.contract_id, v.selector): v for v in verify(bundles, every, config)}
    rows, record = [], {}
    for combo in combos:
        merged = merge_reports(reports, combo)
        name = "+".join(combo)
        origin = score_reports([merged], truth)
        plus = score([decided[w.key] for w in merged.warnings], truth)
        rows += [(f"{name} origin", origin), (f"{name} verified", plus)]
        record[name] = {"origin": origin.to_json(), "verified": plus.to_json()}
    sys.stdout.write(format_table(rows))
    _write(args.out, json.dumps(record, indent=1) + "\n")
    return 0


def cmd_export_graphs(args) -> int:
    bundles = load_bundle(args.corpus)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for cid, bundle in sorted(bundles.items()):
        smc = build_smc_cfg(bundle.cfg)
        (out / f"{cid}.cfg.dot").write_text(to_dot(smc, cid))
        summaries = extract_rw_sets(bundle.cfg, bundle)
        names = {s: bundle.function_name(s) for s in summaries}
        for sel in sorted(summaries):
            fdg = build_fdg(compute_target_sets([sel], summaries), summaries)
            (out / f"{cid}.{sel:08x}.fdg.dot").write_text(fdg_to_dot(fdg, names))
        print(f"{cid}: {len(bundle.cfg.blocks)} blocks, {len(smc.pruned_edges)} pruned edges")
    return 0


COMMANDS = {
    "verify": cmd_verify,
    "merge": cmd_merge,
    "score": cmd_score,
    "combos": cmd_combos,
    "export-graphs": cmd_export_graphs,
}


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except (LoadError, ReportSchemaError, SolverError, KeyError, ValueError, OSError) as e:
        print(f"revex: error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
