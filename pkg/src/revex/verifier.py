"""Per-warning verdicts: guided symbolic execution, a reentrancy witness check and SMT reachability."""

from __future__ import annotations

import time
from collections.abc import Mapping, Sequence
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

from revex.dependency import build_fdg, compute_target_sets, extract_rw_sets, function_sequence
from revex.reports import ContractBundle, Warning, WarningReport, format_selector
from revex.solver import SmtProcess, check_reachability
from revex.symexec.machine import Budget, Constraint, Machine, MachineState, replay, run_sequence
from revex.symexec.terms import Expr, evaluate, render
from revex.symexec.trace import (
    Branch,
    CallEnd,
    CallStart,
    Halt,
    Reenter,
    ReenterEnd,
    StorageRead,
    StorageWrite,
    dump,
    last_transaction,
)

OUTCOMES = ("confirmed", "refuted", "unknown")


def _guard_locations(events: Sequence, lo: int, hi: int, depth: int) -> list[tuple[int, tuple]]:
    """(index, (contract, slot)) of reads at ``depth`` in events[lo:hi] that feed a branch at that depth."""
    fed: set[int] = set()
    for ev in events[lo:hi]:
        if isinstance(ev, Branch) and ev.depth == depth:
            fed |= ev.reads
    return [
        (i, (ev.contract, ev.slot))
        for i, ev in enumerate(events[lo:hi], start=lo)
        if isinstance(ev, StorageRead) and ev.depth == depth and ev.id in fed
    ]


def _matching(events: Sequence, start: int, kind: type, pred) -> int | None:
    for j in range(start, len(events)):
        if isinstance(events[j], kind) and pred(events[j]):
            return j
    return None


def witness_predicate(trace: Sequence) -> bool:
    """Whether the final transaction of ``trace`` shows an exploitable reentrancy.

    Needed, in order and in the outermost frame: a storage read that feeds a
    branch, an external CALL the adversary receives in a non-static context,
    and a later write to the same location. During that call the adversary
    must have re-entered successfully, and the re-entered run must itself have
    branched on the same location, i.e. passed its guard on the stale value.
    """
    events = last_transaction(list(trace))
    outer_halts = [e for e in events if isinstance(e, Halt) and e.depth == 0]
    if not outer_halts or outer_halts[-1].kind not in ("STOP", "RETURN"):
        return False
    guards = _guard_locations(events, 0, len(events), 0)
    for c, ev in enumerate(events):
        if not (isinstance(ev, CallStart) and ev.depth == 0 and ev.attacker):
            continue
        if ev.static or ev.kind != "CALL":
            continue
        end = _matching(events, c + 1, CallEnd, lambda e: e.depth == 0)
        if end is None:
            continue
        before = {loc for i, loc in guards if i < c}
        late = {
            (e.contract, e.slot)
            for e in events[end + 1:]
            if isinstance(e, StorageWrite) and e.depth == 0
        }
        candidates = before & late
        if not candidates:
            continue
        for r in range(c + 1, end):
            re = events[r]
            if not isinstance(re, Reenter):
                continue
            done = _matching(events, r + 1, ReenterEnd, lambda e, idx=re.index: e.index == idx)
            if done is None or done > end or not events[done].success:
                continue
            inner = {loc for _, loc in _guard_locations(events, r + 1, done, re.depth)}
            if candidates & inner:
                return True
    return False


@dataclass
class Witness:
    trace: list
    model: dict[str, int]
    terms: dict[Expr, int]
    applied: list[tuple[int, int]]
    constraints: list[Constraint]
    assumptions: list
    attacker_addresses: list[int]

    def to_json(self) -> dict:
        return {
            "model": {k: hex(v) for k, v in sorted(self.model.items())},
            "sequence": [format_selector(sel) for _, sel in self.applied],
            "trace": dump(self.trace).splitlines(),
        }


@dataclass
class Verdict:
    contract_id: str
    selector: int
    outcome: str
    witness: Witness | None = None
    elapsed: float = 0.0
    reason: str = ""
    steps: int = 0
    paths: int = 0

    def to_json(self) -> dict:
        out = {
            "contract_id": self.contract_id,
            "selector": format_selector(self.selector),
            "outcome": self.outcome,
            "elapsed_s": round(self.elapsed, 3),
            "steps": self.steps,
            "paths": self.paths,
        }
        if self.reason:
            out["reason"] = self.reason
        if self.witness is not None:
            out["witness"] = self.witness.to_json()
        return out

    @classmethod
    def from_json(cls, doc: Mapping) -> Verdict:
        """Rebuild the scoring-relevant part of a verdict record (the witness is not restored)."""
        outcome = doc["outcome"]
        if outcome not in OUTCOMES:
            raise ValueError(f"unknown outcome {outcome!r}")
        return cls(
            doc["contract_id"], int(doc["selector"], 16), outcome,
            elapsed=float(doc.get("elapsed_s", 0.0)), reason=doc.get("reason", ""),
            steps=int(doc.get("steps", 0)), paths=int(doc.get("paths", 0)),
        )


@dataclass(frozen=True)
class VerifyConfig:
    timeout: float = 120.0
    prune: bool = True
    solver: str | None = None
    max_steps: int = 2_000_000
    max_paths: int = 20_000
    jobs: int = 1
    solver_timeout: float = 60.0


def _reachable_dynamic(bundle: ContractBundle, selector: int) -> bool:
    cfg = bundle.cfg
    return any(cfg.blocks[b].dynamic_jump for b in cfg.reachable(cfg.function_entries[selector]))


def function_order(bundle: ContractBundle, selector: int) -> list[int]:
    summaries = extract_rw_sets(bundle.cfg, bundle)
    targets = compute_target_sets([selector], summaries)
    return function_sequence(build_fdg(targets, summaries))


def verify_warning(
    bundles: Mapping[str, ContractBundle], warning: Warning, config: VerifyConfig = VerifyConfig()
) -> Verdict:
    started = time.monotonic()
    deadline = started + config.timeout
    cid, sel = warning.contract_id, warning.selector

    def verdict(outcome: str, reason: str = "", **kw) -> Verdict:
        return Verdict(cid, sel, outcome, elapsed=time.monotonic() - started, reason=reason, **kw)

    try:
        bundle = bundles[cid]
        if sel not in bundle.cfg.function_entries:
            return verdict("unknown", f"{format_selector(sel)} is not dispatched by {cid}")
        if _reachable_dynamic(bundle, sel):
            return verdict("unknown", "function contains a jump with an unresolved target")
        sequence = function_order(bundle, sel)
        budget = Budget(config.max_steps, config.max_paths, config.timeout)
        machine = Machine(bundles, reentry_target=(cid, sel), prune=config.prune, budget=budget)
        found: list[tuple[MachineState, object]] = []
        flags = {"solver": "", "path": ""}

        with SmtProcess(config.solver) as proc:

            def on_path(st: MachineState) -> bool:
                if st.status == "unknown":
                    flags["path"] = flags["path"] or st.reason
                    return False
                if not st.succeeded or not witness_predicate(st.trace):
                    return False
                remaining = deadline - time.monotonic()
                if remaining <= 0:
                    flags["solver"] = "time budget exhausted before solving"
                    return True
                res = check_reachability(
                    st.path_conditions(), timeout=min(remaining, config.solver_timeout), solver=proc
                )
                if res.status == "sat":
                    found.append((st, res))
                    return True
                if res.status == "unknown":
                    flags["solver"] = res.reason or "solver returned unknown"
                return False

            paths = run_sequence(bundles, sequence, (cid, sel), budget, prune=config.prune, on_path=on_path, machine=machine)

        stats = {"steps": paths.steps, "paths": len(paths.paths)}
        if found:
            st, res = found[0]
            attackers = sorted(
                {
                    evaluate(ev.target, res.model, res.terms) & ((1 << 160) - 1)
                    for ev in st.trace
                    if isinstance(ev, CallStart) and ev.attacker
                }
            )
            witness = Witness(
                list(st.trace), dict(res.model), dict(res.terms), list(st.applied),
                list(st.constraints), list(st.assumptions), attackers,
            )
            return verdict("confirmed", witness=witness, **stats)
        reasons = list(paths.reasons) + [r for r in (flags["path"], flags["solver"]) if r]
        if paths.incomplete or reasons:
            return verdict("unknown", "; ".join(dict.fromkeys(reasons)) or "incomplete exploration", **stats)
        return verdict("refuted", **stats)
    except Exception as e:  # a failing warning must not take the batch down
        return verdict("unknown", f"{type(e).__name__}: {e}")


def _verify_one(args) -> Verdict:
    bundles, warning, config = args
    return verify_warning(bundles, warning, config)


def verify(
    bundles: Mapping[str, ContractBundle],
    report: WarningReport | Sequence[Warning],
    config: VerifyConfig = VerifyConfig(),
) -> list[Verdict]:
    warnings = list(report.warnings if isinstance(report, WarningReport) else report)
    if config.jobs > 1 and len(warnings) > 1:
        with ProcessPoolExecutor(max_workers=config.jobs) as pool:
            return list(pool.map(_verify_one, [(bundles, w, config) for w in warnings]))
    return [verify_warning(bundles, w, config) for w in warnings]


@dataclass
class ReplayResult:
    state: MachineState
    ok: bool
    constraints_hold: bool = field(default=False)


def replay_witness(bundles: Mapping[str, ContractBundle], verdict: Verdict) -> ReplayResult:
    """Run the witness's transactions concretely under its model and re-check the predicate."""
    w = verdict.witness
    if w is None:
        raise ValueError("verdict has no witness")
    holds = all(evaluate(c.cond, w.model, w.terms) != 0 for c in w.constraints)
    holds = holds and all(evaluate(a, w.model, w.terms) != 0 for a in w.assumptions)
    state = replay(bundles, w.applied, (verdict.contract_id, verdict.selector), w.model, w.attacker_addresses)
    return ReplayResult(state, state.succeeded and witness_predicate(state.trace), holds)


def describe(verdict: Verdict) -> str:
    line = f"{verdict.contract_id} {format_selector(verdict.selector)} {verdict.outcome}"
    if verdict.reason:
        line += f" ({verdict.reason})"
    if verdict.witness is not None:
        vals = ", ".join(f"{k}={render(v)}" for k, v in sorted(verdict.witness.model.items()))
        line += f" [{vals}]"
    return line
