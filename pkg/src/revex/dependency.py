"""Storage read/write summaries, target-set closure and the function dependency graph."""

from __future__ import annotations

from collections.abc import Iterable, Mapping
from dataclasses import dataclass
from itertools import combinations

from revex.evm import Cfg
from revex.evm.opcodes import CALL_FAMILY, push_width
from revex.reports import ContractBundle, WarningReport, format_selector
from revex.slots import SlotRef


class MissingSummary(KeyError):
    pass


@dataclass(frozen=True)
class FunctionSummary:
    selector: int
    reads: frozenset[SlotRef] = frozenset()
    writes: frozenset[SlotRef] = frozenset()
    makes_external_call: bool = False
    incomplete: bool = False

    @property
    def touches(self) -> frozenset[SlotRef]:
        return self.reads | self.writes


@dataclass(frozen=True)
class _MapKey:
    base: int


_EFFECT = {
    "ADD": 2, "MUL": 2, "SUB": 2, "DIV": 2, "LT": 2, "GT": 2, "EQ": 2, "AND": 2, "OR": 2,
    "ISZERO": 1, "NOT": 1, "CALLDATALOAD": 1, "MLOAD": 1,
}


def _block_accesses(block, reads: set, writes: set, stack: list, memory: dict) -> tuple[bool, bool]:
    """Scan one block over an abstract stack of known constants, updating ``stack`` and ``memory`` in place.

    Returns (external call seen, unresolved slot seen).
    """
    call = unresolved = False

    def pop():
        return stack.pop() if stack else None

    def record(slot, into: set) -> None:
        nonlocal unresolved
        if isinstance(slot, int):
            into.add(SlotRef.slot(slot))
        elif isinstance(slot, _MapKey):
            into.add(SlotRef.mapping(slot.base))
        else:
            unresolved = True

    for ins in block.instructions:
        op = ins.op
        if push_width(op):
            stack.append(ins.value)
        elif op.startswith("DUP"):
            n = int(op[3:])
            stack.append(stack[-n] if len(stack) >= n else None)
        elif op.startswith("SWAP"):
            n = int(op[4:])
            while len(stack) < n + 1:
                stack.insert(0, None)
            stack[-1], stack[-1 - n] = stack[-1 - n], stack[-1]
        elif op == "PC":
            stack.append(ins.pc)
        elif op == "MSTORE":
            off, val = pop(), pop()
            if isinstance(off, int):
                for o in [o for o in memory if abs(o - off) < 32]:
                    del memory[o]
                memory[off] = val
            else:
                memory.clear()
        elif op == "SHA3":
            off, length = pop(), pop()
            base = memory.get(off + 0x20) if isinstance(off, int) else None
            stack.append(_MapKey(base) if length == 0x40 and isinstance(base, int) else None)
        elif op == "SLOAD":
            record(pop(), reads)
            stack.append(None)
        elif op == "SSTORE":
            record(pop(), writes)
            pop()
        elif op in CALL_FAMILY:
            call = True
            for _ in range(7 if op in ("CALL", "CALLCODE") else 6):
                pop()
            stack.append(None)
        elif op in _EFFECT:
            for _ in range(_EFFECT[op]):
                pop()
            stack.append(None)
        elif op in ("CALLER", "CALLVALUE", "CALLDATASIZE"):
            stack.append(None)
        elif op in ("POP", "JUMP"):
            pop()
        elif op in ("JUMPI", "RETURN", "REVERT"):
            pop()
            pop()
    return call, unresolved


def extract_rw_sets(cfg: Cfg, bundle: ContractBundle) -> dict[int, FunctionSummary]:
    declared = {f.selector: f for f in bundle.declared_functions or ()}
    out = {}
    for sel, entry in sorted(cfg.function_entries.items()):
        reads: set[SlotRef] = set()
        writes: set[SlotRef] = set()
        call = incomplete = False
        # depth-first; a block is scanned once, with the abstract state of its first visit
        seen = {entry}
        work = [(entry, [], {})]
        while work:
            bid, stack, memory = work.pop()
            block = cfg.blocks[bid]
            c, u = _block_accesses(block, reads, writes, stack, memory)
            call |= c
            incomplete |= u or block.dynamic_jump
            for succ in reversed(block.successors):
                if succ not in seen:
                    seen.add(succ)
                    work.append((succ, list(stack), dict(memory)))
        if sel in declared:
            reads.update(declared[sel].state_vars)
        out[sel] = FunctionSummary(sel, frozenset(reads), frozenset(writes), call, incomplete)
    return out


@dataclass(frozen=True)
class TargetSets:
    v_target: frozenset[SlotRef]
    v_target_related: frozenset[SlotRef]
    f_target: frozenset[int]
    rounds: int = 0


def _warned(report: WarningReport | Iterable[int], contract_id: str | None) -> list[int]:
    if isinstance(report, WarningReport):
        cid = contract_id or report.contract_id
        return report.selectors(cid)
    return list(report)


def compute_target_sets(
    report: WarningReport | Iterable[int],
    summaries: Mapping[int, FunctionSummary],
    contract_id: str | None = None,
) -> TargetSets:
    """Grow the warned functions' slot set and function set to a joint fixpoint."""
    warned = _warned(report, contract_id)
    for sel in warned:
        if sel not in summaries:
            raise MissingSummary(f"no summary for warned function {format_selector(sel)}")
    v_target = frozenset().union(*(summaries[s].touches for s in warned))
    related = set(v_target)
    f_target = set(warned)
    rounds = 0
    while True:
        rounds += 1
        joined = {s for s, summ in summaries.items() if s not in f_target and summ.touches & related}
        grown = set().union(*(summaries[s].touches for s in joined)) - related
        f_target |= joined
        related |= grown
        if not joined and not grown:
            break
    return TargetSets(v_target, frozenset(related), frozenset(f_target), rounds)


@dataclass(frozen=True)
class Fdg:
    nodes: frozenset[int]
    edges: dict[tuple[int, int], int]
    node_weight: dict[int, int]


def build_fdg(targets: TargetSets, summaries: Mapping[int, FunctionSummary]) -> Fdg:
    nodes = sorted(targets.f_target)
    edges: dict[tuple[int, int], int] = {}
    weight = {f: 0 for f in nodes}
    for fi, fj in combinations(nodes, 2):
        shared = summaries[fi].touches & summaries[fj].touches & targets.v_target_related
        if shared:
            edges[(fi, fj)] = len(shared)
            weight[fi] += len(shared)
            weight[fj] += len(shared)
    return Fdg(frozenset(nodes), edges, weight)


def function_sequence(fdg: Fdg) -> list[int]:
    return sorted(fdg.nodes, key=lambda f: (fdg.node_weight[f], f))


def fdg_to_dot(fdg: Fdg, names: Mapping[int, str] | None = None) -> str:
    names = names or {}
    lines = ["graph fdg {"]
    for f in function_sequence(fdg):
        label = f"{names.get(f, format_selector(f))}\\nweight {fdg.node_weight[f]}"
        lines.append(f'  f{f:08x} [label="{label}"];')
    for (a, b), w in sorted(fdg.edges.items()):
        lines.append(f'  f{a:08x} -- f{b:08x} [label="{w}"];')
    lines.append("}")
    return "\n".join(lines) + "\n"
