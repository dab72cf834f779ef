"""Basic-block and control-flow-graph recovery."""

from __future__ import annotations

from dataclasses import dataclass, field

from revex.evm.asm import Instruction
from revex.evm.opcodes import CALL_FAMILY, push_width

TERMINATORS = {
    "JUMP": "jump",
    "JUMPI": "jumpi",
    "STOP": "halt",
    "RETURN": "halt",
    "REVERT": "revert",
    "INVALID": "invalid",
}


class MalformedControlFlow(ValueError):
    def __init__(self, pc: int, target: int):
        self.pc = pc
        self.target = target
        super().__init__(f"jump at pc {pc:#x} targets {target:#x}, which is not a JUMPDEST")


@dataclass(frozen=True)
class BasicBlock:
    id: int
    first_pc: int
    instructions: tuple[Instruction, ...]
    successors: tuple[int, ...]
    terminator_kind: str
    dynamic_jump: bool = False

    @property
    def last(self) -> Instruction:
        return self.instructions[-1]

    @property
    def end_pc(self) -> int:
        return self.last.next_pc

    def ops(self) -> list[str]:
        return [i.op for i in self.instructions]


@dataclass(frozen=True)
class Cfg:
    blocks: dict[int, BasicBlock]
    entry: int
    function_entries: dict[int, int]
    block_of_pc: dict[int, int] = field(repr=False)

    @property
    def dynamic_blocks(self) -> list[int]:
        return [b.id for b in self.blocks.values() if b.dynamic_jump]

    def edges(self) -> list[tuple[int, int]]:
        return [(b.id, s) for b in self.blocks.values() for s in b.successors]

    def reachable(self, start: int) -> set[int]:
        seen = {start}
        work = [start]
        while work:
            for s in self.blocks[work.pop()].successors:
                if s not in seen:
                    seen.add(s)
                    work.append(s)
        return seen

    def predecessors(self) -> dict[int, list[int]]:
        preds: dict[int, list[int]] = {b: [] for b in self.blocks}
        for b, s in self.edges():
            preds[s].append(b)
        return preds


def _split(instrs: list[Instruction]) -> list[list[Instruction]]:
    runs: list[list[Instruction]] = []
    cur: list[Instruction] = []
    for ins in instrs:
        if ins.op == "JUMPDEST" and cur:
            runs.append(cur)
            cur = []
        cur.append(ins)
        if ins.op in TERMINATORS:
            runs.append(cur)
            cur = []
    if cur:
        runs.append(cur)
    return runs


def _local_jump_target(run: list[Instruction]) -> int | None:
    """Constant jump destination computed inside the block, if any.

    Simulates the block with an abstract stack holding known constants; values
    coming from outside the block are unknown.
    """
    stack: list[int | None] = []

    def pop() -> int | None:
        return stack.pop() if stack else None

    for ins in run[:-1]:
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
        else:
            pops, pushes = _STACK_EFFECT.get(op, (0, 0))
            for _ in range(pops):
                pop()
            stack.extend([None] * pushes)
    return stack[-1] if stack else None


_STACK_EFFECT = {
    "STOP": (0, 0), "ADD": (2, 1), "MUL": (2, 1), "SUB": (2, 1), "DIV": (2, 1),
    "LT": (2, 1), "GT": (2, 1), "EQ": (2, 1), "ISZERO": (1, 1), "AND": (2, 1),
    "OR": (2, 1), "NOT": (1, 1), "SHA3": (2, 1), "CALLER": (0, 1), "CALLVALUE": (0, 1),
    "CALLDATALOAD": (1, 1), "CALLDATASIZE": (0, 1), "POP": (1, 0), "MLOAD": (1, 1),
    "MSTORE": (2, 0), "SLOAD": (1, 1), "SSTORE": (2, 0), "JUMPDEST": (0, 0),
    "CALL": (7, 1), "CALLCODE": (7, 1), "DELEGATECALL": (6, 1), "STATICCALL": (6, 1),
    "RETURN": (2, 0), "REVERT": (2, 0), "INVALID": (0, 0), "JUMP": (1, 0), "JUMPI": (2, 0),
}


def _dispatch_target(run: list[Instruction]) -> list[tuple[int, int]]:
    """(selector, jump target) pairs for ``PUSH4 sel [DUPn] EQ PUSHn dest JUMPI``."""
    found = []
    ops = [i.op for i in run]
    for k, ins in enumerate(run):
        if ins.op != "PUSH4":
            continue
        j = k + 1
        if j < len(run) and ops[j].startswith("DUP"):
            j += 1
        if (
            j + 2 < len(run)
            and ops[j] == "EQ"
            and push_width(ops[j + 1])
            and ops[j + 2] == "JUMPI"
        ):
            found.append((ins.value, run[j + 1].value))
    return found


def build_cfg(instrs: list[Instruction]) -> Cfg:
    runs = _split(instrs)
    jumpdests = {i.pc for i in instrs if i.op == "JUMPDEST"}
    starts = [r[0].pc for r in runs]
    blocks: dict[int, BasicBlock] = {}
    block_of_pc: dict[int, int] = {}
    function_entries: dict[int, int] = {}

    for idx, run in enumerate(runs):
        first = run[0].pc
        last = run[-1]
        nxt = starts[idx + 1] if idx + 1 < len(starts) else None
        dynamic = False
        succ: tuple[int, ...]
        if last.op in ("JUMP", "JUMPI"):
            kind = TERMINATORS[last.op]
            target = _local_jump_target(run)
            if target is None:
                dynamic = True
                succ = ()
            else:
                if target not in jumpdests:
                    raise MalformedControlFlow(last.pc, target)
                if last.op == "JUMP":
                    succ = (target,)
                elif nxt is None:
                    # falling off the end of code halts
                    succ = (target,)
                else:
                    succ = (target, nxt)
        elif last.op in TERMINATORS:
            kind = TERMINATORS[last.op]
            succ = ()
        else:
            kind = "call-return" if last.op in CALL_FAMILY else "fallthrough"
            succ = (nxt,) if nxt is not None else ()
            if nxt is None:
                kind = "halt"
        blocks[first] = BasicBlock(first, first, tuple(run), succ, kind, dynamic)
        for ins in run:
            block_of_pc[ins.pc] = first
        if last.op == "JUMPI":
            for sel, dest in _dispatch_target(run):
                if dest in jumpdests:
                    function_entries.setdefault(sel, dest)

    return Cfg(blocks, 0, function_entries, block_of_pc)
