"""Cross-contract symbolic machine over the bytecode subset.

One :class:`MachineState` is a single path: a stack of call frames, the global
store, the path constraints collected so far and the event trace. States fork
only at symbolic JUMPI, and a fork copies everything mutable.
"""

from __future__ import annotations

import time
from collections.abc import Callable, Iterator, Mapping, Sequence
from dataclasses import dataclass, field

from revex.evm.opcodes import push_width
from revex.hashing import keccak256
from revex.pruner import SmcCfg, build_smc_cfg, next_successors
from revex.reports import ContractBundle
from revex.symexec import terms as T
from revex.symexec.storage import GlobalStore, GotKey
from revex.symexec.terms import MASK, Expr, SymWord
from revex.symexec.trace import (
    Branch,
    CallEnd,
    CallStart,
    Halt,
    Reenter,
    ReenterEnd,
    StorageRead,
    StorageWrite,
    TxStart,
)

MAX_FRAMES = 4
MAX_STACK = 1024
MAX_REENTRIES = 1
ADDRESS_BOUND = 1 << 160
TX_CALLDATA_WORDS = 16
SELECTOR_SHIFT = 1 << 224
ATTACKER = "attacker"

_BINARY = {
    "ADD": T.add, "SUB": T.sub, "MUL": T.mul, "DIV": T.div,
    "LT": T.lt, "GT": T.gt, "EQ": T.eq, "AND": T.and_, "OR": T.or_,
}
_UNARY = {"ISZERO": T.iszero, "NOT": T.not_}
_HALT_STATUS = {"STOP": "stopped", "RETURN": "returned", "REVERT": "reverted", "INVALID": "invalid"}


class SymbolicAccess(Exception):
    """An operand that must be concrete (memory offset, jump target, ...) is symbolic."""


class StackFault(Exception):
    pass


@dataclass(frozen=True)
class Constraint:
    cond: SymWord
    contract: str
    pc: int


@dataclass(frozen=True)
class Budget:
    max_steps: int = 2_000_000
    max_paths: int = 20_000
    timeout: float | None = None


class Inputs:
    """Source of fresh input words: symbols, or values from a model when replaying."""

    def __init__(self, model: Mapping[str, int] | None = None):
        self.model = model

    @property
    def concrete(self) -> bool:
        return self.model is not None

    def word(self, name: str) -> SymWord:
        if self.model is None:
            return T.sym(name)
        return self.model.get(name, 0) & MASK


class Memory:
    """Word writes at concrete byte offsets, newest last.

    A load that lines up with the newest overlapping write returns that word
    as is; anything else is assembled byte by byte and needs concrete bytes.
    """

    __slots__ = ("writes",)

    def __init__(self, writes: list | None = None):
        self.writes: list[tuple[int, SymWord, frozenset]] = writes or []

    def copy(self) -> Memory:
        return Memory(list(self.writes))

    def store(self, off: int, word: SymWord, taint: frozenset = frozenset()) -> None:
        self.writes.append((off, word, taint))

    def load(self, off: int) -> tuple[SymWord, frozenset]:
        for o, w, t in reversed(self.writes):
            if o == off:
                return w, t
            if o < off + 32 and off < o + 32:
                break
        else:
            return 0, frozenset()
        return int.from_bytes(self.read_bytes(off, 32), "big"), frozenset()

    def read_bytes(self, off: int, n: int) -> bytes:
        out = bytearray(n)
        for k in range(n):
            addr = off + k
            for o, w, _ in reversed(self.writes):
                if o <= addr < o + 32:
                    if isinstance(w, Expr):
                        raise SymbolicAccess(f"symbolic byte at memory offset {addr:#x}")
                    out[k] = w.to_bytes(32, "big")[addr - o]
                    break
        return bytes(out)


@dataclass(frozen=True)
class Calldata:
    selector: int | None
    args: tuple[SymWord, ...] | None = None  # None: fresh inputs named after ``prefix``
    prefix: str = ""
    size: int = 4 + 32 * TX_CALLDATA_WORDS


@dataclass
class Frame:
    kind: str  # tx | reentry | CALL | CALLCODE | DELEGATECALL | STATICCALL
    exec_contract: str
    storage_context: str
    sender: SymWord
    value: SymWord
    calldata: Calldata
    static: bool = False
    pc: int = 0
    stack: list = field(default_factory=list)
    taint: list = field(default_factory=list)
    memory: Memory = field(default_factory=Memory)
    ret_off: int = 0
    ret_len: int = 0
    snapshot: GlobalStore | None = None
    reentry_index: int = -1

    def copy(self) -> Frame:
        f = Frame(
            self.kind, self.exec_contract, self.storage_context, self.sender, self.value,
            self.calldata, self.static, self.pc, list(self.stack), list(self.taint),
            self.memory.copy(), self.ret_off, self.ret_len, self.snapshot, self.reentry_index,
        )
        return f

    @property
    def msg(self) -> dict:
        return {"sender": self.sender, "value": self.value, "calldata": self.calldata}


@dataclass
class MachineState:
    frames: list[Frame]
    store: GlobalStore
    constraints: list[Constraint] = field(default_factory=list)
    assumptions: list[SymWord] = field(default_factory=list)
    trace: list = field(default_factory=list)
    applied: list[tuple[int, int]] = field(default_factory=list)
    status: str = "idle"
    reason: str = ""
    reentries: int = 0
    counters: dict = field(default_factory=lambda: {"read": 0, "ret": 0, "reentry": 0})
    constrained_targets: set = field(default_factory=set)
    steps: int = 0

    def fork(self) -> MachineState:
        return MachineState(
            [f.copy() for f in self.frames], self.store, list(self.constraints),
            list(self.assumptions), list(self.trace), list(self.applied), self.status,
            self.reason, self.reentries, dict(self.counters), set(self.constrained_targets),
            self.steps,
        )

    def fresh(self, counter: str) -> int:
        n = self.counters[counter]
        self.counters[counter] = n + 1
        return n

    @property
    def frame(self) -> Frame:
        return self.frames[-1]

    @property
    def depth(self) -> int:
        return len(self.frames) - 1

    @property
    def exec_contract(self) -> str:
        return self.frame.exec_contract

    @property
    def storage_context(self) -> str:
        return self.frame.storage_context

    @property
    def pc(self) -> int:
        return self.frame.pc

    @property
    def stack(self) -> list:
        return self.frame.stack

    @property
    def succeeded(self) -> bool:
        return self.status in ("stopped", "returned")

    def path_conditions(self) -> list[SymWord]:
        return [c.cond for c in self.constraints] + list(self.assumptions)


class Machine:
    """Executes transactions against bundles.

    ``reentry_target`` names the (contract, selector) an adversarial callee
    re-enters. ``model`` switches to concrete replay: every fresh input takes
    its value from the model and ``attacker_addresses`` lists the concrete
    addresses that stand for the adversary.
    """

    def __init__(
        self,
        bundles: Mapping[str, ContractBundle],
        *,
        reentry_target: tuple[str, int] | None = None,
        prune: bool = True,
        budget: Budget | None = None,
        model: Mapping[str, int] | None = None,
        attacker_addresses: Sequence[int] = (),
        smc: Mapping[str, SmcCfg] | None = None,
    ):
        self.bundles = bundles
        self.by_address = {b.address: cid for cid, b in bundles.items()}
        self.reentry_target = reentry_target
        self.prune = prune
        self.budget = budget or Budget()
        self.inputs = Inputs(model)
        self.attacker_addresses = frozenset(a & (ADDRESS_BOUND - 1) for a in attacker_addresses)
        self._smc = dict(smc or {})
        self.steps = 0
        self.paths = 0
        self.incomplete = False
        self.reasons: list[str] = []
        self._deadline = None if self.budget.timeout is None else time.monotonic() + self.budget.timeout

    def smc(self, contract_id: str) -> SmcCfg:
        if contract_id not in self._smc:
            self._smc[contract_id] = build_smc_cfg(self.bundles[contract_id].cfg)
        return self._smc[contract_id]

    def known_addresses(self) -> list[int]:
        addrs = {b.address for b in self.bundles.values()}
        addrs |= {b.deployer for b in self.bundles.values() if b.deployer is not None}
        return sorted(addrs)

    # -- worlds and transactions ------------------------------------------------

    def initial_world(self) -> MachineState:
        parts = {cid: dict(b.initial_storage) for cid, b in self.bundles.items()}
        world = MachineState([], GlobalStore(self.bundles, parts))
        self._constrain_address(world, self.inputs.word(ATTACKER))
        return world

    def start_tx(self, world: MachineState, index: int, contract_id: str, selector: int) -> MachineState:
        st = world.fork()
        prefix = f"tx{index}"
        st.frames.append(
            Frame(
                "tx", contract_id, contract_id, self.inputs.word(ATTACKER),
                self.inputs.word(f"{prefix}.value"), Calldata(selector, None, prefix), snapshot=st.store,
            )
        )
        st.trace.append(TxStart(index, selector, contract_id))
        st.applied.append((index, selector))
        st.status = "running"
        return st

    def _constrain_address(self, st: MachineState, addr: SymWord) -> None:
        if not isinstance(addr, Expr) or addr in st.constrained_targets:
            return
        st.constrained_targets.add(addr)
        st.assumptions.append(T.lt(addr, ADDRESS_BOUND))
        st.assumptions.append(T.truthy(addr))
        for known in self.known_addresses():
            st.assumptions.append(T.iszero(T.eq(addr, known)))

    # -- exploration ------------------------------------------------------------

    def out_of_budget(self) -> str | None:
        if self.steps >= self.budget.max_steps:
            return "step budget exhausted"
        if self.paths >= self.budget.max_paths:
            return "path budget exhausted"
        if self._deadline is not None and self.steps % 128 == 0 and time.monotonic() > self._deadline:
            return "time budget exhausted"
        return None

    def _flag(self, reason: str) -> None:
        self.incomplete = True
        if reason not in self.reasons:
            self.reasons.append(reason)

    def explore(self, state: MachineState) -> Iterator[MachineState]:
        """Yield every terminal state reachable from ``state``, depth first."""
        work = [state]
        while work:
            st: MachineState | None = work.pop()
            while st is not None and st.status == "running":
                reason = self.out_of_budget()
                if reason:
                    st.status, st.reason = "unknown", reason
                    self._flag(reason)
                    break
                succ = self.step(st)
                if not succ:
                    st = None
                    break
                work.extend(reversed(succ[1:]))
                st = succ[0]
            if st is None:
                continue
            self.paths += 1
            if st.status == "unknown":
                self._flag(st.reason)
            yield st
            if self.incomplete and st.reason.endswith("budget exhausted"):
                return

    def run(self, state: MachineState) -> list[MachineState]:
        return list(self.explore(state))

    # -- single step --------------------------------------------------------------

    def step(self, st: MachineState) -> list[MachineState]:
        """Execute one instruction of the top frame; returns the successor states."""
        f = st.frame
        bundle = self.bundles[f.exec_contract]
        ins = bundle.by_pc.get(f.pc)
        self.steps += 1
        st.steps += 1
        if ins is None:
            self._halt(st, "STOP")
            return [st]
        try:
            return self._execute(st, f, ins)
        except StackFault:
            self._halt(st, "INVALID")
            return [st]
        except SymbolicAccess as e:
            st.status, st.reason = "unknown", str(e)
            return [st]
        except T.ExpressionDepthError as e:
            st.status, st.reason = "unknown", str(e)
            return [st]

    def _pop(self, f: Frame) -> tuple[SymWord, frozenset]:
        if not f.stack:
            raise StackFault("stack underflow")
        return f.stack.pop(), f.taint.pop()

    def _push(self, f: Frame, word: SymWord, taint: frozenset = frozenset()) -> None:
        if len(f.stack) >= MAX_STACK:
            raise StackFault("stack overflow")
        f.stack.append(word)
        f.taint.append(taint)

    @staticmethod
    def _concrete(word: SymWord, what: str) -> int:
        if isinstance(word, Expr):
            raise SymbolicAccess(f"symbolic {what}")
        return word

    def _execute(self, st: MachineState, f: Frame, ins) -> list[MachineState]:
        op = ins.op
        nxt = ins.next_pc
        if push_width(op):
            self._push(f, ins.value)
        elif op in _BINARY:
            a, ta = self._pop(f)
            b, tb = self._pop(f)
            self._push(f, _BINARY[op](a, b), ta | tb)
        elif op in _UNARY:
            a, ta = self._pop(f)
            self._push(f, _UNARY[op](a), ta)
        elif op.startswith("DUP"):
            n = int(op[3:])
            if len(f.stack) < n:
                raise StackFault("stack underflow")
            self._push(f, f.stack[-n], f.taint[-n])
        elif op.startswith("SWAP"):
            n = int(op[4:])
            if len(f.stack) < n + 1:
                raise StackFault("stack underflow")
            f.stack[-1], f.stack[-1 - n] = f.stack[-1 - n], f.stack[-1]
            f.taint[-1], f.taint[-1 - n] = f.taint[-1 - n], f.taint[-1]
        elif op == "POP":
            self._pop(f)
        elif op == "PC":
            self._push(f, ins.pc)
        elif op == "JUMPDEST":
            pass
        elif op == "CALLVALUE":
            self._push(f, f.value)
        elif op == "CALLER":
            self._push(f, f.sender)
        elif op == "CALLDATASIZE":
            self._push(f, f.calldata.size)
        elif op == "CALLDATALOAD":
            off = self._concrete(self._pop(f)[0], "calldata offset")
            self._push(f, self._calldata_word(f.calldata, off))
        elif op == "MLOAD":
            off = self._concrete(self._pop(f)[0], "memory offset")
            word, taint = f.memory.load(off)
            self._push(f, word, taint)
        elif op == "MSTORE":
            off = self._concrete(self._pop(f)[0], "memory offset")
            word, taint = self._pop(f)
            f.memory.store(off, word, taint)
        elif op == "SHA3":
            off = self._concrete(self._pop(f)[0], "hash offset")
            length = self._concrete(self._pop(f)[0], "hash length")
            self._push(f, self._hash_memory(f.memory, off, length))
        elif op == "SLOAD":
            slot, _ = self._pop(f)
            rid = st.fresh("read")
            self._push(f, st.store.read(GotKey(f.storage_context, slot)), frozenset({rid}))
            st.trace.append(StorageRead(rid, f.storage_context, slot, ins.pc, st.depth))
        elif op == "SSTORE":
            slot, _ = self._pop(f)
            word, _ = self._pop(f)
            if f.static:
                st.status, st.reason = "invalid", f"SSTORE in static context at pc {ins.pc:#x}"
                return [st]
            st.store = st.store.write(GotKey(f.storage_context, slot), word)
            st.trace.append(StorageWrite(f.storage_context, slot, word, ins.pc, st.depth))
        elif op == "JUMP":
            dest = self._concrete(self._pop(f)[0], "jump target")
            if not self._is_jumpdest(f.exec_contract, dest):
                raise StackFault(f"bad jump target {dest:#x}")
            f.pc = dest
            return [st]
        elif op == "JUMPI":
            return self._jumpi(st, f, ins)
        elif op in ("CALL", "CALLCODE", "DELEGATECALL", "STATICCALL"):
            return self.execute_call(st, ins)
        elif op in ("STOP", "INVALID"):
            self._halt(st, op)
            return [st]
        elif op in ("RETURN", "REVERT"):
            off = self._concrete(self._pop(f)[0], "return offset")
            length = self._concrete(self._pop(f)[0], "return length")
            word = None
            if op == "RETURN" and length > 0:
                word = f.memory.load(off)[0]
            self._halt(st, op, word)
            return [st]
        else:
            self._halt(st, "INVALID")
            return [st]
        f.pc = nxt
        return [st]

    def _is_jumpdest(self, contract_id: str, pc: int) -> bool:
        ins = self.bundles[contract_id].by_pc.get(pc)
        return ins is not None and ins.op == "JUMPDEST"

    def _calldata_word(self, cd: Calldata, off: int) -> SymWord:
        if off == 0:
            return 0 if cd.selector is None else cd.selector * SELECTOR_SHIFT
        if (off - 4) % 32:
            raise SymbolicAccess(f"unaligned calldata offset {off:#x}")
        i = (off - 4) // 32
        if cd.args is None:
            return self.inputs.word(f"{cd.prefix}.arg{i}") if i < TX_CALLDATA_WORDS else 0
        return cd.args[i] if i < len(cd.args) else 0

    @staticmethod
    def _hash_memory(mem: Memory, off: int, length: int) -> SymWord:
        if length % 32 == 0:
            return T.keccak(mem.load(off + 32 * k)[0] for k in range(length // 32))
        return int.from_bytes(keccak256(mem.read_bytes(off, length)), "big")

    def _jumpi(self, st: MachineState, f: Frame, ins) -> list[MachineState]:
        dest_w, _ = self._pop(f)
        cond, taint = self._pop(f)
        dest = self._concrete(dest_w, "jump target")
        here = f.exec_contract
        if isinstance(cond, int) or dest == ins.next_pc:
            taken = isinstance(cond, int) and cond != 0
            st.trace.append(Branch(here, ins.pc, taint, False, taken, st.depth))
            if taken:
                if not self._is_jumpdest(here, dest):
                    raise StackFault(f"bad jump target {dest:#x}")
                f.pc = dest
            else:
                f.pc = ins.next_pc
            return [st]

        smc = self.smc(here)
        bid = smc.base.block_of_pc[ins.pc]
        block = smc.base.blocks[bid]
        if block.dynamic_jump:
            order = [dest, ins.next_pc]
        else:
            order = next_successors(smc, bid, self.prune)
        out = []
        for i, target in enumerate(order):
            taken = target == dest
            child = st if i == len(order) - 1 else st.fork()
            cf = child.frame
            c = T.truthy(cond) if taken else T.iszero(cond)
            child.constraints.append(Constraint(c, here, ins.pc))
            child.trace.append(Branch(here, ins.pc, taint, True, taken, child.depth))
            if taken and not self._is_jumpdest(here, dest):
                self._halt(child, "INVALID")
            else:
                cf.pc = dest if taken else ins.next_pc
            out.append(child)
        return out

    # -- calls --------------------------------------------------------------------

    def execute_call(self, st: MachineState, ins) -> list[MachineState]:
        f = st.frame
        kind = ins.op
        self._pop(f)  # gas is not modelled
        to, _ = self._pop(f)
        if kind in ("CALL", "CALLCODE"):
            value, _ = self._pop(f)
        elif kind == "DELEGATECALL":
            value = f.value
        else:
            value = 0
        arg_off = self._concrete(self._pop(f)[0], "call argument offset")
        arg_len = self._concrete(self._pop(f)[0], "call argument length")
        ret_off = self._concrete(self._pop(f)[0], "call return offset")
        ret_len = self._concrete(self._pop(f)[0], "call return length")
        f.pc = ins.next_pc
        static = f.static or kind == "STATICCALL"
        addr = to & (ADDRESS_BOUND - 1) if isinstance(to, int) else to
        attacker = isinstance(addr, Expr) or addr in self.attacker_addresses
        st.trace.append(CallStart(kind, addr, value, attacker, static, f.exec_contract, ins.pc, st.depth))
        if isinstance(addr, Expr):
            self._constrain_address(st, addr)
        if attacker:
            self._call_attacker(st, kind, addr, static, ret_off, ret_len)
            return [st]
        callee = self.by_address.get(addr)
        if callee is None:
            # externally owned account: value transfer succeeds, no code runs
            self._push(f, 1)
            st.trace.append(CallEnd(kind, True, st.depth))
            return [st]
        selector = None
        args: tuple = ()
        if arg_len >= 4:
            selector = int.from_bytes(f.memory.read_bytes(arg_off, 4), "big")
            args = tuple(f.memory.load(arg_off + 4 + 32 * k)[0] for k in range((arg_len - 4) // 32))
        entries = self.bundles[callee].cfg.function_entries
        if len(st.frames) >= MAX_FRAMES or selector not in entries:
            self._push(f, 0)
            st.trace.append(CallEnd(kind, False, st.depth))
            return [st]
        calldata = Calldata(selector, args, size=arg_len)
        here = self.bundles[f.storage_context].address
        if kind in ("CALL", "STATICCALL"):
            frame = Frame(kind, callee, callee, here, value, calldata, static)
        elif kind == "CALLCODE":
            frame = Frame(kind, callee, f.storage_context, here, value, calldata, static)
        else:
            frame = Frame(kind, callee, f.storage_context, f.sender, f.value, calldata, static)
        frame.ret_off, frame.ret_len, frame.snapshot = ret_off, ret_len, st.store
        st.frames.append(frame)
        return [st]

    def _call_attacker(self, st, kind, target, static, ret_off, ret_len) -> None:
        can_reenter = (
            kind == "CALL"
            and not static
            and self.reentry_target is not None
            and st.reentries < MAX_REENTRIES
            and len(st.frames) < MAX_FRAMES
        )
        if not can_reenter:
            self._attacker_return(st, kind, ret_off, ret_len)
            return
        st.reentries += 1
        r = st.fresh("reentry")
        cid, sel = self.reentry_target
        prefix = f"re{r}"
        frame = Frame(
            "reentry", cid, cid, target, self.inputs.word(f"{prefix}.value"),
            Calldata(sel, None, prefix), False, snapshot=st.store, reentry_index=r,
        )
        frame.ret_off, frame.ret_len = ret_off, ret_len
        st.trace.append(Reenter(r, sel, st.depth + 1))
        st.frames.append(frame)

    def _attacker_return(self, st: MachineState, kind: str, ret_off: int, ret_len: int) -> None:
        f = st.frame
        n = st.fresh("ret")
        if ret_len >= 32:
            f.memory.store(ret_off, self.inputs.word(f"ret{n}"))
        self._push(f, 1)
        st.trace.append(CallEnd(kind, True, st.depth))

    def _halt(self, st: MachineState, kind: str, word: SymWord | None = None) -> None:
        f = st.frames.pop()
        success = kind in ("STOP", "RETURN")
        st.trace.append(Halt(kind, f.exec_contract, len(st.frames)))
        if not success and f.snapshot is not None:
            st.store = f.snapshot
        if not st.frames:
            st.status = _HALT_STATUS[kind]
            return
        caller = st.frame
        if f.kind == "reentry":
            st.trace.append(ReenterEnd(f.reentry_index, success, len(st.frames)))
            self._attacker_return(st, "CALL", f.ret_off, f.ret_len)
            return
        if success and word is not None and f.ret_len >= 32:
            caller.memory.store(f.ret_off, word)
        self._push(caller, int(success))
        st.trace.append(CallEnd(f.kind, success, st.depth))


@dataclass
class PathSet:
    paths: list[MachineState]
    incomplete: bool
    steps: int
    worlds: int
    reasons: list[str]


def run_sequence(
    bundles: Mapping[str, ContractBundle],
    sequence: Sequence[int],
    warned: tuple[str, int],
    budget: Budget | None = None,
    *,
    prune: bool = True,
    on_path: Callable[[MachineState], bool] | None = None,
    machine: Machine | None = None,
) -> PathSet:
    """Run the functions of ``sequence`` as transactions, then the warned function.

    Every prefix transaction may or may not have happened, so each one is run
    on every world reached so far and its successful end states join the set of
    worlds. The warned function then runs on each world, newest first. When
    ``on_path`` returns true for a terminal state, exploration stops.
    """
    contract_id, selector = warned
    m = machine or Machine(bundles, reentry_target=warned, prune=prune, budget=budget)
    prefix = [s for s in sequence if s != selector]
    worlds = [m.initial_world()]
    for k, sel in enumerate(prefix):
        grown = []
        for w in worlds:
            for end in m.explore(m.start_tx(w, k, contract_id, sel)):
                if end.succeeded:
                    end.status = "idle"
                    grown.append(end)
            if m.incomplete:
                break
        worlds = grown + worlds
        if m.incomplete:
            break
    paths: list[MachineState] = []
    for w in worlds:
        for end in m.explore(m.start_tx(w, len(prefix), contract_id, selector)):
            paths.append(end)
            if on_path is not None and on_path(end):
                return PathSet(paths, m.incomplete, m.steps, len(worlds), m.reasons)
        if m.incomplete and any(r.endswith("budget exhausted") for r in m.reasons):
            break
    return PathSet(paths, m.incomplete, m.steps, len(worlds), m.reasons)


def replay(
    bundles: Mapping[str, ContractBundle],
    applied: Sequence[tuple[int, int]],
    warned: tuple[str, int],
    model: Mapping[str, int],
    attacker_addresses: Sequence[int] = (),
    budget: Budget | None = None,
) -> MachineState:
    """Re-run a transaction list concretely under ``model``; returns the final state."""
    m = Machine(
        bundles, reentry_target=warned, prune=False, budget=budget, model=model,
        attacker_addresses=attacker_addresses,
    )
    world = m.initial_world()
    contract_id = warned[0]
    for i, (index, sel) in enumerate(applied):
        ends = m.run(m.start_tx(world, index, contract_id, sel))
        if len(ends) != 1:
            raise RuntimeError(f"concrete replay produced {len(ends)} paths")
        world = ends[0]
        if i < len(applied) - 1:
            if not world.succeeded:
                return world
            world.status = "idle"
    return world
