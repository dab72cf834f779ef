"""Execution trace events recorded by the machine."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Union

from revex.symexec.terms import SymWord, render


@dataclass(frozen=True)
class TxStart:
    index: int
    selector: int
    contract: str


@dataclass(frozen=True)
class StorageRead:
    id: int
    contract: str
    slot: SymWord
    pc: int
    depth: int


@dataclass(frozen=True)
class StorageWrite:
    contract: str
    slot: SymWord
    value: SymWord
    pc: int
    depth: int


@dataclass(frozen=True)
class Branch:
    contract: str
    pc: int
    reads: frozenset[int]
    symbolic: bool
    taken: bool
    depth: int


@dataclass(frozen=True)
class CallStart:
    kind: str
    target: SymWord
    value: SymWord
    attacker: bool
    static: bool
    contract: str
    pc: int
    depth: int


@dataclass(frozen=True)
class CallEnd:
    kind: str
    success: bool
    depth: int


@dataclass(frozen=True)
class Reenter:
    index: int
    selector: int
    depth: int


@dataclass(frozen=True)
class ReenterEnd:
    index: int
    success: bool
    depth: int


@dataclass(frozen=True)
class Halt:
    kind: str  # STOP | RETURN | REVERT | INVALID
    contract: str
    depth: int


Event = Union[TxStart, StorageRead, StorageWrite, Branch, CallStart, CallEnd, Reenter, ReenterEnd, Halt]


def last_transaction(trace: list) -> list:
    """Events of the final transaction in ``trace``."""
    for i in range(len(trace) - 1, -1, -1):
        if isinstance(trace[i], TxStart):
            return trace[i:]
    return list(trace)


def dump(trace: list) -> str:
    """One line per event: ``SLOAD c@slot``, ``SSTORE c@slot``, ``CALL kind target value``, ``HALT``/``REVERT``."""
    lines = []
    for ev in trace:
        pad = "  " * getattr(ev, "depth", 0)
        if isinstance(ev, TxStart):
            lines.append(f"TX {ev.index} {ev.contract} 0x{ev.selector:08x}")
        elif isinstance(ev, StorageRead):
            lines.append(f"{pad}SLOAD {ev.contract}@{render(ev.slot)}")
        elif isinstance(ev, StorageWrite):
            lines.append(f"{pad}SSTORE {ev.contract}@{render(ev.slot)}")
        elif isinstance(ev, CallStart):
            lines.append(f"{pad}CALL {ev.kind} {render(ev.target)} {render(ev.value)}")
        elif isinstance(ev, Reenter):
            lines.append(f"{pad}REENTER 0x{ev.selector:08x}")
        elif isinstance(ev, Halt):
            word = "REVERT" if ev.kind in ("REVERT", "INVALID") else "HALT"
            lines.append(f"{pad}{word}")
    return "\n".join(lines)
