"""Two-contract fixture: A.run() calls B.hit() with a chosen call kind."""

from revex.hashing import selector
from revex.symexec import Machine

from ..conftest import make_bundle

A_ADDR = 0xA000
B_ADDR = 0xB000
HIT = selector("hit()")
RUN = selector("run()")

DISPATCH = """
    PUSH1 0
    CALLDATALOAD
    PUSH29 0x0100000000000000000000000000000000000000000000000000000000
    SWAP1
    DIV
    PUSH4 sig:{sig}
    EQ
    PUSH2 body
    JUMPI
    PUSH1 0
    DUP1
    REVERT
body:
    JUMPDEST
"""


def caller_and_callee(kind: str, with_value: bool = True):
    """A.run() calls B.hit() with ``kind``; B records caller, value+6 and a constant."""
    value = "CALLVALUE\n" if with_value else ""
    a = DISPATCH.format(sig="run()") + f"""
    PUSH4 sig:hit()
    PUSH29 0x0100000000000000000000000000000000000000000000000000000000
    MUL
    PUSH1 0
    MSTORE
    PUSH1 0x20
    PUSH1 0x40
    PUSH1 4
    PUSH1 0
    {value}    PUSH2 {B_ADDR}
    PUSH2 0xffff
    {kind}
    PUSH1 9
    SSTORE
    PUSH1 0x40
    MLOAD
    PUSH1 8
    SSTORE
    STOP
"""
    b = DISPATCH.format(sig="hit()") + """
    CALLER
    PUSH1 0
    SSTORE
    CALLVALUE
    PUSH1 6
    ADD
    PUSH1 2
    SSTORE
    PUSH1 7
    PUSH1 3
    SSTORE
    PUSH1 42
    PUSH1 0
    MSTORE
    PUSH1 0x20
    PUSH1 0
    RETURN
"""
    return {"A": make_bundle("A", a, A_ADDR), "B": make_bundle("B", b, B_ADDR)}


def callee_frame(bundles):
    m = Machine(bundles)
    s = m.start_tx(m.initial_world(), 0, "A", RUN)
    while len(s.frames) < 2:
        (s,) = m.step(s)
        assert s.status == "running"
    return s.frames[0], s.frames[1]
