"""Opcode table for the supported EVM subset."""

from __future__ import annotations

OPCODES: dict[int, str] = {
    0x00: "STOP",
    0x01: "ADD",
    0x02: "MUL",
    0x03: "SUB",
    0x04: "DIV",
    0x10: "LT",
    0x11: "GT",
    0x14: "EQ",
    0x15: "ISZERO",
    0x16: "AND",
    0x17: "OR",
    0x19: "NOT",
    0x20: "SHA3",
    0x33: "CALLER",
    0x34: "CALLVALUE",
    0x35: "CALLDATALOAD",
    0x36: "CALLDATASIZE",
    0x50: "POP",
    0x51: "MLOAD",
    0x52: "MSTORE",
    0x54: "SLOAD",
    0x55: "SSTORE",
    0x56: "JUMP",
    0x57: "JUMPI",
    0x58: "PC",
    0x5B: "JUMPDEST",
    0xF1: "CALL",
    0xF2: "CALLCODE",
    0xF3: "RETURN",
    0xF4: "DELEGATECALL",
    0xFA: "STATICCALL",
    0xFD: "REVERT",
    0xFE: "INVALID",
}
for _n in range(1, 33):
    OPCODES[0x5F + _n] = f"PUSH{_n}"
for _n in range(1, 17):
    OPCODES[0x7F + _n] = f"DUP{_n}"
    OPCODES[0x8F + _n] = f"SWAP{_n}"

MNEMONICS: dict[str, int] = {name: code for code, name in OPCODES.items()}

INVALID_BYTE = 0xFE

CALL_FAMILY = frozenset({"CALL", "CALLCODE", "DELEGATECALL", "STATICCALL"})
KEY_INSTRUCTIONS = frozenset({"SSTORE", "SLOAD"}) | CALL_FAMILY
HALTING = frozenset({"STOP", "RETURN"})


def push_width(name: str) -> int:
    """Immediate width of a PUSHn mnemonic, 0 for anything else."""
    if name.startswith("PUSH") and name[4:].isdigit():
        return int(name[4:])
    return 0


def is_push(name: str) -> bool:
    return push_width(name) > 0
