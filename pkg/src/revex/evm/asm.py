"""Disassembler and assembler for the EVM subset.

Assembly syntax, one item per line::

    ; comment
    label:
        JUMPDEST
        PUSH2 label          ; label reference
        PUSH4 sig:withdraw(uint256)
        PUSH 0x2a            ; width chosen automatically
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from revex.evm.opcodes import MNEMONICS, OPCODES, push_width
from revex.hashing import selector

MAX_CODE_SIZE = 24_576


class AssemblyError(ValueError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


class CodeSizeError(ValueError):
    pass


@dataclass(frozen=True)
class Instruction:
    pc: int
    op: str
    immediate: bytes | None = None
    size: int = 1
    # original bytes of a PUSH truncated by the end of code (decoded as INVALID)
    raw: bytes | None = None

    @property
    def value(self) -> int | None:
        """Immediate as an unsigned integer (PUSH family only)."""
        if self.immediate is None:
            return None
        return int.from_bytes(self.immediate, "big")

    @property
    def next_pc(self) -> int:
        return self.pc + self.size

    def encode(self) -> bytes:
        if self.raw is not None:
            return self.raw
        out = bytes([MNEMONICS[self.op]])
        if self.immediate is not None:
            out += self.immediate
        return out

    def __str__(self) -> str:
        if self.immediate is not None:
            return f"{self.pc:#06x} {self.op} 0x{self.immediate.hex()}"
        return f"{self.pc:#06x} {self.op}"


def disassemble(code: bytes) -> list[Instruction]:
    if len(code) > MAX_CODE_SIZE:
        raise CodeSizeError(f"code is {len(code)} bytes, cap is {MAX_CODE_SIZE}")
    out: list[Instruction] = []
    pc = 0
    n = len(code)
    while pc < n:
        name = OPCODES.get(code[pc], "INVALID")
        width = push_width(name)
        if width:
            end = pc + 1 + width
            if end > n:
                out.append(Instruction(pc, "INVALID", None, n - pc, bytes(code[pc:])))
                break
            out.append(Instruction(pc, name, bytes(code[pc + 1 : end]), 1 + width))
            pc = end
        else:
            raw = bytes([code[pc]]) if code[pc] not in OPCODES else None
            out.append(Instruction(pc, name, raw=raw))
            pc += 1
    return out


def encode(instrs: list[Instruction]) -> bytes:
    return b"".join(i.encode() for i in instrs)


def parse_hex(text: str) -> bytes:
    """Bytecode file contents: hex with optional ``0x`` prefix, whitespace ignored."""
    cleaned = "".join(text.split())
    if cleaned[:2] in ("0x", "0X"):
        cleaned = cleaned[2:]
    if len(cleaned) % 2:
        raise ValueError("odd number of hex digits")
    return bytes.fromhex(cleaned)


_LABEL_RE = re.compile(r"^([A-Za-z_][A-Za-z0-9_.]*):$")
_NAME_RE = re.compile(r"^[A-Za-z_][A-Za-z0-9_.]*$")


def _min_width(value: int) -> int:
    return max(1, (value.bit_length() + 7) // 8)


def parse_program(text: str) -> list[Instruction]:
    """Parse assembly text into instructions with labels resolved."""
    # pass 1: tokenize and size items
    items: list[tuple[int, str, str | None]] = []
    labels: dict[str, int] = {}
    pc = 0
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split(";", 1)[0].strip()
        if not line:
            continue
        m = _LABEL_RE.match(line)
        if m:
            name = m.group(1)
            if name in labels:
                raise AssemblyError(f"label {name!r} defined twice", lineno)
            labels[name] = pc
            continue
        parts = line.split(None, 1)
        mnem = parts[0].upper()
        arg = parts[1].strip() if len(parts) > 1 else None
        if mnem == "PUSH":
            if arg is None:
                raise AssemblyError("PUSH needs an operand", lineno)
            if _is_literal(arg):
                mnem = f"PUSH{_min_width(_literal(arg, lineno))}"
            else:
                mnem = "PUSH2"
        if mnem not in MNEMONICS:
            raise AssemblyError(f"unknown mnemonic {parts[0]!r}", lineno)
        width = push_width(mnem)
        if width and arg is None:
            raise AssemblyError(f"{mnem} needs an operand", lineno)
        if not width and arg is not None:
            raise AssemblyError(f"{mnem} takes no operand", lineno)
        items.append((lineno, mnem, arg))
        pc += 1 + width

    # pass 2: encode
    out: list[Instruction] = []
    pc = 0
    for lineno, mnem, arg in items:
        width = push_width(mnem)
        if width:
            if _is_literal(arg):
                value = _literal(arg, lineno)
            elif _NAME_RE.match(arg):
                if arg not in labels:
                    raise AssemblyError(f"undefined label {arg!r}", lineno)
                value = labels[arg]
            else:
                raise AssemblyError(f"bad operand {arg!r}", lineno)
            if value >= 1 << (8 * width):
                raise AssemblyError(f"operand {arg!r} does not fit in {mnem}", lineno)
            out.append(Instruction(pc, mnem, value.to_bytes(width, "big"), 1 + width))
        else:
            out.append(Instruction(pc, mnem))
        pc += 1 + width
    return out


def _is_literal(arg: str) -> bool:
    return arg[:2].lower() == "0x" or arg.isdigit() or arg.startswith("sig:")


def _literal(arg: str, lineno: int) -> int:
    try:
        if arg.startswith("sig:"):
            return selector(arg[4:].strip())
        if arg[:2].lower() == "0x":
            return int(arg, 16)
        return int(arg)
    except ValueError:
        raise AssemblyError(f"bad literal {arg!r}", lineno) from None


def assemble(text: str) -> bytes:
    code = encode(parse_program(text))
    if len(code) > MAX_CODE_SIZE:
        raise CodeSizeError(f"assembled code is {len(code)} bytes, cap is {MAX_CODE_SIZE}")
    return code
