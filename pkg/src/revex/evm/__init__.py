from revex.evm.asm import (
    AssemblyError,
    CodeSizeError,
    Instruction,
    assemble,
    disassemble,
    encode,
    parse_hex,
    parse_program,
)
from revex.evm.cfg import BasicBlock, Cfg, MalformedControlFlow, build_cfg

__all__ = [
    "AssemblyError",
    "BasicBlock",
    "Cfg",
    "CodeSizeError",
    "Instruction",
    "MalformedControlFlow",
    "assemble",
    "build_cfg",
    "disassemble",
    "encode",
    "parse_hex",
    "parse_program",
]
