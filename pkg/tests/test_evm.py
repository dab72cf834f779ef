import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from revex.evm import (
    AssemblyError,
    CodeSizeError,
    MalformedControlFlow,
    assemble,
    build_cfg,
    disassemble,
    encode,
    parse_hex,
)
from revex.hashing import selector
from tests.support.oracles import expected_successors, random_program


@given(st.binary(max_size=300))
def test_disassemble_encode_round_trip(code):
    assert encode(disassemble(code)) == code


def test_unknown_byte_is_invalid():
    ins = disassemble(bytes([0x0C, 0x00]))
    assert [i.op for i in ins] == ["INVALID", "STOP"]


def test_truncated_push_keeps_bytes():
    code = bytes([0x61, 0xAB])
    ins = disassemble(code)
    assert ins[-1].op == "INVALID"
    assert encode(ins) == code


def test_code_size_cap():
    disassemble(bytes(24_576))
    with pytest.raises(CodeSizeError):
        disassemble(bytes(24_577))


def test_parse_hex_accepts_prefix_and_whitespace():
    assert parse_hex("0x60 01\n00") == bytes([0x60, 0x01, 0x00])


def test_assembler_labels_and_selectors():
    code = assemble("PUSH4 sig:withdraw(uint256)\nPUSH2 end\nJUMP\nend:\nJUMPDEST\nSTOP\n")
    ins = disassemble(code)
    assert ins[0].value == selector("withdraw(uint256)") == 0x2E1A7D4D
    assert ins[1].value == ins[3].pc


def test_assembler_errors():
    with pytest.raises(AssemblyError):
        assemble("PUSH2 nowhere\n")
    with pytest.raises(AssemblyError):
        assemble("FROB\n")
    with pytest.raises(AssemblyError):
        assemble("PUSH1 0x1ff\n")


@given(st.binary(max_size=200))
@settings(max_examples=200)
def test_blocks_partition_instructions(code):
    ins = disassemble(code)
    try:
        cfg = build_cfg(ins)
    except MalformedControlFlow:
        return
    covered = [i.pc for b in sorted(cfg.blocks) for i in cfg.blocks[b].instructions]
    assert covered == [i.pc for i in ins]
    for bid, block in cfg.blocks.items():
        assert block.id == block.first_pc == bid
        for s in block.successors:
            assert s in cfg.blocks


def test_call_does_not_split_but_jumpdest_does():
    cfg = build_cfg(disassemble(assemble(
        "PUSH1 0\nDUP1\nDUP1\nDUP1\nDUP1\nCALLER\nmid:\nJUMPDEST\nPUSH1 1\nSTOP\n"
    )))
    assert len(cfg.blocks) == 2
    cfg = build_cfg(disassemble(assemble(
        "PUSH1 0\nDUP1\nDUP1\nDUP1\nDUP1\nCALLER\nPUSH1 0\nCALL\nPOP\nSTOP\n"
    )))
    assert len(cfg.blocks) == 1


def test_jump_to_non_jumpdest_is_malformed():
    with pytest.raises(MalformedControlFlow):
        build_cfg(disassemble(assemble("PUSH1 4\nJUMP\nSTOP\nSTOP\n")))


def test_dynamic_jump_flagged():
    cfg = build_cfg(disassemble(assemble("PUSH1 4\nCALLDATALOAD\nJUMP\n")))
    assert cfg.dynamic_blocks == [0]
    assert cfg.blocks[0].successors == ()


def test_dispatcher_entries(bundles):
    entries = bundles["bank"].cfg.function_entries
    assert set(entries) == {selector("deposit()"), selector("withdraw(uint256)"), selector("setOwner(address)")}
    for pc in entries.values():
        assert bundles["bank"].by_pc[pc].op == "JUMPDEST"


def test_corpus_has_no_unresolved_jumps(bundles):
    for b in bundles.values():
        assert b.cfg.dynamic_blocks == []


def test_random_cfg_successors_match_oracle():
    rng = random.Random(7)
    for _ in range(1000):
        prog = random_program(rng)
        ins = disassemble(assemble(prog.source))
        cfg = build_cfg(ins)
        firsts = sorted(cfg.blocks)
        assert len(firsts) == len(prog.bodies)
        for b, succ in expected_successors(prog).items():
            assert list(cfg.blocks[firsts[b]].successors) == [firsts[s] for s in succ]


def test_corpus_programs_round_trip(corpus_dir):
    from revex.evm import parse_program

    for path in sorted(corpus_dir.rglob("*.asm")):
        prog = parse_program(path.read_text())
        assert disassemble(encode(prog)) == prog
