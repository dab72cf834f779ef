import sys
from pathlib import Path

from revex.hashing import selector
from revex.reports import Warning
from revex.symexec.trace import (
    Branch, CallEnd, CallStart, Halt, Reenter, ReenterEnd, StorageRead, StorageWrite, TxStart,
)
from revex.verifier import Verdict, VerifyConfig, replay_witness, verify, verify_warning, witness_predicate

from .conftest import EXPECTED, corpus_warnings, make_bundle, named

CVC5 = f"{sys.executable} {Path(__file__).parent / 'support' / 'cvc5_smt2.py'}"
S = "slot"


def _guard(rid, depth):
    return [StorageRead(rid, "c", S, 10, depth), Branch("c", 12, frozenset({rid}), True, True, depth)]


def _reentry(success=True, inner_guard=True):
    inner = _guard(1, 1) if inner_guard else [StorageRead(1, "c", S, 10, 1)]
    return [Reenter(0, 1, 1)] + inner + [Halt("STOP" if success else "REVERT", "c", 1), ReenterEnd(0, success, 0)]


def _withdraw_trace(kind="CALL", static=False, write_first=False, **reentry):
    call = [CallStart(kind, "t", "v", True, static, "c", 20, 0)] + _reentry(**reentry) + [CallEnd(kind, True, 0)]
    write = [StorageWrite("c", S, 0, 30, 0)]
    body = write + call if write_first else call + write
    return [TxStart(0, 1, "c")] + _guard(0, 0) + body + [Halt("STOP", "c", 0)]


def test_predicate_examples():
    assert witness_predicate(_withdraw_trace())
    assert not witness_predicate(_withdraw_trace("STATICCALL", static=True))
    assert not witness_predicate(_withdraw_trace(write_first=True))
    assert not witness_predicate(_withdraw_trace(success=False))
    assert not witness_predicate(_withdraw_trace(inner_guard=False))
    reverted = _withdraw_trace()[:-1] + [Halt("REVERT", "c", 0)]
    assert not witness_predicate(reverted)


def test_external_read_only_shape_is_rejected():
    trace = [
        TxStart(0, 1, "c"),
        CallStart("STATICCALL", 5, 0, False, True, "c", 3, 0),
        StorageRead(0, "token", S, 4, 1),
        Halt("RETURN", "token", 1),
        CallEnd("STATICCALL", True, 0),
        Halt("RETURN", "c", 0),
    ]
    assert not witness_predicate(trace)


def test_only_final_transaction_counts():
    trace = _withdraw_trace() + [TxStart(1, 1, "c"), Halt("STOP", "c", 0)]
    assert not witness_predicate(trace)


def test_corpus_verdicts(bundles, corpus_verdicts):
    got = {k: v.outcome for k, v in corpus_verdicts[True].items()}
    assert got == EXPECTED


def test_confirmed_witnesses_replay(bundles, corpus_verdicts):
    confirmed = [v for v in corpus_verdicts[True].values() if v.outcome == "confirmed"]
    assert len(confirmed) == 4
    for v in confirmed:
        res = replay_witness(bundles, v)
        assert res.constraints_hold and res.ok, v.contract_id
        assert "tx" in " ".join(v.witness.model)  # a concrete transaction value is part of the model


def test_pruning_is_conservative(corpus_verdicts):
    pruned, full = corpus_verdicts[True], corpus_verdicts[False]
    assert {k: v.outcome for k, v in pruned.items()} == {k: v.outcome for k, v in full.items()}
    for k in pruned:
        assert pruned[k].steps <= full[k].steps
    assert sum(v.steps for v in pruned.values()) < sum(v.steps for v in full.values())


def test_verdicts_are_deterministic(bundles, corpus_verdicts):
    again = named(bundles, verify(bundles, corpus_warnings(bundles), VerifyConfig(timeout=60)))
    first = corpus_verdicts[True]
    assert {k: (v.outcome, v.steps, v.paths) for k, v in again.items()} == {
        k: (v.outcome, v.steps, v.paths) for k, v in first.items()
    }
    for k, v in first.items():
        if v.witness:
            assert again[k].witness.model == v.witness.model


def test_solver_swap_gives_same_verdicts(bundles, corpus_verdicts):
    ws = corpus_warnings(bundles)
    other = named(bundles, verify(bundles, ws, VerifyConfig(timeout=60, solver=CVC5)))
    assert {k: v.outcome for k, v in other.items()} == EXPECTED
    for k, v in other.items():
        if v.outcome == "confirmed":
            assert replay_witness(bundles, v).ok


def test_parallel_matches_serial(bundles, corpus_verdicts):
    par = named(bundles, verify(bundles, corpus_warnings(bundles), VerifyConfig(timeout=60, jobs=3)))
    assert {k: v.outcome for k, v in par.items()} == EXPECTED


def test_unknown_selector_degrades_to_unknown(bundles):
    v = verify_warning(bundles, Warning("bank", 0x12345678))
    assert v.outcome == "unknown" and "not dispatched" in v.reason


def test_engine_errors_do_not_abort_batch(bundles):
    ws = [Warning("no_such_contract", 1), Warning("bank", selector("withdraw(uint256)"))]
    out = verify(bundles, ws)
    assert [v.outcome for v in out] == ["unknown", "confirmed"]
    assert out[0].reason.startswith("KeyError")


def test_dynamic_jump_is_unknown():
    src = """
    PUSH1 0
    CALLDATALOAD
    PUSH29 0x0100000000000000000000000000000000000000000000000000000000
    SWAP1
    DIV
    PUSH4 sig:f()
    EQ
    PUSH2 f
    JUMPI
    STOP
f:
    JUMPDEST
    PUSH1 4
    CALLDATALOAD
    JUMP
"""
    bundles = {"d": make_bundle("d", src, 0x99)}
    v = verify_warning(bundles, Warning("d", selector("f()")))
    assert v.outcome == "unknown" and "unresolved" in v.reason


def test_step_budget_gives_unknown(bundles):
    v = verify_warning(bundles, Warning("bank", selector("withdraw(uint256)")), VerifyConfig(max_steps=50))
    assert v.outcome == "unknown" and "step budget" in v.reason


def test_verdict_json_round_trip(corpus_verdicts):
    v = corpus_verdicts[True][("bank", "withdraw")]
    doc = v.to_json()
    assert set(doc) >= {"contract_id", "selector", "outcome", "elapsed_s", "witness"}
    assert doc["selector"] == "0x2e1a7d4d"
    assert any("CALL" in line for line in doc["witness"]["trace"])
    back = Verdict.from_json(doc)
    assert (back.contract_id, back.selector, back.outcome) == ("bank", v.selector, "confirmed")
