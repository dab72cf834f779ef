import itertools
import sys
import textwrap

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from revex.solver import ProtocolError, SmtProcess, check_reachability, parse_model
from revex.symexec import terms as T

x, y = T.sym("x"), T.sym("y")
SMALL = 16


@pytest.fixture(scope="module")
def z3():
    with SmtProcess() as proc:
        yield proc


def test_contradiction_is_unsat(z3):
    v = T.sym("v")
    assert check_reachability([T.gt(v, 5), T.lt(v, 3)], solver=z3).status == "unsat"


def test_balance_check_is_sat(z3):
    v, bal = T.sym("v"), T.sym("balance")
    res = check_reachability([T.iszero(T.gt(v, bal)), T.eq(v, 1)], solver=z3)
    assert res.status == "sat"
    assert res.model["v"] == 1 and res.model["balance"] >= 1


def test_distinct_hash_inputs_do_not_collide(z3):
    a, b = T.keccak([x, 0]), T.keccak([y, 0])
    assert check_reachability([T.eq(a, b), T.iszero(T.eq(x, y))], solver=z3).status == "unsat"
    res = check_reachability([T.eq(a, b)], solver=z3)
    assert res.status == "sat" and res.model["x"] == res.model["y"]


def test_division_by_zero_is_zero(z3):
    assert check_reachability([T.truthy(T.div(x, 0))], solver=z3).status == "unsat"
    assert check_reachability([T.eq(T.div(x, y), 0), T.eq(y, 0), T.eq(x, 9)], solver=z3).status == "sat"


def test_concrete_sets_skip_the_solver():
    missing = "/nonexistent/solver"
    assert check_reachability([1, 5], solver=missing).status == "sat"
    assert check_reachability([1, 0], solver=missing).status == "unsat"
    assert check_reachability([], solver=missing).status == "sat"


CMPS = [T.lt, T.gt, T.eq]
ARITH = [T.add, T.sub, T.and_, T.or_]


@st.composite
def small_constraint_sets(draw):
    operands = st.one_of(st.sampled_from([x, y]), st.integers(0, 20))
    conds = [T.lt(x, SMALL), T.lt(y, SMALL)]
    for _ in range(draw(st.integers(1, 4))):
        lhs = draw(st.sampled_from(ARITH))(draw(operands), draw(operands))
        c = draw(st.sampled_from(CMPS))(lhs, draw(operands))
        if draw(st.booleans()):
            c = T.iszero(c)
        conds.append(c)
    return conds


@settings(max_examples=60, deadline=None)
@given(small_constraint_sets())
def test_agrees_with_exhaustive_search(z3, conds):
    brute = any(
        all(T.evaluate(c, {"x": a, "y": b}) != 0 for c in conds)
        for a, b in itertools.product(range(SMALL), repeat=2)
    )
    res = check_reachability(conds, solver=z3)
    assert res.status == ("sat" if brute else "unsat")
    if brute:
        env = {"x": res.model.get("x", 0), "y": res.model.get("y", 0)}
        assert all(T.evaluate(c, env) != 0 for c in conds)


def _fake_solver(tmp_path, body: str) -> str:
    script = tmp_path / "fake_solver.py"
    script.write_text(textwrap.dedent(body))
    return f"{sys.executable} {script}"


def test_malformed_reply_raises_with_raw_text(tmp_path):
    cmd = _fake_solver(tmp_path, """
        import sys
        for line in sys.stdin:
            if line.startswith("(check-sat"):
                print("banana", flush=True)
    """)
    with pytest.raises(ProtocolError) as info:
        check_reachability([T.eq(x, 1)], solver=cmd)
    assert info.value.raw == "banana"


def test_silent_solver_times_out(tmp_path):
    cmd = _fake_solver(tmp_path, """
        import sys, time
        for line in sys.stdin:
            pass
        time.sleep(60)
    """)
    res = check_reachability([T.eq(x, 1)], timeout=0.5, solver=cmd)
    assert res.status == "unknown" and "timeout" in res.reason


def test_missing_solver_binary_is_unknown():
    res = check_reachability([T.eq(x, 1)], solver="/nonexistent/solver")
    assert res.status == "unknown" and "cannot start" in res.reason


def test_parse_model_forms():
    z3_style = "(model (define-fun x () (_ BitVec 256) #x00000000000000000000000000000000000000000000000000000000000000ff))"
    cvc5_style = """(
      (define-fun |tx0.value| () (_ BitVec 256) (_ bv7 256))
      (define-fun h ((a (_ BitVec 256))) (_ BitVec 256) a)
      (define-fun y () (_ BitVec 256) #b101)
    )"""
    assert parse_model(z3_style) == {"x": 255}
    assert parse_model(cvc5_style) == {"tx0.value": 7, "y": 5}
