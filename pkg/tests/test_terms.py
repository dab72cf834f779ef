import pytest
from hypothesis import given
from hypothesis import strategies as st

from revex.hashing import keccak_words
from revex.symexec import terms as T
from revex.symexec.storage import GlobalStore, GotKey, UnknownContract, got_read, got_write

M = T.MASK
REF = {
    "add": lambda a, b: (a + b) & M,
    "sub": lambda a, b: (a - b) & M,
    "mul": lambda a, b: (a * b) & M,
    "div": lambda a, b: a // b if b else 0,
    "and": lambda a, b: a & b,
    "or": lambda a, b: a | b,
    "lt": lambda a, b: int(a < b),
    "gt": lambda a, b: int(a > b),
    "eq": lambda a, b: int(a == b),
    "not": lambda a: a ^ M,
    "iszero": lambda a: int(a == 0),
}

words = st.one_of(st.integers(0, 8), st.integers(0, M), st.sampled_from([M, M - 1, 1 << 255]))


@st.composite
def trees(draw, depth=4):
    """(symbolic word, reference value function) pairs."""
    if depth == 0 or draw(st.booleans()):
        if draw(st.booleans()):
            name = draw(st.sampled_from("xyz"))
            return T.sym(name), lambda env, n=name: env[n]
        c = draw(words)
        return c, lambda env, c=c: c
    op = draw(st.sampled_from(sorted(REF)))
    if T.ARITY[op] == 1:
        w, f = draw(trees(depth - 1))
        return T.BUILDERS[op](w), lambda env: REF[op](f(env))
    (a, fa), (b, fb) = draw(trees(depth - 1)), draw(trees(depth - 1))
    return T.BUILDERS[op](a, b), lambda env: REF[op](fa(env), fb(env))


@given(trees(), st.fixed_dictionaries({n: words for n in "xyz"}))
def test_folding_agrees_with_reference(tree, env):
    word, ref = tree
    assert T.evaluate(word, env) == ref(env)
    assert T.substitute(word, env) == ref(env)


def test_constants_fold_eagerly():
    assert T.add(2, 3) == 5
    assert T.sub(0, 1) == M
    assert T.add(T.sym("v"), 0) == T.sym("v")
    assert T.add(T.add(T.sym("v"), 2), 4) == T.add(T.sym("v"), 6)
    assert T.keccak([1, 2]) == keccak_words([1, 2])
    assert isinstance(T.keccak([T.sym("k"), 0]), T.Expr)


def test_structural_equality():
    a = T.keccak([T.add(T.sym("k"), 1), 0])
    b = T.keccak([T.add(1, T.sym("k")), 0])
    assert a == b and hash(a) == hash(b)
    assert T.add(T.sym("x"), T.sym("y")) == T.add(T.sym("y"), T.sym("x"))


def test_depth_bound():
    w = T.sym("x")
    with pytest.raises(T.ExpressionDepthError):
        for _ in range(T.MAX_DEPTH + 1):
            w = T.not_(T.add(w, T.sym("y")))


def test_store_examples():
    s = GlobalStore(["A", "B"])
    assert got_read(s, GotKey("A", 5)) == 0
    s2 = got_write(s, GotKey("A", 5), 7)
    assert got_read(s2, GotKey("A", 5)) == 7
    assert got_read(s2, GotKey("B", 5)) == 0
    assert got_read(s, GotKey("A", 5)) == 0  # persistent
    k = T.keccak([T.sym("k"), 0])
    s3 = got_write(s2, GotKey("A", k), T.sym("x"))
    assert got_read(s3, GotKey("A", T.keccak([T.sym("k"), 0]))) == T.sym("x")
    with pytest.raises(UnknownContract):
        got_read(s, GotKey("C", 0))


@given(st.lists(st.tuples(st.sampled_from("AB"), st.integers(0, 5), st.integers(0, 9)), max_size=20))
def test_store_matches_dict_model(ops):
    s = GlobalStore(["A", "B"])
    model = {}
    for c, slot, v in ops:
        s = s.write(GotKey(c, slot), v)
        model[(c, slot)] = v
    for c in "AB":
        for slot in range(6):
            assert s.read(GotKey(c, slot)) == model.get((c, slot), 0)
