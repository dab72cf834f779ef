"""256-bit symbolic words.

A word is either a Python ``int`` in ``[0, 2**256)`` or an :class:`Expr` tree.
Constructors fold constants eagerly, so a word without symbols is always an
``int``. Structural identity of trees is carried by a 128-bit fingerprint, which
keeps equality and hashing O(1) for deep terms.
"""

from __future__ import annotations

from collections.abc import Iterable, Mapping
from hashlib import blake2b
from typing import Union

from revex.hashing import keccak_words

WORD = 1 << 256
MASK = WORD - 1
MAX_DEPTH = 10_000

BOOL_OPS = frozenset({"lt", "gt", "eq", "iszero"})
ARITY = {
    "add": 2, "sub": 2, "mul": 2, "div": 2, "and": 2, "or": 2, "not": 1,
    "lt": 2, "gt": 2, "eq": 2, "iszero": 1,
}


class ResourceError(RuntimeError):
    """A symbolic resource bound (depth, steps, paths, time) was exceeded."""


class ExpressionDepthError(ResourceError):
    pass


class Expr:
    __slots__ = ("op", "args", "name", "depth", "fp")

    def __init__(self, op: str, args: tuple = (), name: str = ""):
        depth = 1
        h = blake2b(digest_size=16)
        h.update(op.encode())
        h.update(b"\x00")
        h.update(name.encode())
        for a in args:
            if isinstance(a, Expr):
                if a.depth >= depth:
                    depth = a.depth + 1
                h.update(b"\x01")
                h.update(a.fp)
            else:
                h.update(b"\x02")
                h.update(a.to_bytes(32, "big"))
        if depth > MAX_DEPTH:
            raise ExpressionDepthError(f"expression depth exceeds {MAX_DEPTH}")
        self.op = op
        self.args = args
        self.name = name
        self.depth = depth
        self.fp = h.digest()

    def __eq__(self, other: object) -> bool:
        return self is other or (isinstance(other, Expr) and self.fp == other.fp)

    def __hash__(self) -> int:
        return int.from_bytes(self.fp[:8], "big")

    def __repr__(self) -> str:
        return f"Expr({render(self)})"

    @property
    def is_bool(self) -> bool:
        return self.op in BOOL_OPS


SymWord = Union[int, Expr]


def is_concrete(w: SymWord) -> bool:
    return isinstance(w, int)


def sym(name: str) -> Expr:
    return Expr("sym", (), name)


def _order(a: SymWord, b: SymWord) -> tuple[SymWord, SymWord]:
    # constants to the right, trees by fingerprint
    if isinstance(a, int):
        return b, a
    if isinstance(b, Expr) and b.fp < a.fp:
        return b, a
    return a, b


def add(a: SymWord, b: SymWord) -> SymWord:
    if isinstance(a, int) and isinstance(b, int):
        return (a + b) & MASK
    a, b = _order(a, b)
    if isinstance(b, int):
        if b == 0:
            return a
        if a.op == "add" and isinstance(a.args[1], int):
            return add(a.args[0], (a.args[1] + b) & MASK)
    return Expr("add", (a, b))


def sub(a: SymWord, b: SymWord) -> SymWord:
    if isinstance(a, int) and isinstance(b, int):
        return (a - b) & MASK
    if isinstance(b, int):
        return add(a, (-b) & MASK)
    if a == b:
        return 0
    return Expr("sub", (a, b))


def mul(a: SymWord, b: SymWord) -> SymWord:
    if isinstance(a, int) and isinstance(b, int):
        return (a * b) & MASK
    a, b = _order(a, b)
    if b == 0:
        return 0
    if b == 1:
        return a
    return Expr("mul", (a, b))


def div(a: SymWord, b: SymWord) -> SymWord:
    if isinstance(a, int) and isinstance(b, int):
        return 0 if b == 0 else a // b
    if b == 0 or a == 0:
        return 0
    if b == 1:
        return a
    return Expr("div", (a, b))


def and_(a: SymWord, b: SymWord) -> SymWord:
    if isinstance(a, int) and isinstance(b, int):
        return a & b
    a, b = _order(a, b)
    if b == 0:
        return 0
    if b == MASK or a == b:
        return a
    return Expr("and", (a, b))


def or_(a: SymWord, b: SymWord) -> SymWord:
    if isinstance(a, int) and isinstance(b, int):
        return a | b
    a, b = _order(a, b)
    if b == 0 or a == b:
        return a
    if b == MASK:
        return MASK
    return Expr("or", (a, b))


def not_(a: SymWord) -> SymWord:
    if isinstance(a, int):
        return MASK ^ a
    if a.op == "not":
        return a.args[0]
    return Expr("not", (a,))


def lt(a: SymWord, b: SymWord) -> SymWord:
    if isinstance(a, int) and isinstance(b, int):
        return int(a < b)
    if a == b or b == 0:
        return 0
    return Expr("lt", (a, b))


def gt(a: SymWord, b: SymWord) -> SymWord:
    if isinstance(a, int) and isinstance(b, int):
        return int(a > b)
    if a == b or a == 0:
        return 0
    return Expr("gt", (a, b))


def eq(a: SymWord, b: SymWord) -> SymWord:
    if isinstance(a, int) and isinstance(b, int):
        return int(a == b)
    if a == b:
        return 1
    a, b = _order(a, b)
    return Expr("eq", (a, b))


def iszero(a: SymWord) -> SymWord:
    if isinstance(a, int):
        return int(a == 0)
    if a.op == "iszero" and isinstance(a.args[0], Expr) and a.args[0].is_bool:
        return a.args[0]
    return Expr("iszero", (a,))


def truthy(a: SymWord) -> SymWord:
    """Boolean-rooted word that is 1 iff ``a`` is non-zero."""
    if isinstance(a, int):
        return int(a != 0)
    if a.is_bool:
        return a
    return iszero(iszero(a))


def keccak(words: Iterable[SymWord]) -> SymWord:
    words = tuple(words)
    if all(isinstance(w, int) for w in words):
        return keccak_words(words)
    return Expr("hash", words)


def apply(fname: str, *args: SymWord) -> Expr:
    """Uninterpreted function application."""
    return Expr("apply", tuple(args), fname)


BUILDERS = {
    "add": add, "sub": sub, "mul": mul, "div": div, "and": and_, "or": or_,
    "not": not_, "lt": lt, "gt": gt, "eq": eq, "iszero": iszero,
}

_CONCRETE = {
    "add": lambda a, b: (a + b) & MASK,
    "sub": lambda a, b: (a - b) & MASK,
    "mul": lambda a, b: (a * b) & MASK,
    "div": lambda a, b: 0 if b == 0 else a // b,
    "and": lambda a, b: a & b,
    "or": lambda a, b: a | b,
    "not": lambda a: MASK ^ a,
    "lt": lambda a, b: int(a < b),
    "gt": lambda a, b: int(a > b),
    "eq": lambda a, b: int(a == b),
    "iszero": lambda a: int(a == 0),
}


def _postorder(root: Expr) -> list[Expr]:
    """Distinct subtrees of ``root``, children before parents."""
    order: list[Expr] = []
    seen: set[Expr] = set()
    stack: list[tuple[Expr, bool]] = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if node in seen:
            continue
        seen.add(node)
        stack.append((node, True))
        for a in node.args:
            if isinstance(a, Expr) and a not in seen:
                stack.append((a, False))
    return order


def subterms(word: SymWord) -> list[Expr]:
    return _postorder(word) if isinstance(word, Expr) else []


def free_symbols(word: SymWord) -> set[str]:
    return {e.name for e in subterms(word) if e.op == "sym"}


def applications(word: SymWord) -> list[Expr]:
    """Hash and uninterpreted-function applications inside ``word``."""
    return [e for e in subterms(word) if e.op in ("hash", "apply")]


def evaluate(
    word: SymWord,
    values: Mapping[str, int],
    terms: Mapping[Expr, int] | None = None,
    default: int | None = 0,
) -> int:
    """Concrete value of ``word`` under an assignment.

    ``terms`` supplies values for hash/apply applications (for instance from a
    solver model); hashes missing from it are computed with Keccak-256.
    """
    if isinstance(word, int):
        return word
    terms = terms or {}
    memo: dict[Expr, int] = {}
    for node in _postorder(word):
        if node in terms:
            memo[node] = terms[node] & MASK
            continue
        args = [memo[a] if isinstance(a, Expr) else a for a in node.args]
        if node.op == "sym":
            if node.name in values:
                memo[node] = values[node.name] & MASK
            elif default is None:
                raise KeyError(node.name)
            else:
                memo[node] = default
        elif node.op == "hash":
            memo[node] = keccak_words(args)
        elif node.op == "apply":
            raise KeyError(f"no value for application {node.name}")
        else:
            memo[node] = _CONCRETE[node.op](*args)
    return memo[word]


def substitute(word: SymWord, values: Mapping[str, int]) -> SymWord:
    """Replace symbols by constants, re-folding on the way up."""
    if isinstance(word, int):
        return word
    memo: dict[Expr, SymWord] = {}
    for node in _postorder(word):
        args = [memo[a] if isinstance(a, Expr) else a for a in node.args]
        if node.op == "sym":
            memo[node] = values.get(node.name, node) if node.name in values else node
        elif node.op == "hash":
            memo[node] = keccak(args)
        elif node.op == "apply":
            memo[node] = Expr("apply", tuple(args), node.name)
        else:
            memo[node] = BUILDERS[node.op](*args)
    return memo[word]


def render(word: SymWord, limit: int = 6) -> str:
    if isinstance(word, int):
        return hex(word) if word > 0xFFFF else str(word)
    if limit <= 0:
        return "…"
    if word.op == "sym":
        return word.name
    inner = ",".join(render(a, limit - 1) for a in word.args)
    head = word.name if word.op == "apply" else word.op
    return f"{head}({inner})"
