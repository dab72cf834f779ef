"""Constraint solving through an external SMT-LIB2 process."""

from __future__ import annotations

import os
import select
import shlex
import shutil
import subprocess
import time
from collections.abc import Iterable, Sequence
from dataclasses import dataclass, field

from revex.symexec import terms as T
from revex.symexec.terms import Expr, SymWord

DEFAULT_SOLVER = "z3 -in -smt2"
BV = "(_ BitVec 256)"
_BV_OPS = {"add": "bvadd", "sub": "bvsub", "mul": "bvmul", "and": "bvand", "or": "bvor", "not": "bvnot"}
_CMP_OPS = {"lt": "bvult", "gt": "bvugt"}


class SolverError(RuntimeError):
    pass


class ProtocolError(SolverError):
    def __init__(self, message: str, raw: str):
        super().__init__(f"{message}: {raw!r}")
        self.raw = raw


@dataclass
class SolverResult:
    status: str  # sat | unsat | unknown
    model: dict[str, int] = field(default_factory=dict)
    terms: dict[Expr, int] = field(default_factory=dict)
    reason: str = ""


def _lit(n: int) -> str:
    return f"(_ bv{n & T.MASK} 256)"


def _name(s: str) -> str:
    return f"|{s}|"


class Serializer:
    """Turns boolean-rooted words into SMT-LIB2 QF_AUFBV commands."""

    def __init__(self):
        self.lines: list[str] = []
        self.defined: dict[Expr, str] = {}
        self.symbols: list[str] = []
        self.functions: dict[str, int] = {}
        self.apps: list[Expr] = []

    def ref(self, w: SymWord) -> str:
        return _lit(w) if isinstance(w, int) else self.defined[w]

    def _bv_of(self, node: Expr) -> str:
        a = [self.ref(x) for x in node.args]
        op = node.op
        if op in _BV_OPS:
            return f"({_BV_OPS[op]} {' '.join(a)})"
        if op == "div":
            return f"(ite (= {a[1]} {_lit(0)}) {_lit(0)} (bvudiv {a[0]} {a[1]}))"
        if op in T.BOOL_OPS:
            return f"(ite {self._bool_of(node)} {_lit(1)} {_lit(0)})"
        raise ValueError(f"cannot serialize {op}")

    def _bool_of(self, node: Expr) -> str:
        a = [self.ref(x) for x in node.args]
        if node.op in _CMP_OPS:
            return f"({_CMP_OPS[node.op]} {a[0]} {a[1]})"
        if node.op == "eq":
            return f"(= {a[0]} {a[1]})"
        if node.op == "iszero":
            return f"(= {a[0]} {_lit(0)})"
        return f"(not (= {self.ref(node)} {_lit(0)}))"

    def _define(self, node: Expr) -> None:
        if node.op == "sym":
            name = _name(node.name)
            self.lines.append(f"(declare-const {name} {BV})")
            self.symbols.append(node.name)
            self.defined[node] = name
            return
        if node.op in ("hash", "apply"):
            fname = f"keccak{len(node.args)}" if node.op == "hash" else _name(f"fn.{node.name}")
            if fname not in self.functions:
                self.functions[fname] = len(node.args)
                doms = " ".join([BV] * len(node.args))
                self.lines.append(f"(declare-fun {fname} ({doms}) {BV})")
            body = f"({fname} {' '.join(self.ref(a) for a in node.args)})" if node.args else fname
            self.apps.append(node)
        else:
            body = self._bv_of(node)
        name = f"t{len(self.defined)}"
        self.lines.append(f"(define-fun {name} () {BV} {body})")
        self.defined[node] = name

    def add(self, cond: SymWord) -> None:
        for node in T.subterms(cond):
            if node not in self.defined:
                self._define(node)
        if isinstance(cond, int):
            self.lines.append(f"(assert {'true' if cond else 'false'})")
        elif cond.is_bool:
            self.lines.append(f"(assert {self._bool_of(cond)})")
        else:
            self.lines.append(f"(assert (not (= {self.ref(cond)} {_lit(0)})))")

    def hash_axioms(self) -> None:
        # distinct hash inputs never collide
        hashes = [h for h in self.apps if h.op == "hash"]
        for i, h in enumerate(hashes):
            for g in hashes[i + 1:]:
                if len(h.args) != len(g.args):
                    self.lines.append(f"(assert (distinct {self.defined[h]} {self.defined[g]}))")
                    continue
                same = " ".join(f"(= {self.ref(x)} {self.ref(y)})" for x, y in zip(h.args, g.args))
                self.lines.append(
                    f"(assert (=> (= {self.defined[h]} {self.defined[g]}) (and true {same})))"
                )


# -- s-expressions ---------------------------------------------------------------


def tokenize(text: str) -> list[str]:
    out, i, n = [], 0, len(text)
    while i < n:
        c = text[i]
        if c.isspace():
            i += 1
        elif c == ";":
            while i < n and text[i] != "\n":
                i += 1
        elif c in "()":
            out.append(c)
            i += 1
        elif c == "|":
            j = text.index("|", i + 1)
            out.append(text[i : j + 1])
            i = j + 1
        elif c == '"':
            j = i + 1
            while j < n:
                if text[j] == '"':
                    if j + 1 < n and text[j + 1] == '"':
                        j += 2
                        continue
                    break
                j += 1
            out.append(text[i : j + 1])
            i = j + 1
        else:
            j = i
            while j < n and not text[j].isspace() and text[j] not in '()|";':
                j += 1
            out.append(text[i:j])
            i = j
    return out


def parse_sexprs(text: str) -> list:
    tokens = tokenize(text)
    stack: list[list] = [[]]
    for tok in tokens:
        if tok == "(":
            stack.append([])
        elif tok == ")":
            if len(stack) == 1:
                raise ValueError("unbalanced ')'")
            done = stack.pop()
            stack[-1].append(done)
        else:
            stack[-1].append(tok)
    if len(stack) != 1:
        raise ValueError("unbalanced '('")
    return stack[0]


def parse_value(sx) -> int:
    """Integer value of a bit-vector literal: ``#x..``, ``#b..`` or ``(_ bvN W)``."""
    if isinstance(sx, str):
        if sx.startswith("#x"):
            return int(sx[2:], 16)
        if sx.startswith("#b"):
            return int(sx[2:], 2)
    elif len(sx) == 3 and sx[0] == "_" and sx[1].startswith("bv"):
        return int(sx[1][2:])
    raise ValueError(f"not a bit-vector literal: {sx!r}")


def _unquote(sym: str) -> str:
    return sym[1:-1] if sym.startswith("|") and sym.endswith("|") else sym


def parse_model(text: str) -> dict[str, int]:
    """Constants of a ``(get-model)`` reply; function definitions are skipped."""
    sx = parse_sexprs(text)
    if len(sx) != 1 or not isinstance(sx[0], list):
        raise ValueError("model is not a single list")
    body = sx[0]
    if body and body[0] == "model":
        body = body[1:]
    out = {}
    for item in body:
        if isinstance(item, list) and len(item) == 5 and item[0] == "define-fun" and item[2] == []:
            try:
                out[_unquote(item[1])] = parse_value(item[4])
            except ValueError:
                continue
    return out


def _balanced(text: str) -> bool:
    try:
        parse_sexprs(text)
    except ValueError:
        return False
    return True


# -- process --------------------------------------------------------------------


def default_command() -> list[str]:
    cmd = os.environ.get("REVEX_SOLVER", DEFAULT_SOLVER)
    argv = shlex.split(cmd)
    if shutil.which(argv[0]) is None and argv[0] == "z3" and os.path.exists("/usr/local/bin/z3"):
        argv[0] = "/usr/local/bin/z3"
    return argv


class SmtProcess:
    """A long-lived solver process; each query runs inside push/pop."""

    def __init__(self, command: Sequence[str] | str | None = None):
        if command is None:
            command = default_command()
        elif isinstance(command, str):
            command = shlex.split(command)
        self.command = list(command)
        self.proc: subprocess.Popen | None = None
        self._buf = b""

    def _start(self) -> None:
        try:
            self.proc = subprocess.Popen(
                self.command, stdin=subprocess.PIPE, stdout=subprocess.PIPE,
                stderr=subprocess.DEVNULL, bufsize=0,
            )
        except OSError as e:
            raise SolverError(f"cannot start solver {self.command[0]!r}: {e}") from None
        self._buf = b""
        self._send("(set-option :produce-models true)\n(set-logic QF_AUFBV)\n")

    def close(self) -> None:
        if self.proc is not None:
            try:
                self.proc.kill()
                self.proc.wait(timeout=5)
            except (OSError, subprocess.TimeoutExpired):
                pass
            self.proc = None

    def __enter__(self) -> SmtProcess:
        return self

    def __exit__(self, *exc) -> None:
        self.close()

    def _send(self, text: str) -> None:
        try:
            self.proc.stdin.write(text.encode())
        except (BrokenPipeError, OSError) as e:
            raise SolverError(f"solver pipe closed: {e}") from None

    def _read_reply(self, deadline: float) -> str:
        """Read one complete reply: a bare atom line or a balanced s-expression."""
        fd = self.proc.stdout.fileno()
        while True:
            text = self._buf.decode(errors="replace")
            stripped = text.lstrip()
            if stripped:
                if stripped.startswith("("):
                    if _balanced(stripped) and stripped.rstrip().endswith(")"):
                        end = len(text)
                        self._buf = b""
                        return text[:end].strip()
                elif "\n" in stripped:
                    line, rest = stripped.split("\n", 1)
                    self._buf = rest.encode()
                    return line.strip()
            remaining = deadline - time.monotonic()
            if remaining <= 0:
                raise TimeoutError
            ready, _, _ = select.select([fd], [], [], remaining)
            if not ready:
                raise TimeoutError
            chunk = os.read(fd, 65536)
            if not chunk:
                raise SolverError(f"solver exited unexpectedly: {self._buf.decode(errors='replace')!r}")
            self._buf += chunk

    def check(self, script: Serializer, timeout: float) -> SolverResult:
        deadline = time.monotonic() + timeout
        try:
            if self.proc is None or self.proc.poll() is not None:
                self._start()
            self._send("(push 1)\n" + "\n".join(script.lines) + "\n(check-sat)\n")
            reply = self._read_reply(deadline)
            if reply.startswith("(error"):
                raise ProtocolError("solver rejected the query", reply)
            if reply not in ("sat", "unsat", "unknown"):
                raise ProtocolError("unexpected check-sat reply", reply)
            if reply != "sat":
                self._send("(pop 1)\n")
                return SolverResult(reply)
            self._send("(get-model)\n")
            raw_model = self._read_reply(deadline)
            if raw_model.startswith("(error"):
                raise ProtocolError("get-model failed", raw_model)
            try:
                values = parse_model(raw_model)
            except ValueError as e:
                raise ProtocolError(f"malformed model ({e})", raw_model) from None
            terms: dict[Expr, int] = {}
            if script.apps:
                names = " ".join(script.defined[a] for a in script.apps)
                self._send(f"(get-value ({names}))\n")
                raw = self._read_reply(deadline)
                if raw.startswith("(error"):
                    raise ProtocolError("get-value failed", raw)
                try:
                    pairs = parse_sexprs(raw)[0]
                    by_name = {p[0]: parse_value(p[1]) for p in pairs}
                except (ValueError, IndexError, TypeError) as e:
                    raise ProtocolError(f"malformed get-value reply ({e})", raw) from None
                terms = {a: by_name[script.defined[a]] for a in script.apps}
            self._send("(pop 1)\n")
            model = {s: values.get(s, 0) for s in script.symbols}
            return SolverResult("sat", model, terms)
        except TimeoutError:
            self.close()
            return SolverResult("unknown", reason="solver timeout")
        except ProtocolError:
            self.close()
            raise
        except SolverError as e:
            self.close()
            return SolverResult("unknown", reason=str(e))


def check_reachability(
    constraints: Iterable,
    timeout: float = 30.0,
    solver: SmtProcess | Sequence[str] | str | None = None,
) -> SolverResult:
    """Decide whether all boolean-rooted ``constraints`` can hold together.

    Entries may be words or objects with a ``cond`` attribute. All-concrete
    sets never reach the solver.
    """
    conds = [getattr(c, "cond", c) for c in constraints]
    if all(isinstance(c, int) for c in conds):
        return SolverResult("sat" if all(c != 0 for c in conds) else "unsat")
    if any(isinstance(c, int) and c == 0 for c in conds):
        return SolverResult("unsat")
    script = Serializer()
    for c in conds:
        if isinstance(c, Expr):
            script.add(c)
    script.hash_axioms()
    if isinstance(solver, SmtProcess):
        return solver.check(script, timeout)
    with SmtProcess(solver) as proc:
        return proc.check(script, timeout)
