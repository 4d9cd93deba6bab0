"""Program DSL: token vocabulary, AST, parser, and canonical printer.

Programs are flat token sequences in the wire format
``DEF run m( <statements> m)`` with single spaces between tokens. The
grammar is LL(1) over this vocabulary, so parsing is a straightforward
recursive descent and every parse error points at the first offending
token index.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator, Union

from .grid import ACTIONS

# --- vocabulary -------------------------------------------------------------

# Network control symbols occupy the first three indices so that padded
# batches can use index 0. The program tokens follow in a fixed order; this
# indexing is part of the checkpoint format and must stay stable.
PAD, START, END = 0, 1, 2
CONTROL_TOKENS = ("<pad>", "<s>", "</s>")

PERCEPTIONS = (
    "frontIsClear",
    "leftIsClear",
    "rightIsClear",
    "markersPresent",
    "noMarkersPresent",
)

REPEAT_MAX = 19  # repeat counts are literal tokens R=0 .. R=19

PROGRAM_TOKENS = (
    ("DEF", "run", "m(", "m)")
    + ACTIONS
    + ("WHILE", "REPEAT", "IF", "IFELSE", "ELSE", "not")
    + ("c(", "c)", "w(", "w)", "i(", "i)", "e(", "e)", "r(", "r)")
    + PERCEPTIONS
    + tuple(f"R={n}" for n in range(REPEAT_MAX + 1))
)

VOCAB: tuple[str, ...] = CONTROL_TOKENS + PROGRAM_TOKENS
TOKEN_INDEX: dict[str, int] = {t: i for i, t in enumerate(VOCAB)}
VOCAB_SIZE = len(VOCAB)

ACTION_TOKENS = frozenset(ACTIONS)
PERCEPTION_INDEX = {p: i for i, p in enumerate(PERCEPTIONS)}


def token_ids(tokens: list[str]) -> list[int]:
    return [TOKEN_INDEX[t] for t in tokens]


def tokens_from_ids(ids: list[int]) -> list[str]:
    return [VOCAB[i] for i in ids]


# --- AST --------------------------------------------------------------------


@dataclass(frozen=True)
class Cond:
    """A perception test, optionally negated."""

    perception: int  # index into PERCEPTIONS
    negated: bool = False


@dataclass(frozen=True)
class Action:
    action: int  # index into grid.ACTIONS


@dataclass(frozen=True)
class While:
    cond: Cond
    body: tuple["Stmt", ...]


@dataclass(frozen=True)
class Repeat:
    count: int  # 0..REPEAT_MAX
    body: tuple["Stmt", ...]


@dataclass(frozen=True)
class If:
    cond: Cond
    body: tuple["Stmt", ...]


@dataclass(frozen=True)
class IfElse:
    cond: Cond
    then_body: tuple["Stmt", ...]
    else_body: tuple["Stmt", ...]


Stmt = Union[Action, While, Repeat, If, IfElse]


@dataclass(frozen=True)
class Program:
    body: tuple[Stmt, ...]


def construct_depth(program: Program) -> int:
    """Deepest nesting of loop/conditional constructs in the program."""

    def depth(stmts: tuple[Stmt, ...]) -> int:
        best = 0
        for s in stmts:
            if isinstance(s, Action):
                continue
            if isinstance(s, IfElse):
                inner = max(depth(s.then_body), depth(s.else_body))
            else:
                inner = depth(s.body)
            best = max(best, 1 + inner)
        return best

    return depth(program.body)


def statement_count(program: Program) -> int:
    """Number of statements, counting construct headers once each."""
    n = 0
    for _ in iter_statements(program):
        n += 1
    return n


def iter_statements(program: Program) -> Iterator[Stmt]:
    """Preorder iteration over every statement in the program."""

    def walk(stmts: tuple[Stmt, ...]) -> Iterator[Stmt]:
        for s in stmts:
            yield s
            if isinstance(s, IfElse):
                yield from walk(s.then_body)
                yield from walk(s.else_body)
            elif not isinstance(s, Action):
                yield from walk(s.body)

    yield from walk(program.body)


# --- printer ----------------------------------------------------------------


def _cond_tokens(cond: Cond) -> list[str]:
    name = PERCEPTIONS[cond.perception]
    if cond.negated:
        return ["c(", "not", "c(", name, "c)", "c)"]
    return ["c(", name, "c)"]


def _stmt_tokens(stmt: Stmt) -> list[str]:
    if isinstance(stmt, Action):
        return [ACTIONS[stmt.action]]
    if isinstance(stmt, While):
        return ["WHILE"] + _cond_tokens(stmt.cond) + ["w("] + _body_tokens(stmt.body) + ["w)"]
    if isinstance(stmt, Repeat):
        return ["REPEAT", f"R={stmt.count}", "r("] + _body_tokens(stmt.body) + ["r)"]
    if isinstance(stmt, If):
        return ["IF"] + _cond_tokens(stmt.cond) + ["i("] + _body_tokens(stmt.body) + ["i)"]
    if isinstance(stmt, IfElse):
        return (
            ["IFELSE"] + _cond_tokens(stmt.cond)
            + ["i("] + _body_tokens(stmt.then_body) + ["i)"]
            + ["ELSE", "e("] + _body_tokens(stmt.else_body) + ["e)"]
        )
    raise TypeError(f"not a statement: {stmt!r}")


def _body_tokens(body: tuple[Stmt, ...]) -> list[str]:
    out: list[str] = []
    for s in body:
        out.extend(_stmt_tokens(s))
    return out


def to_tokens(program: Program) -> list[str]:
    """Canonical token sequence, including the DEF run m( ... m) frame."""
    return ["DEF", "run", "m("] + _body_tokens(program.body) + ["m)"]


def to_text(program: Program) -> str:
    """Single-line wire format: tokens joined by single spaces."""
    return " ".join(to_tokens(program))


def token_spans(program: Program) -> list[tuple[int, int]]:
    """Half-open token range of each statement, indexed by preorder id.

    Matches the statement numbering used in rollout node ids, so a
    rollout's per-action node id can be mapped back to the tokens that
    emitted it.
    """
    spans: list[tuple[int, int]] = []

    def walk(stmts: tuple[Stmt, ...], pos: int) -> int:
        for s in stmts:
            start = pos
            slot = len(spans)
            spans.append((start, start))  # patched after the subtree is sized
            if isinstance(s, Action):
                pos += 1
            elif isinstance(s, While):
                pos += 1 + len(_cond_tokens(s.cond)) + 1  # WHILE cond w(
                pos = walk(s.body, pos) + 1  # w)
            elif isinstance(s, Repeat):
                pos += 3  # REPEAT R=n r(
                pos = walk(s.body, pos) + 1  # r)
            elif isinstance(s, If):
                pos += 1 + len(_cond_tokens(s.cond)) + 1
                pos = walk(s.body, pos) + 1
            elif isinstance(s, IfElse):
                pos += 1 + len(_cond_tokens(s.cond)) + 1
                pos = walk(s.then_body, pos)
                pos += 3  # i) ELSE e(
                pos = walk(s.else_body, pos) + 1  # e)
            spans[slot] = (start, pos)
        return pos

    walk(program.body, 3)  # skip DEF run m(
    return spans


# --- parser -----------------------------------------------------------------


class ProgramSyntaxError(ValueError):
    """Parse failure; `index` is the first offending token position."""

    def __init__(self, index: int, message: str):
        super().__init__(f"token {index}: {message}")
        self.index = index
        self.reason = message


class _Parser:
    def __init__(self, tokens: list[str]):
        self.tokens = tokens
        self.pos = 0

    def peek(self) -> str | None:
        return self.tokens[self.pos] if self.pos < len(self.tokens) else None

    def fail(self, message: str) -> ProgramSyntaxError:
        return ProgramSyntaxError(self.pos, message)

    def expect(self, token: str) -> None:
        got = self.peek()
        if got != token:
            raise self.fail(f"expected {token!r}, found {got!r}")
        self.pos += 1

    def parse_program(self) -> Program:
        for tok in ("DEF", "run", "m("):
            self.expect(tok)
        body = self.parse_body("m)")
        self.expect("m)")
        if self.pos != len(self.tokens):
            raise self.fail("trailing tokens after program end")
        return Program(body)

    def parse_body(self, closer: str) -> tuple[Stmt, ...]:
        stmts: list[Stmt] = []
        while True:
            tok = self.peek()
            if tok == closer:
                if not stmts:
                    raise self.fail("empty statement block")
                return tuple(stmts)
            if tok is None:
                raise self.fail(f"unclosed block, expected {closer!r}")
            stmts.append(self.parse_stmt())

    def parse_stmt(self) -> Stmt:
        tok = self.peek()
        if tok in ACTION_TOKENS:
            self.pos += 1
            return Action(ACTIONS.index(tok))
        if tok == "WHILE":
            self.pos += 1
            cond = self.parse_cond_block()
            self.expect("w(")
            body = self.parse_body("w)")
            self.expect("w)")
            return While(cond, body)
        if tok == "REPEAT":
            self.pos += 1
            count = self.parse_repeat_count()
            self.expect("r(")
            body = self.parse_body("r)")
            self.expect("r)")
            return Repeat(count, body)
        if tok == "IF":
            self.pos += 1
            cond = self.parse_cond_block()
            self.expect("i(")
            body = self.parse_body("i)")
            self.expect("i)")
            return If(cond, body)
        if tok == "IFELSE":
            self.pos += 1
            cond = self.parse_cond_block()
            self.expect("i(")
            then_body = self.parse_body("i)")
            self.expect("i)")
            self.expect("ELSE")
            self.expect("e(")
            else_body = self.parse_body("e)")
            self.expect("e)")
            return IfElse(cond, then_body, else_body)
        raise self.fail(f"expected a statement, found {tok!r}")

    def parse_cond_block(self) -> Cond:
        self.expect("c(")
        tok = self.peek()
        if tok == "not":
            self.pos += 1
            self.expect("c(")
            cond = Cond(self.parse_perception(), negated=True)
            self.expect("c)")
        elif tok in PERCEPTION_INDEX:
            cond = Cond(self.parse_perception())
        else:
            raise self.fail(f"expected a perception or 'not', found {tok!r}")
        self.expect("c)")
        return cond

    def parse_perception(self) -> int:
        tok = self.peek()
        if tok not in PERCEPTION_INDEX:
            raise self.fail(f"expected a perception, found {tok!r}")
        self.pos += 1
        return PERCEPTION_INDEX[tok]

    def parse_repeat_count(self) -> int:
        tok = self.peek()
        if tok is None or not tok.startswith("R=") or tok not in TOKEN_INDEX:
            raise self.fail(f"expected a repeat count R=0..R={REPEAT_MAX}, found {tok!r}")
        self.pos += 1
        return int(tok[2:])


def parse_tokens(tokens: list[str]) -> Program:
    for i, tok in enumerate(tokens):
        if tok not in TOKEN_INDEX or tok in CONTROL_TOKENS:
            raise ProgramSyntaxError(i, f"unknown token {tok!r}")
    return _Parser(tokens).parse_program()


def parse(text: str) -> Program:
    """Parse wire-format program text into an AST."""
    return parse_tokens(text.split())
