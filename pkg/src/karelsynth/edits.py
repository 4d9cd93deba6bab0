"""Statement-level edit distance between programs.

Programs are linearized into a sequence of statement items: one item per
action, one header item per loop/conditional (carrying its condition or
repeat count), and one item for each else-branch. The distance is the unit
Levenshtein distance over these sequences, so wrapping existing statements
in a new loop costs one edit (the header is inserted, the body items are
unchanged), and changing only a construct's condition or repeat count is a
single substitution.
"""

from __future__ import annotations

from .dsl import Action, If, IfElse, Program, Repeat, Stmt, While

Item = tuple


def linearize(program: Program) -> list[Item]:
    items: list[Item] = []

    def walk(stmts: tuple[Stmt, ...]) -> None:
        for s in stmts:
            if isinstance(s, Action):
                items.append(("action", s.action))
            elif isinstance(s, While):
                items.append(("while", s.cond.perception, s.cond.negated))
                walk(s.body)
            elif isinstance(s, Repeat):
                items.append(("repeat", s.count))
                walk(s.body)
            elif isinstance(s, If):
                items.append(("if", s.cond.perception, s.cond.negated))
                walk(s.body)
            elif isinstance(s, IfElse):
                items.append(("ifelse", s.cond.perception, s.cond.negated))
                walk(s.then_body)
                items.append(("else",))
                walk(s.else_body)
            else:  # pragma: no cover
                raise TypeError(f"not a statement: {s!r}")

    walk(program.body)
    return items


def statement_edit_distance(a: Program, b: Program) -> int:
    """Minimum number of statement additions/removals/modifications."""
    xs, ys = linearize(a), linearize(b)
    if len(xs) < len(ys):
        xs, ys = ys, xs
    prev = list(range(len(ys) + 1))
    for i, x in enumerate(xs, start=1):
        cur = [i]
        for j, y in enumerate(ys, start=1):
            cost = 0 if x == y else 1
            cur.append(min(prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + cost))
        prev = cur
    return prev[-1]
