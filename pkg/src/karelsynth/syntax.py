"""Grammar automaton for syntax-constrained token generation.

Tracks exactly the set of valid program prefixes under the DSL grammar, a
construct-nesting limit, and a total token budget, and exposes the set of
legal next tokens at each step as an additive logit mask (0 legal, -inf
illegal). The automaton is a predictive LL(1) pushdown: the state carries
the pending symbol stack, and a token is legal iff it is derivable from the
top of the stack *and* the minimal completion of the resulting stack still
fits in the remaining token budget. The budget rule is what forces closers
near the length cap and guarantees generation can never dead-end.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .dsl import (
    ACTIONS,
    END,
    PAD,
    PERCEPTIONS,
    REPEAT_MAX,
    TOKEN_INDEX,
    VOCAB,
    VOCAB_SIZE,
)

MAX_PROGRAM_TOKENS = 45  # decoder output cap; dataset programs are <= 44
MAX_CONSTRUCT_DEPTH = 4

# Stack symbols. Strings not in this set are terminals (literal tokens).
STMT = "<STMT>"
TAIL = "<TAIL>"  # zero or more further statements
COND = "<COND>"
PCPT = "<PCPT>"
RNUM = "<RNUM>"
DEDENT = "<DEDENT>"  # closes one construct-depth level
EOS = "</s>"

_ACTION_SET = frozenset(ACTIONS)
_PERCEPT_SET = frozenset(PERCEPTIONS)
_RNUM_SET = frozenset(f"R={n}" for n in range(REPEAT_MAX + 1))
_CONSTRUCT_OPENERS = frozenset({"WHILE", "REPEAT", "IF", "IFELSE"})

# Construct expansions, in the order their symbols must be consumed.
_EXPANSIONS = {
    "WHILE": ("WHILE", "c(", COND, "c)", "w(", STMT, TAIL, "w)", DEDENT),
    "REPEAT": ("REPEAT", RNUM, "r(", STMT, TAIL, "r)", DEDENT),
    "IF": ("IF", "c(", COND, "c)", "i(", STMT, TAIL, "i)", DEDENT),
    "IFELSE": (
        "IFELSE", "c(", COND, "c)", "i(", STMT, TAIL, "i)",
        "ELSE", "e(", STMT, TAIL, "e)", DEDENT,
    ),
}

# Minimal number of program tokens needed to discharge one stack symbol.
_MIN_LEN = {STMT: 1, TAIL: 0, COND: 1, PCPT: 1, RNUM: 1, DEDENT: 0, EOS: 0}


@dataclass(frozen=True)
class MaskState:
    """Immutable automaton state; `stack` is pending symbols, top last."""

    stack: tuple[str, ...]
    emitted: int  # program tokens consumed so far
    depth: int  # currently open constructs
    max_tokens: int
    max_depth: int

    @property
    def complete(self) -> bool:
        """True once the closing `m)` has been consumed (only EOS left)."""
        return self.stack == (EOS,)

    @property
    def done(self) -> bool:
        return not self.stack


def mask_init(
    max_tokens: int = MAX_PROGRAM_TOKENS, max_depth: int = MAX_CONSTRUCT_DEPTH
) -> MaskState:
    stack = (EOS, "m)", TAIL, STMT, "m(", "run", "DEF")
    return MaskState(stack, 0, 0, max_tokens, max_depth)


def _min_completion(stack: tuple[str, ...]) -> int:
    return sum(_MIN_LEN.get(sym, 1) for sym in stack)


@lru_cache(maxsize=1 << 18)
def _consume(state: MaskState, token: str) -> MaskState | None:
    """Advance the automaton by one token, or None if the token is illegal."""
    if state.done:
        return state if token == VOCAB[PAD] else None
    stack = list(state.stack)
    depth = state.depth
    while True:
        top = stack.pop()
        if top == DEDENT:
            depth -= 1
            continue
        if top == TAIL:
            in_stmt = token in _ACTION_SET or (
                token in _CONSTRUCT_OPENERS and depth < state.max_depth
            )
            if in_stmt:
                stack.append(TAIL)
                stack.append(STMT)
                continue
            continue  # epsilon: fall through to whatever follows the body
        if top == STMT:
            if token in _ACTION_SET:
                stack.append(token)
                continue
            if token in _CONSTRUCT_OPENERS and depth < state.max_depth:
                depth += 1
                stack.extend(reversed(_EXPANSIONS[token]))
                continue
            return None
        if top == COND:
            if token in _PERCEPT_SET:
                stack.append(token)
                continue
            if token == "not":
                stack.extend(reversed(("not", "c(", PCPT, "c)")))
                continue
            return None
        if top == PCPT:
            if token in _PERCEPT_SET:
                stack.append(token)
                continue
            return None
        if top == RNUM:
            if token in _RNUM_SET:
                stack.append(token)
                continue
            return None
        # Terminal symbol: must match exactly.
        if top != token:
            return None
        emitted = state.emitted + (0 if top == EOS else 1)
        new_stack = tuple(stack)
        if _min_completion(new_stack) > state.max_tokens - emitted:
            return None
        return MaskState(new_stack, emitted, depth, state.max_tokens, state.max_depth)


def mask_step(state: MaskState, token: str) -> MaskState:
    """Consume one token; raises ValueError on an illegal transition."""
    nxt = _consume(state, token)
    if nxt is None:
        raise ValueError(f"illegal token {token!r} after {state.emitted} tokens")
    return nxt


@lru_cache(maxsize=1 << 18)
def legal_token_ids(state: MaskState) -> frozenset[int]:
    """Indices of every token the automaton accepts from this state."""
    if state.done:
        return frozenset({PAD})
    if state.complete:
        return frozenset({END})
    legal = set()
    for idx, token in enumerate(VOCAB):
        if idx == PAD:
            continue
        if _consume(state, token) is not None:
            legal.add(idx)
    return frozenset(legal)


def legal_mask(state: MaskState) -> np.ndarray:
    """Additive logit mask over the vocabulary: 0 legal, -inf illegal."""
    mask = np.full(VOCAB_SIZE, -np.inf, dtype=np.float32)
    mask[list(legal_token_ids(state))] = 0.0
    return mask


def accepts(tokens: list[str], max_tokens: int = MAX_PROGRAM_TOKENS,
            max_depth: int = MAX_CONSTRUCT_DEPTH) -> bool:
    """True iff the full token sequence is accepted step by step."""
    state = mask_init(max_tokens, max_depth)
    for tok in tokens:
        if tok not in TOKEN_INDEX:
            return False
        nxt = _consume(state, tok)
        if nxt is None:
            return False
        state = nxt
    return state.complete
