import numpy as np
import pytest

from conftest import corpus_programs, random_programs
from karelsynth import dsl, syntax
from karelsynth.dsl import END, PAD, VOCAB, parse_tokens, to_tokens
from karelsynth.syntax import (MAX_PROGRAM_TOKENS, accepts, legal_mask,
                               legal_token_ids, mask_init, mask_step)


def feed(tokens, state=None):
    state = state or mask_init()
    for tok in tokens:
        state = mask_step(state, tok)
    return state


def legal_names(state):
    return {VOCAB[i] for i in legal_token_ids(state)}


def test_after_while_only_condition_opener():
    state = feed(["DEF", "run", "m(", "WHILE"])
    assert legal_names(state) == {"c("}


def test_initial_tokens_forced():
    assert legal_names(mask_init()) == {"DEF"}
    assert legal_names(feed(["DEF"])) == {"run"}
    assert legal_names(feed(["DEF", "run"])) == {"m("}


def test_empty_body_cannot_close():
    state = feed(["DEF", "run", "m("])
    assert "m)" not in legal_names(state)


def test_complete_program_ends():
    state = feed(["DEF", "run", "m(", "move", "m)"])
    assert state.complete
    assert legal_token_ids(state) == frozenset({END})
    done = mask_step(state, "</s>")
    assert done.done
    assert legal_token_ids(done) == frozenset({PAD})


def test_illegal_token_raises():
    state = feed(["DEF", "run", "m("])
    with pytest.raises(ValueError):
        mask_step(state, "m)")


def test_depth_limit_blocks_fifth_construct():
    prefix = ["DEF", "run", "m("]
    for opener in ("w(", "w(", "w(", "w("):
        prefix += ["WHILE", "c(", "frontIsClear", "c)", opener]
    state = feed(prefix)
    names = legal_names(state)
    assert "WHILE" not in names and "IF" not in names
    assert "move" in names


def test_mask_values_are_additive_log_domain():
    mask = legal_mask(feed(["DEF", "run", "m(", "WHILE"]))
    assert mask.shape == (dsl.VOCAB_SIZE,)
    assert mask[dsl.TOKEN_INDEX["c("]] == 0.0
    assert np.isneginf(mask[dsl.TOKEN_INDEX["move"]])


def test_budget_forces_closers_near_cap():
    # Fill with actions until only the while closer and m) fit.
    tokens = ["DEF", "run", "m(", "WHILE", "c(", "frontIsClear", "c)", "w("]
    filler = MAX_PROGRAM_TOKENS - len(tokens) - 2  # leave room for w) and m)
    tokens += ["move"] * filler
    state = feed(tokens)
    assert state.emitted == MAX_PROGRAM_TOKENS - 2
    assert legal_names(state) == {"w)"}
    state = mask_step(state, "w)")
    assert legal_names(state) == {"m)"}


def test_budget_blocks_unaffordable_constructs():
    tokens = ["DEF", "run", "m("]
    tokens += ["move"] * (MAX_PROGRAM_TOKENS - len(tokens) - 8)
    state = feed(tokens)  # 7 tokens of budget left
    names = legal_names(state)
    assert "WHILE" in names   # needs exactly 7 + closers... checked below
    assert "IFELSE" not in names  # needs 11 more
    # after opening the while, everything is forced down the minimal path
    state = feed(["WHILE", "c(", "frontIsClear", "c)", "w("], state)
    assert all(n in dsl.ACTIONS for n in legal_names(state))


def test_soundness_random_walks_parse():
    rng = np.random.default_rng(0)
    for _ in range(2000):
        state = mask_init()
        tokens = []
        while not state.complete:
            choices = sorted(legal_token_ids(state))
            tok = VOCAB[choices[rng.integers(len(choices))]]
            tokens.append(tok)
            state = mask_step(state, tok)
        program = parse_tokens(tokens)
        assert len(tokens) <= MAX_PROGRAM_TOKENS
        assert dsl.construct_depth(program) <= syntax.MAX_CONSTRUCT_DEPTH


def test_no_dead_ends_on_random_walks():
    rng = np.random.default_rng(7)
    for _ in range(500):
        state = mask_init()
        for _ in range(MAX_PROGRAM_TOKENS + 1):
            ids = legal_token_ids(state)
            assert ids, "reachable state with no legal token"
            if state.complete:
                break
            state = mask_step(state, VOCAB[sorted(ids)[rng.integers(len(ids))]])


def test_completeness_on_corpus():
    for name, text in corpus_programs().items():
        tokens = text.split()
        if len(tokens) <= MAX_PROGRAM_TOKENS:
            assert accepts(tokens), name


def test_completeness_on_fuzzed_valid_programs():
    for program in random_programs(500, seed=33):
        assert accepts(to_tokens(program))


def test_accepts_rejects_invalid():
    assert not accepts(["DEF", "run", "m(", "m)"])
    assert not accepts(["DEF", "run", "m(", "move"])  # unterminated
    assert not accepts(["move"])
