import pytest

from conftest import corpus_programs, random_programs
from karelsynth import dsl
from karelsynth.dsl import (Action, Cond, Program, ProgramSyntaxError, Repeat,
                            While, parse, to_text, to_tokens)


def test_minimal_program_parses():
    assert parse("DEF run m( move m)") == Program((Action(0),))


def test_while_program_from_listing():
    program = parse("DEF run m( WHILE c( frontIsClear c) w( move w) m)")
    assert program == Program((While(Cond(0), (Action(0),)),))


def test_missing_condition_errors_at_token_4():
    with pytest.raises(ProgramSyntaxError) as err:
        parse("DEF run m( WHILE move m)")
    assert err.value.index == 4


def test_print_minimal():
    assert to_text(Program((Action(0),))) == "DEF run m( move m)"


def test_print_repeat():
    program = Program((Repeat(2, (Action(0),)),))
    assert to_text(program) == "DEF run m( REPEAT R=2 r( move r) m)"


def test_roundtrip_on_fuzzed_asts():
    for program in random_programs(1000, seed=5):
        assert parse(to_text(program)) == program


def test_corpus_programs_roundtrip_verbatim():
    corpus = corpus_programs()
    assert len(corpus) >= 10
    for name, text in corpus.items():
        assert to_text(parse(text)) == text, name


def test_unknown_token_reports_position():
    with pytest.raises(ProgramSyntaxError) as err:
        parse("DEF run m( fly m)")
    assert err.value.index == 3


def test_trailing_tokens_rejected():
    with pytest.raises(ProgramSyntaxError):
        parse("DEF run m( move m) move")


def test_empty_body_rejected():
    with pytest.raises(ProgramSyntaxError):
        parse("DEF run m( m)")
    with pytest.raises(ProgramSyntaxError):
        parse("DEF run m( WHILE c( frontIsClear c) w( w) m)")


def test_negated_condition_roundtrip():
    text = "DEF run m( WHILE c( not c( frontIsClear c) c) w( turnLeft w) m)"
    assert to_text(parse(text)) == text


def test_vocabulary_is_closed_and_stable():
    # the first three indices are network control symbols
    assert dsl.VOCAB[:3] == ("<pad>", "<s>", "</s>")
    assert dsl.VOCAB_SIZE == len(set(dsl.VOCAB))
    assert dsl.TOKEN_INDEX["DEF"] == 3
    assert all(dsl.TOKEN_INDEX[f"R={n}"] == dsl.TOKEN_INDEX["R=0"] + n
               for n in range(20))


def test_construct_depth():
    program = parse("DEF run m( WHILE c( frontIsClear c) w( IF c( markersPresent c)"
                    " i( REPEAT R=2 r( move r) i) w) m)")
    assert dsl.construct_depth(program) == 3


def test_token_spans_cover_statements():
    text = "DEF run m( turnLeft WHILE c( frontIsClear c) w( move putMarker w) m)"
    program = parse(text)
    tokens = text.split()
    spans = dsl.token_spans(program)
    # statements in preorder: turnLeft, while, move, putMarker
    assert tokens[slice(*spans[0])] == ["turnLeft"]
    assert tokens[spans[1][0]] == "WHILE"
    assert tokens[slice(*spans[2])] == ["move"]
    assert tokens[slice(*spans[3])] == ["putMarker"]
    # construct spans include their closer
    assert tokens[spans[1][1] - 1] == "w)"


def test_token_spans_align_for_fuzzed_programs():
    for program in random_programs(100, seed=9):
        tokens = to_tokens(program)
        spans = dsl.token_spans(program)
        stmts = list(dsl.iter_statements(program))
        assert len(spans) == len(stmts)
        for (start, end), stmt in zip(spans, stmts):
            assert 0 <= start < end <= len(tokens)
            head = tokens[start]
            if isinstance(stmt, Action):
                assert head == dsl.ACTIONS[stmt.action]
            else:
                assert head in ("WHILE", "REPEAT", "IF", "IFELSE")
