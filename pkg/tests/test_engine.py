from __future__ import annotations

import random

import pytest

from capsplit import (
    CENSORED,
    CapExceededError,
    CappedEngine,
    Corpus,
    CorpusProfile,
    CountResult,
    EngineConfig,
    EngineError,
    FieldKind,
    SetRef,
    evaluate,
    generate,
    parse,
)
from capsplit.query import And, Diff, Or

from helpers import brute_eval, make_record
from test_query import _random_ast, _walk


@pytest.fixture(scope="module")
def corpus():
    return generate(CorpusProfile(seed=21, n_records=1500, multi_title_prob=0.2))


@pytest.fixture()
def engine(corpus):
    return CappedEngine(corpus)


# -- counting ---------------------------------------------------------------


def test_visible_count_matches_oracles(corpus, engine):
    rng = random.Random(99)
    checked = 0
    for _ in range(200):
        ast = _random_ast(rng, rng.randint(0, 3))
        if any(n for n in _walk(ast) if type(n).__name__ == "SetRef"):
            continue
        expected = brute_eval(corpus, ast)
        assert engine.count(ast) == CountResult.exact(len(expected))
        assert evaluate(ast, corpus) == expected
        checked += 1
    assert checked > 120


def test_empty_corpus_counts_zero():
    engine = CappedEngine(Corpus(()))
    assert engine.count(parse("PY=2007 AND CU=USA")) == CountResult.exact(0)


def test_censored_count_never_reveals_cap_or_more(corpus):
    engine = CappedEngine(corpus, EngineConfig(cap=100, count_mode=CENSORED))
    for text in ("PY=2*", "SO=J*", "CU=USA", "SO=A* OR SO=B* OR SO=C*", "PY=1900"):
        result = engine.count(parse(text))
        true_n = len(brute_eval(corpus, parse(text)))
        if true_n >= 100:
            assert result == CountResult.at_least_cap()
        else:
            assert result == CountResult.exact(true_n)


def test_count_result_expect_exact():
    assert CountResult.exact(7).expect_exact() == 7
    with pytest.raises(EngineError, match="censored"):
        CountResult.at_least_cap().expect_exact()


def test_engine_config_validation():
    with pytest.raises(EngineError, match="cap"):
        EngineConfig(cap=0)
    with pytest.raises(EngineError, match="count_mode"):
        EngineConfig(count_mode="fuzzy")


# -- retrieval --------------------------------------------------------------


def test_retrieve_succeeds_iff_strictly_below_cap():
    records = tuple(make_record(f"R{i}", ("A REV",)) for i in range(7))
    corpus = Corpus(records)
    query = parse("SO=A*")
    assert len(CappedEngine(corpus, EngineConfig(cap=8)).retrieve(query)) == 7
    with pytest.raises(CapExceededError):
        CappedEngine(corpus, EngineConfig(cap=7)).retrieve(query)  # exactly cap
    with pytest.raises(CapExceededError):
        CappedEngine(corpus, EngineConfig(cap=5)).retrieve(query)


def test_retrieve_returns_matching_ids(corpus, engine):
    query = parse("PY=2007 AND SO=J*")
    assert engine.retrieve(query) == brute_eval(corpus, query)


def test_cap_exceeded_error_payload(corpus):
    query = parse("PY=2*")
    visible = CappedEngine(corpus, EngineConfig(cap=10))
    with pytest.raises(CapExceededError) as err:
        visible.retrieve(query)
    assert err.value.count == CountResult.exact(1500)
    censored = CappedEngine(corpus, EngineConfig(cap=10, count_mode=CENSORED))
    with pytest.raises(CapExceededError) as err:
        censored.retrieve(query)
    assert err.value.count == CountResult.at_least_cap()  # no exact leak


# -- registry ---------------------------------------------------------------


def test_register_then_count_by_reference(engine):
    query = parse("SO=A* OR SO=B*")
    count = engine.register(1, query)
    assert engine.count(parse("#1")) == count


def test_register_forward_reference_rejected(engine):
    engine.register(1, parse("SO=A*"))
    with pytest.raises(EngineError, match="forward reference"):
        engine.register(2, parse("#2 AND SO=B*"))
    with pytest.raises(EngineError, match="forward reference"):
        engine.register(2, parse("#3"))


def test_register_unbound_reference_rejected(engine):
    with pytest.raises(EngineError, match="unbound set reference #1"):
        engine.count(parse("#1"))
    engine.register(2, parse("SO=A*"))  # gap: #1 never defined
    with pytest.raises(EngineError, match="unbound set reference #1"):
        engine.register(3, parse("#1 AND #2"))


def test_register_overwrite_flag(engine):
    engine.register(1, parse("SO=A*"))
    with pytest.raises(EngineError, match="already registered"):
        engine.register(1, parse("SO=B*"))
    engine.register(1, parse("SO=B*"), overwrite=True)
    assert engine.count(SetRef(1)) == engine.count(parse("SO=B*"))


def test_register_stores_sets_at_or_above_cap(corpus):
    engine = CappedEngine(corpus, EngineConfig(cap=10))
    count = engine.register(1, parse("PY=2*"))
    assert count == CountResult.exact(1500)  # visible counts stay exact
    assert engine.count(SetRef(1)) == CountResult.exact(1500)
    with pytest.raises(CapExceededError):
        engine.retrieve(SetRef(1))  # materialization is still capped


def test_register_rejects_bad_numbers(engine):
    with pytest.raises(EngineError, match="positive"):
        engine.register(0, parse("SO=A*"))


def test_memo_does_not_stale_set_references(engine):
    engine.register(1, parse("SO=A*"))
    first = engine.count(parse("#1 AND PY=2*"))
    engine.register(1, parse("SO=A* OR SO=B*"), overwrite=True)
    second = engine.count(parse("#1 AND PY=2*"))
    assert second == engine.count(parse("(SO=A* OR SO=B*) AND PY=2*"))
    assert first != second or engine.count(parse("SO=B*")).value == 0


# -- prefix introspection ----------------------------------------------------


def test_prefix_children_basic():
    corpus = Corpus(
        (
            make_record("R1", ("JAMA",)),
            make_record("R2", ("JBC",)),
            make_record("R3", ("J",)),  # exact value contributes no child
        )
    )
    engine = CappedEngine(corpus)
    assert engine.prefix_children(FieldKind.SO, "J") == {"A", "B"}
    assert engine.prefix_children(FieldKind.SO, "") == {"J"}
    assert engine.prefix_children(FieldKind.SO, "Q") == set()


def test_prefix_children_tokenized_fields():
    corpus = Corpus(
        (make_record("R1", ("A REV",), countries=("NORTH IRELAND",),
                     addresses=("UCL LONDON",)),)
    )
    engine = CappedEngine(corpus)
    assert engine.prefix_children(FieldKind.CU, "NORTH") == {" "}
    assert engine.prefix_children(FieldKind.AD, "L") == {"O"}


def test_prefix_children_prefix_is_a_raw_position():
    corpus = Corpus((make_record("R1", ("JOURNAL OF X",)), make_record("R2", ("JOURNAL",))))
    engine = CappedEngine(corpus)
    assert engine.prefix_children(FieldKind.SO, "JOURNAL") == {" "}
    # a trailing space is a legitimate position and must not be collapsed
    assert engine.prefix_children(FieldKind.SO, "JOURNAL ") == {"O"}
    assert engine.prefix_children(FieldKind.SO, "journal ") == {"O"}


def test_prefix_children_rejects_py(engine):
    with pytest.raises(EngineError, match="PY"):
        engine.prefix_children(FieldKind.PY, "2")


# -- shared-result hygiene ----------------------------------------------------


def test_evaluation_results_are_stable_across_reuse(corpus, engine):
    # repeated mixed use must not corrupt shared postings or memo entries
    q1, q2 = parse("SO=A*"), parse("SO=A* AND PY=2007")
    a1 = engine.count(q1)
    engine.count(Diff(q1, q2))
    engine.count(Or(q1, q2))
    engine.count(And(q1, q2))
    assert engine.count(q1) == a1
    assert engine.retrieve(q2) == brute_eval(corpus, q2)
