from fractions import Fraction

import pytest

from ctmdp_opt.model import MIN, TimeAbstractPath, example_model, with_players
from ctmdp_opt.schedulers import (
    Counting,
    HistoryDependent,
    Positional,
    SchedulerError,
    check_scheduler,
    combine,
    parse_scheduler,
    serialize_scheduler,
    split_strategies,
)

from corpus import B_A


def test_counting_uses_table_then_tail():
    s = Counting(({"l0": "a"}, {"l0": "a", "l1": "b"}), B_A)
    assert s.decision("l0", 0) == {"a": 1}
    assert s.decision("l1", 0) == {"a": 1}  # missing entry falls back to the tail
    assert s.decision("l1", 1) == {"b": 1}
    assert s.decision("l0", 2) == {"b": 1}
    assert s.decide(TimeAbstractPath("l0").extend("b", "l1")) == {"b": 1}


def test_empty_preamble_is_the_tail():
    s = Counting((), B_A)
    for lid in ("l0", "l1"):
        for c in range(4):
            assert s.decision(lid, c) == B_A.decision(lid, c)


def test_normalized_drops_redundant_suffix():
    s = Counting(({"l0": "a"}, {"l0": "b"}, {"l1": "a"}), B_A)
    assert s.normalized().preamble == ({"l0": "a"},)


def test_randomized_entries_are_exact():
    s = Counting(({"l0": {"a": "1/3", "b": "2/3"}},), B_A)
    assert s.randomized
    assert s.decision("l0", 0) == {"a": Fraction(1, 3), "b": Fraction(2, 3)}
    check_scheduler(example_model(), s)


@pytest.mark.parametrize(
    "sched,message",
    [
        (Positional({"l0": "c", "l1": "a"}), "not enabled"),
        (Positional({"l0": "a"}), "no decision"),
        (Counting(({"l0": {"a": "1/3", "b": "1/3"}},), B_A), "sum to 1"),
    ],
)
def test_check_scheduler_rejects(sched, message):
    with pytest.raises(SchedulerError, match=message):
        check_scheduler(example_model(), sched)


def test_history_dependent_falls_back():
    p = TimeAbstractPath("l0").extend("b", "l1")
    s = HistoryDependent({p: "b"}, B_A)
    assert s.decide(p) == {"b": 1}
    assert s.decide(TimeAbstractPath("l1")) == {"a": 1}
    assert s.counter is None


def test_document_round_trip():
    s = Counting(({"l0": "a", "l1": {"a": "1/2", "b": "1/2"}}, {"l0": "b"}), B_A)
    again = parse_scheduler(serialize_scheduler(s))
    assert again == s
    pos = parse_scheduler('{"type": "positional", "map": {"l0": "b", "l1": "a"}}')
    assert pos == Positional({"l0": "b", "l1": "a"})


@pytest.mark.parametrize(
    "doc",
    ['{"type": "weird"}', '{"type": "positional"}', '{"type": "counting", "preamble": 3}', "[1,", '{"type": "counting", "tail": {"l0": {"a": "1"}}}'],
)
def test_bad_documents(doc):
    with pytest.raises(SchedulerError):
        parse_scheduler(doc)


def test_split_and_combine_partition_by_player():
    game = with_players(example_model(), {"l1": MIN})
    s = Counting(({"l0": "a", "l1": "b"},), B_A)
    pair = split_strategies(game, s)
    assert set(pair.max_strategy.tail.choice) == {"l0", "l2"}
    assert set(pair.min_strategy.tail.choice) == {"l1"}
    assert pair.decision("l1", 0) == {"b": 1}
    merged = combine(pair)
    for lid in ("l0", "l1", "l2"):
        for c in range(3):
            assert merged.decision(lid, c) == s.decision(lid, c)
