from fractions import Fraction

import pytest

from ctmdp_opt.model import (
    MIN,
    ModelError,
    TimeAbstractPath,
    absorb_goal,
    example_model,
    format_rational,
    make_model,
    model_to_dict,
    parse_model,
    parse_rational,
    serialize_model,
    validate,
)

from corpus import corpus


def test_fixture_shape():
    m = example_model()
    assert m.location_ids == ("l0", "l1", "l2")
    assert m.goal == {"l2"}
    assert m.actions == ("a", "b")
    assert m.max_exit_rate == 6
    assert m.exit_rate("l0", "a") == 2
    assert m.enabled("l2") == ("a",)
    assert m.initial == {"l0": 1}


def test_embedded_probabilities_are_rate_ratios():
    P = example_model().embedded
    assert P[("l0", "b")] == {"l2": Fraction(1, 2), "l1": Fraction(1, 2)}
    assert P[("l1", "a")] == {"l2": Fraction(1, 6), "l1": Fraction(5, 6)}
    for row in P.probabilities.values():
        assert sum(row.values()) == 1


@pytest.mark.parametrize("text,expected", [("3", 3), ("1/2", Fraction(1, 2)), ("0.25", Fraction(1, 4)), (0.1, Fraction(1, 10))])
def test_parse_rational(text, expected):
    assert parse_rational(text) == expected


@pytest.mark.parametrize("bad", ["abc", "1/0", None, True, [1]])
def test_parse_rational_rejects(bad):
    with pytest.raises(ModelError):
        parse_rational(bad)


def test_format_rational():
    assert format_rational(Fraction(1, 6)) == "1/6"
    assert format_rational(Fraction(72)) == "72"


def test_round_trip_preserves_model():
    for m in corpus():
        again = parse_model(serialize_model(m))
        assert model_to_dict(again) == model_to_dict(m)
        assert again.rates == m.rates


def test_players_document_field():
    doc = serialize_model(example_model()).replace('"actions"', '"players": {"l1": "min"}, "actions"', 1)
    m = parse_model(doc)
    assert m.player("l1") == MIN and m.player("l0") == "max"
    assert m.is_game


def test_syntax_error_reports_position():
    with pytest.raises(ModelError, match="line 1"):
        parse_model('{"name": ')


@pytest.mark.parametrize(
    "mutate,message",
    [
        (lambda d: d["transitions"].append({"from": "l0", "action": "a", "to": "l2", "rate": "1"}), "duplicate transition"),
        (lambda d: d["transitions"].__setitem__(0, {"from": "l0", "action": "a", "to": "l2", "rate": "-2"}), "negative rate"),
        (lambda d: d.__setitem__("initial", {"l0": "1/2"}), "initial mass"),
        (lambda d: d["transitions"].append({"from": "l2", "action": "b", "to": "l0", "rate": "1"}), "goal not absorbing"),
        (lambda d: d["transitions"].append({"from": "l0", "action": "c", "to": "l2", "rate": "1"}), "unknown action"),
    ],
)
def test_invalid_documents(mutate, message):
    import json

    doc = model_to_dict(example_model())
    mutate(doc)
    text = json.dumps(doc)
    with pytest.raises(ModelError, match=message):
        parse_model(text)


def test_missing_enabled_action():
    m = make_model(["x", "g"], ["a"], [("g", "a", "g", 1)], {"x": 1}, goal=["g"])
    assert "no enabled action at x" in validate(m)


def test_absorb_goal_is_idempotent():
    m = make_model(
        ["x", "g"], ["a", "b"],
        [("x", "a", "g", 2), ("g", "a", "x", 1), ("g", "b", "g", 3)],
        {"x": 1}, goal=["g"],
    )
    assert any("goal not absorbing" in p for p in validate(m))
    fixed = absorb_goal(m)
    assert validate(fixed) == []
    assert fixed.rates[("g", "a")] == {"g": 3}
    assert absorb_goal(fixed) == fixed


def test_time_abstract_paths():
    p = TimeAbstractPath("l0").extend("b", "l1").extend("a", "l2")
    assert len(p) == 2 and p.last == "l2"
    assert p.locations == ("l0", "l1", "l2")
    assert p.prefix(1) == TimeAbstractPath("l0", (("b", "l1"),))
    m = example_model()
    assert m.is_valid_path(p)
    assert not m.is_valid_path(TimeAbstractPath("l0").extend("a", "l1"))


def test_initial_goal_mass():
    m = make_model(["x", "g"], ["a"], [("x", "a", "g", 1), ("g", "a", "g", 1)], {"x": "1/3", "g": "2/3"}, goal=["g"])
    assert m.initial_goal_mass() == Fraction(2, 3)
