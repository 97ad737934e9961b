from fractions import Fraction

import pytest

from ctmdp_opt.model import ModelError, TimeAbstractPath, example_model, make_model
from ctmdp_opt.schedulers import Positional
from ctmdp_opt.uniformise import is_uniform, lift_scheduler, prune, reachable, uniformise, vis_project

from corpus import B_A, corpus, general_corpus, uniform_corpus


@pytest.fixture(scope="module")
def fixture_u():
    return uniformise(example_model())


def test_fixture_rate_and_filler(fixture_u):
    u = fixture_u.uniform_model
    assert fixture_u.rate == 6
    assert is_uniform(u) == 6
    # l0 -a-> only has rate 2, so 4 goes to the unobservable copy
    assert u.rates[("l0", "a")] == {"l2": 2, "l0__u": 4}
    assert u.rates[("l0__u", "a")] == {"l2": 2, "l0__u": 4}
    assert u.rates[("l1", "b")] == {"l0": 6}


def test_copies_of_fast_locations_are_unreachable(fixture_u):
    seen = reachable(fixture_u.uniform_model)
    assert seen == {"l0", "l1", "l2", "l0__u"}
    pruned = prune(fixture_u.uniform_model)
    assert set(pruned.location_ids) == seen


def test_every_enabled_pair_is_uniform():
    for m in corpus():
        res = uniformise(m)
        u = res.uniform_model
        assert is_uniform(u) == m.max_exit_rate
        for lid in m.location_ids:
            assert u.enabled(lid) == m.enabled(lid)
            assert u.enabled(res.counterpart[lid]) == m.enabled(lid)
            assert u.player(res.counterpart[lid]) == m.player(lid)
            assert (res.counterpart[lid] in u.goal) == (lid in m.goal)


def test_uniform_model_gets_no_filler():
    for m in uniform_corpus(5, seed=3):
        res = uniformise(m)
        copies = set(res.counterpart.values())
        assert not any(tr.target in copies for tr in res.uniform_model.transitions)
        assert reachable(res.uniform_model) <= set(m.location_ids)


def test_reserved_suffix_clash():
    m = make_model(["x", "x__u"], ["a"], [("x", "a", "x__u", 1), ("x__u", "a", "x__u", 1)], {"x": 1}, goal=["x__u"])
    with pytest.raises(ModelError, match="reserved"):
        uniformise(m)


def test_vis_projection(fixture_u):
    p = (
        TimeAbstractPath("l0")
        .extend("a", "l0__u")
        .extend("a", "l0__u")
        .extend("b", "l1")
        .extend("a", "l1")
    )
    assert vis_project(p, fixture_u) == TimeAbstractPath("l0", (("b", "l1"), ("a", "l1")))
    assert vis_project(TimeAbstractPath("l0"), fixture_u) == TimeAbstractPath("l0")
    with pytest.raises(ModelError):
        vis_project(TimeAbstractPath("l0__u"), fixture_u)


def test_lifted_scheduler_acts_on_projection(fixture_u):
    from ctmdp_opt.schedulers import Counting

    s = Counting(({"l0": "a"}, {"l0": "b"}), B_A)
    lifted = lift_scheduler(s, fixture_u)
    p = TimeAbstractPath("l0").extend("a", "l0__u")
    # still at visible step 0 on the copy, so the first table entry applies
    assert lifted.decide(p) == {"a": Fraction(1)}
    assert lifted.decide(p.extend("a", "l0")) == {"b": Fraction(1)}
    assert lifted.decide(p.extend("a", "l0").extend("b", "l1")) == {"a": Fraction(1)}


def test_lifting_general_models_preserves_player_choices():
    for m in general_corpus(3, seed=5):
        res = uniformise(m)
        greedy = Positional({l: m.enabled(l)[0] for l in m.location_ids})
        lifted = lift_scheduler(greedy, res)
        for lid, copy in res.counterpart.items():
            assert lifted.decision(copy, 0) == lifted.decision(lid, 0)


def test_lifted_coin_is_redrawn_on_every_filler_step():
    # a coin between rate 2 and rate 6 keeps its draw for the whole sojourn
    # in the original model, but is redrawn at each uniformisation step
    import math

    from ctmdp_opt.reachability import evaluate_general, evaluate_uniform
    from ctmdp_opt.schedulers import Counting

    m = make_model(["x", "g"], ["a", "b"], [("x", "a", "g", 2), ("x", "b", "g", 6), ("g", "a", "g", 6)], {"x": 1}, goal=["g"])
    res = uniformise(m)
    coin = Counting(tuple({"x": {"a": Fraction(1, 2), "b": Fraction(1, 2)}} for _ in range(60)), Positional({"x": "a", "g": "a"}))
    direct = evaluate_general(m, coin, 1)
    lifted = evaluate_uniform(res, lift_scheduler(coin, res), 1)
    assert direct.mid == pytest.approx(1 - (math.exp(-2) + math.exp(-6)) / 2, abs=1e-9)
    assert lifted.mid == pytest.approx(1 - math.exp(-4), abs=1e-8)
