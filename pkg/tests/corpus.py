"""Seeded random models, schedulers and independent reference computations."""

from __future__ import annotations

import itertools
import random
from fractions import Fraction

import mpmath
import numpy as np
from scipy.linalg import expm

from ctmdp_opt.model import MAX, MIN, CtmdpModel, example_model, make_model, with_players
from ctmdp_opt.schedulers import Counting, Positional

ALL_A = Positional({"l0": "a", "l1": "a", "l2": "a"})
A_B = Positional({"l0": "a", "l1": "b", "l2": "a"})
B_A = Positional({"l0": "b", "l1": "a", "l2": "a"})
ALL_B = Positional({"l0": "b", "l1": "b", "l2": "a"})


def _split(total: int, parts: int, rng: random.Random) -> list[int]:
    """``total`` as ``parts`` positive integers."""
    cuts = sorted(rng.sample(range(1, total), parts - 1)) if parts > 1 else []
    bounds = [0] + cuts + [total]
    return [b - a for a, b in zip(bounds, bounds[1:])]


def random_model(seed: int, n_locations: int = 4, n_actions: int = 2, uniform: bool = True,
                 game: bool = False, lam: int = 6) -> CtmdpModel:
    """Last location is the absorbing goal; the first one carries the initial mass."""
    rng = random.Random(seed)
    ids = [f"s{i}" for i in range(n_locations)]
    goal = ids[-1]
    acts = [chr(ord("a") + k) for k in range(n_actions)]
    trs = []
    for lid in ids[:-1]:
        enabled = [a for a in acts if rng.random() < 0.8] or [rng.choice(acts)]
        for a in enabled:
            total = lam if uniform else rng.randint(1, lam)
            k = rng.randint(1, min(3, total, len(ids)))
            targets = rng.sample(ids, k)
            for target, rate in zip(targets, _split(total, k, rng)):
                trs.append((lid, a, target, rate))
    trs.append((goal, acts[0], goal, lam))
    players = {}
    if game:
        players = {lid: rng.choice((MAX, MIN)) for lid in ids[:-1]}
        if MIN not in players.values():
            players[ids[0]] = MIN
    return make_model(ids, acts, trs, {ids[0]: 1}, goal=[goal], players=players, name=f"random-{seed}")


def uniform_corpus(count: int, seed: int = 0, max_locations: int = 5, max_actions: int = 3) -> list[CtmdpModel]:
    rng = random.Random(seed)
    return [
        random_model(rng.randrange(1 << 30), rng.randint(2, max_locations), rng.randint(1, max_actions))
        for _ in range(count)
    ]


def general_corpus(count: int, seed: int = 0, max_locations: int = 5, max_actions: int = 3) -> list[CtmdpModel]:
    rng = random.Random(seed)
    return [
        random_model(rng.randrange(1 << 30), rng.randint(2, max_locations), rng.randint(1, max_actions), uniform=False)
        for _ in range(count)
    ]


def game_corpus(count: int, seed: int = 0) -> list[CtmdpModel]:
    rng = random.Random(seed)
    return [random_model(rng.randrange(1 << 30), rng.randint(3, 4), 2, game=True) for _ in range(count)]


def corpus() -> list[CtmdpModel]:
    """The fixture, its game variant and a few seeded random models."""
    m = example_model()
    return [m, with_players(m, {"l1": MIN})] + uniform_corpus(4, seed=11) + general_corpus(4, seed=12)


def random_counting(model: CtmdpModel, depth: int, rng: random.Random, randomized: bool = False,
                    tail: Positional | None = None) -> Counting:
    def entry(lid):
        acts = model.enabled(lid)
        if not randomized or len(acts) == 1:
            return rng.choice(acts)
        weights = [rng.randint(0, 4) for _ in acts]
        if sum(weights) == 0:
            weights[0] = 1
        return {a: Fraction(w, sum(weights)) for a, w in zip(acts, weights) if w}

    tables = tuple({lid: entry(lid) for lid in model.location_ids if lid not in model.goal} for _ in range(depth))
    if tail is None:
        tail = Positional({lid: rng.choice(model.enabled(lid)) for lid in model.location_ids})
    return Counting(tables, tail)


# -- reference computations ------------------------------------------------------------

def forward_step_vector(model: CtmdpModel, choice: dict, start: str, depth: int) -> tuple:
    """Reach-within-i-steps probabilities by pushing exact mass forward from ``start``.

    Mass that enters the goal is banked, so entry ``i`` is the total mass
    of paths that hit the goal in at most ``i`` steps.
    """
    out = []
    banked = Fraction(0)
    mass = {start: Fraction(1)}
    for _ in range(depth + 1):
        for lid in [l for l in mass if l in model.goal]:
            banked += mass.pop(lid)
        out.append(banked)
        nxt: dict = {}
        for here, p in mass.items():
            row = model.rates[(here, choice[here])]
            exit_rate = sum(row.values())
            for target, rate in row.items():
                nxt[target] = nxt.get(target, Fraction(0)) + p * rate / exit_rate
        mass = nxt
    return tuple(out)


def brute_force_lex_optimum(model: CtmdpModel, start: str, depth: int, minimise: bool = False) -> tuple:
    """Lexicographic optimum over all positional schedulers by enumeration."""
    free = [l for l in model.location_ids if l not in model.goal]
    best = None
    for combo in itertools.product(*(model.enabled(l) for l in free)):
        v = forward_step_vector(model, dict(zip(free, combo)), start, depth)
        if best is None or (v < best if minimise else v > best):
            best = v
    return best


def poisson_mp(k: int, lt) -> mpmath.mpf:
    lt = mpmath.mpf(lt)
    return mpmath.exp(-lt + k * mpmath.log(lt) - mpmath.loggamma(k + 1)) if lt > 0 else mpmath.mpf(k == 0)


def poisson_tail_mp(i: int, lt) -> mpmath.mpf:
    """``Pr[Poisson(lt) >= i]`` via the regularised incomplete gamma function."""
    if i <= 0:
        return mpmath.mpf(1)
    return mpmath.gammainc(i, 0, lt, regularized=True)


def ctmc_value(model: CtmdpModel, scheduler, t: float, steps_cap: int) -> float:
    """Reachability via a matrix exponential of the induced CTMC on (location, min(steps, cap)).

    Only deterministic or randomised counting schedulers; randomisation is
    resolved once per visit, so the action becomes part of the state.
    """
    index = {}
    for lid in model.location_ids:
        for c in range(steps_cap + 1):
            for a in model.enabled(lid):
                index[(lid, c, a)] = len(index)
    n = len(index)
    Q = np.zeros((n, n))
    goal = np.zeros(n, dtype=bool)

    def dist(lid, c):
        if lid in model.goal:
            return {model.enabled(lid)[0]: 1.0}
        return {a: float(w) for a, w in scheduler.decision(lid, c).items()}

    for (lid, c, a), s in index.items():
        if lid in model.goal:
            goal[s] = True
            continue
        c2 = min(c + 1, steps_cap)
        for target, rate in model.rates[(lid, a)].items():
            for a2, w in dist(target, c2).items():
                Q[s, index[(target, c2, a2)]] += float(rate) * w
            Q[s, s] -= float(rate)
    x0 = np.zeros(n)
    for lid, p in model.initial.items():
        for a, w in dist(lid, 0).items():
            x0[index[(lid, 0, a)]] += float(p) * w
    return float((x0 @ expm(Q * t))[goal].sum())


def hd_tree_optimum(model: CtmdpModel, lam: Fraction, t: Fraction, tail: Positional, depth: int) -> float:
    """Best history-dependent decisions for the first ``depth`` steps, then ``tail``.

    Every history node of the decision tree picks its action independently,
    which equals the maximum over all history-dependent tables of that depth.
    """
    lt = mpmath.mpf(lam.numerator) / lam.denominator * mpmath.mpf(t.numerator) / t.denominator
    horizon = int(lt + 40 * mpmath.sqrt(lt + 1)) + 60

    tail_vectors = {
        lid: forward_step_vector(model, dict(tail.choice), lid, horizon) for lid in model.location_ids
    }

    def leaf(lid, k):
        d = tail_vectors[lid]
        return mpmath.fsum((d[j] - d[j - 1]) * poisson_tail_mp(k + j, lt) for j in range(1, len(d)) if d[j] != d[j - 1])

    def node(lid, k):
        if lid in model.goal:
            return poisson_tail_mp(k, lt)
        if k == depth:
            return leaf(lid, k)
        sign = -1 if model.player(lid) == MIN else 1
        vals = []
        for a in model.enabled(lid):
            row = model.rates[(lid, a)]
            exit_rate = sum(row.values())
            vals.append(mpmath.fsum(
                mpmath.mpf((rate / exit_rate).numerator) / (rate / exit_rate).denominator * node(target, k + 1)
                for target, rate in row.items()
            ))
        return max(vals, key=lambda v: sign * v)

    return float(mpmath.fsum(
        mpmath.mpf(p.numerator) / p.denominator * node(lid, 0) for lid, p in model.initial.items() if p
    ))
