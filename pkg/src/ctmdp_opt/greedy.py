"""Exact greedy analysis.

Step probability vectors are indexed from zero: entry ``i`` is the
probability of having reached the goal within ``i`` discrete steps, so
entry 0 is the goal indicator.  Per-action vectors ``d_{l,a}`` use
next-step indexing (entry ``i`` pairs with ``shift(d_l)[i]``).

The supremum vectors are *lexicographic* optima.  They are computed one
entry at a time, and at each location only actions still tied with the
optimum on all earlier entries compete for the next one.  An entrywise
maximum would differ from the lexicographic supremum as soon as a
short-term loss buys a later gain.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Mapping, Optional

import mpmath

from .model import MIN, CtmdpModel, parse_rational
from .schedulers import Positional, Scheduler, SchedulerError

StepVector = tuple  # of Fractions


def shift(v) -> tuple:
    if len(v) < 2:
        raise ValueError("shift needs a vector of length >= 2")
    return tuple(v[1:])


def step_vector(model: CtmdpModel, scheduler: Scheduler, depth: int) -> dict[str, StepVector]:
    """Entries 0..depth of ``d_{l,S}`` for a positional scheduler."""
    P = model.embedded
    goal = model.goal
    choice = {}
    for lid in model.location_ids:
        if lid in goal:
            continue
        dec = scheduler.decision(lid, 0)
        if dec is None:
            raise SchedulerError(f"no decision for location {lid}")
        for a in dec:
            if (lid, a) not in P:
                raise SchedulerError(f"action {a!r} is not enabled at {lid}")
        choice[lid] = dec
    d = {lid: [Fraction(lid in goal)] for lid in model.location_ids}
    for i in range(depth):
        nxt = {}
        for lid in model.location_ids:
            if lid in goal:
                nxt[lid] = Fraction(1)
                continue
            nxt[lid] = sum(
                (w * p * d[t][i] for a, w in choice[lid].items() for t, p in P[(lid, a)].items()),
                Fraction(0),
            )
        for lid, v in nxt.items():
            d[lid].append(v)
    return {lid: tuple(v) for lid, v in d.items()}


def _lex_sweep(model: CtmdpModel, entries: int):
    """Lexicographically optimal vectors (``entries`` long) and the surviving action sets."""
    P = model.embedded
    goal = model.goal
    d = {lid: [Fraction(lid in goal)] for lid in model.location_ids}
    candidates = {lid: list(model.enabled(lid)) for lid in model.location_ids if lid not in goal}
    for i in range(entries - 1):
        nxt = {}
        for lid in model.location_ids:
            if lid in goal:
                nxt[lid] = Fraction(1)
                continue
            values = {a: sum((p * d[t][i] for t, p in P[(lid, a)].items()), Fraction(0)) for a in candidates[lid]}
            best = (min if model.player(lid) == MIN else max)(values.values())
            candidates[lid] = [a for a in candidates[lid] if values[a] == best]
            nxt[lid] = best
        for lid, v in nxt.items():
            d[lid].append(v)
    return {lid: tuple(v) for lid, v in d.items()}, candidates, P


def sup_step_vectors(model: CtmdpModel, depth: int) -> dict[str, StepVector]:
    """Entries 0..depth of the optimal step vectors (max or min per owner)."""
    d, _, _ = _lex_sweep(model, depth + 1)
    return d


@dataclass(frozen=True)
class GreedyAnalysis:
    depth: int
    sup_vectors: Mapping[str, StepVector]
    action_vectors: Mapping[tuple[str, str], StepVector]
    greedy_actions: Mapping[str, tuple[str, ...]]
    standard_greedy: Positional
    discriminator: Optional[Fraction]

    def advantage(self, lid: str, action: str, sign: int = 1) -> tuple:
        """``shift(d_l) - d_{l,a}``, negated for the minimiser."""
        opt = shift(self.sup_vectors[lid])
        return tuple(sign * (x - y) for x, y in zip(opt, self.action_vectors[(lid, action)]))


def default_depth(model: CtmdpModel) -> int:
    return max(1, len(model.locations) - 2)


def greedy_analysis(model: CtmdpModel, depth: int | None = None) -> GreedyAnalysis:
    """Greedy actions, standard greedy scheduler and discriminator.

    Comparisons use ``depth`` aligned entries beyond the first (default
    ``max(1, |L| - 2)``, which suffices for uniform models).
    """
    k = default_depth(model) if depth is None else depth
    d, candidates, P = _lex_sweep(model, k + 2)
    action_vectors = {}
    for lid in model.location_ids:
        for a in model.enabled(lid):
            action_vectors[(lid, a)] = tuple(
                sum((p * d[t][i] for t, p in P[(lid, a)].items()), Fraction(0)) for i in range(k + 1)
            )
    greedy = {}
    mu = None
    for lid in model.location_ids:
        if lid in model.goal:
            greedy[lid] = model.enabled(lid)
            continue
        greedy[lid] = tuple(candidates[lid])
        sign = -1 if model.player(lid) == MIN else 1
        opt = shift(d[lid])
        for a in model.enabled(lid):
            if a in candidates[lid]:
                continue
            gap = next(sign * (x - y) for x, y in zip(opt, action_vectors[(lid, a)]) if x != y)
            assert gap > 0, (lid, a)
            mu = gap if mu is None else min(mu, gap)
    standard = Positional({lid: acts[0] for lid, acts in greedy.items()})
    return GreedyAnalysis(k, d, action_vectors, greedy, standard, mu)


@dataclass(frozen=True)
class GreedBound:
    coarse: int
    refined: int


def greed_bound(lam, mu, t) -> GreedBound:
    """``coarse = ceil(2 lam t / mu)`` and ``refined = ceil(lam t (1 + mu) / mu)``.

    The refined bound works because the tail-to-mass ratio of the Poisson
    distribution at ``n`` is at most ``r / (1 - r)`` with ``r = lam t / (n + 1)``.
    """
    lam = parse_rational(lam, "lambda")
    t = parse_rational(t, "time")
    if mu is None:
        return GreedBound(0, 0)
    mu = parse_rational(mu, "mu")
    if not 0 < mu <= 1:
        raise ValueError("discriminator must lie in (0, 1]")
    if lam <= 0 or t < 0:
        raise ValueError("need lambda > 0 and t >= 0")
    return GreedBound(math.ceil(2 * lam * t / mu), math.ceil(lam * t * (1 + mu) / mu))


def _mpf(q) -> mpmath.mpf:
    q = parse_rational(q)
    return mpmath.mpf(q.numerator) / q.denominator


def check_greed_bound(lambda_t, mu, n: int, horizon: int | None = None) -> bool:
    """Whether ``mu * p(n) >= sum_{i>=1} p(n + i)`` for Poisson(lambda_t).

    Evaluated at 50 significant digits with a relative safety margin on
    both sides; the remainder beyond ``horizon`` is bounded geometrically.
    Since the tail-to-mass ratio decreases in ``n``, a true result also
    holds for every larger ``n``.
    """
    with mpmath.workdps(50):
        x = _mpf(lambda_t)
        m = _mpf(mu)
        if x == 0:
            return True
        if horizon is None:
            horizon = int(x) + 20 * int(mpmath.sqrt(x) + 1) + 50
        p_n = mpmath.exp(-x + n * mpmath.log(x) - mpmath.loggamma(n + 1))
        term = p_n
        tail = mpmath.mpf(0)
        for i in range(1, horizon + 1):
            term = term * x / (n + i)
            tail += term
        r = x / (n + horizon + 1)
        tail += term * r / (1 - r) if r < 1 else mpmath.inf
        margin = mpmath.mpf(10) ** -40
        return m * p_n * (1 - margin) >= tail * (1 + margin)
