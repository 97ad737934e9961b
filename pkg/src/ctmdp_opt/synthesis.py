"""Optimal scheduler and strategy synthesis.

Optimal time-abstract schedulers can be taken to follow the standard
greedy scheduler once the step count reaches the greed bound.  Synthesis
therefore only has to choose a finite preamble: by backward induction for
uniform models, or by exhaustive enumeration of preamble tables otherwise.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional

import numpy as np

from .greedy import GreedBound, greed_bound, greedy_analysis
from .model import MIN, CtmdpModel, parse_rational
from .reachability import EPS, ValueInterval, evaluate_general, evaluate_uniform, poisson_weights
from .schedulers import Counting, Positional, Scheduler, StrategyPair, split_strategies
from .uniformise import is_uniform, uniformise

DEFAULT_BUDGET = 10**7
TIE_TOL = 64 * EPS


class BudgetExceeded(ValueError):
    pass


@dataclass(frozen=True)
class SynthesisResult:
    scheduler: Scheduler
    value: ValueInterval
    method: str
    preamble_depth: int
    greed_bound_used: GreedBound
    ties: tuple = ()
    candidates: int = 1
    complete: bool = True

    @property
    def combined(self) -> Counting:
        s = self.scheduler
        if isinstance(s, StrategyPair):
            from .schedulers import combine

            return combine(s)
        return s


def greedy_tail(scheduler: Scheduler, n: int, greedy: Positional) -> Counting:
    """Follow ``scheduler`` for steps ``< n`` and ``greedy`` from step ``n`` on."""
    tables = []
    for i in range(n):
        table = {}
        for lid in greedy.choice:
            dec = scheduler.decision(lid, i)
            if dec is None:
                continue
            table[lid] = next(iter(dec)) if len(dec) == 1 else dict(dec)
        tables.append(table)
    return Counting(tuple(tables), greedy)


def _evaluator(model: CtmdpModel):
    """Evaluation route and standard greedy tail for ``model``."""
    lam = is_uniform(model)
    if lam is not None:
        ga = greedy_analysis(model)
        return lam, ga, ga.standard_greedy, evaluate_uniform
    u = uniformise(model)
    ga = greedy_analysis(u.uniform_model)
    tail = Positional({lid: ga.standard_greedy[lid] for lid in model.location_ids})
    return u.rate, ga, tail, evaluate_general


def synth_uniform_dp(u, t, epsilon: float = 1e-9) -> SynthesisResult:
    """Backward induction over the step index on a uniform model or game.

    ``W(i, l)`` is the optimal probability of reaching the goal in time when
    standing in ``l`` after ``i`` steps; moving into the goal at step ``i+1``
    is worth ``Pr[N >= i+1]``.  Decisions from the refined greed bound on
    are the standard greedy ones; earlier ties go to the first action.
    """
    model = getattr(u, "uniform_model", u)
    lam = is_uniform(model)
    if lam is None:
        raise ValueError("model is not uniform")
    t = parse_rational(t, "time")
    ga = greedy_analysis(model)
    bound = greed_bound(lam, ga.discriminator, t)
    pw = poisson_weights(float(lam * t), epsilon)
    N = pw.n_max
    # g[i] = sum_{j >= i} w_j over the retained weights, g[N + 1] = 0
    g = np.append(np.cumsum(pw.weights[::-1])[::-1], 0.0)

    ids = model.location_ids
    L, A = len(ids), len(model.actions)
    R = model.dense_rates
    exit_rates = R.sum(axis=2)  # (A, L)
    enabled = exit_rates > 0
    with np.errstate(invalid="ignore", divide="ignore"):
        P = np.nan_to_num(R / exit_rates[:, :, None])
    goal = np.array([lid in model.goal for lid in ids])
    sign = np.array([-1.0 if model.player(lid) == MIN else 1.0 for lid in ids])
    greedy_idx = np.array([model.action_index[ga.standard_greedy[lid]] for lid in ids])
    cols = np.arange(L)

    pre_len = min(bound.refined, N + 1)
    choices = [None] * pre_len
    ties = []
    W = np.zeros(L)
    for i in range(N, -1, -1):
        v = np.where(goal, g[i + 1], W)
        Q = P @ v  # (A, L)
        if i >= bound.refined:
            act = greedy_idx
        else:
            scored = np.where(enabled, Q * sign, -np.inf)
            best = scored.max(axis=0)
            near = scored >= best - TIE_TOL
            act = np.argmax(near, axis=0)
            for li in np.nonzero((near.sum(axis=0) > 1) & ~goal)[0]:
                ties.append((i, ids[li], tuple(model.actions[a] for a in np.nonzero(near[:, li])[0])))
        W = Q[act, cols]
        if i < pre_len:
            choices[i] = act

    tables = tuple(
        {lid: model.actions[choices[i][li]] for li, lid in enumerate(ids) if lid not in model.goal}
        for i in range(pre_len)
    )
    scheduler = Counting(tables, ga.standard_greedy).normalized()
    value = evaluate_uniform(model, scheduler, t, epsilon)
    result_scheduler = split_strategies(model, scheduler) if model.is_game else scheduler
    return SynthesisResult(
        result_scheduler, value, "dp", scheduler.depth, bound, tuple(sorted(ties)), 1, True
    )


@dataclass
class _Slots:
    """Choice slots ``(step, location)`` of one player and their options."""

    slots: list = field(default_factory=list)
    options: list = field(default_factory=list)

    def count(self) -> int:
        return math.prod(len(o) for o in self.options)

    def tables(self):
        for combo in itertools.product(*self.options):
            yield dict(zip(self.slots, combo))


def _slots(model: CtmdpModel, preamble: int, player: Optional[str]) -> _Slots:
    out = _Slots()
    for i in range(preamble):
        for lid in model.location_ids:
            if lid in model.goal or (player is not None and model.player(lid) != player):
                continue
            acts = model.enabled(lid)
            if len(acts) > 1:
                out.slots.append((i, lid))
                out.options.append(acts)
    return out


def _assemble(preamble: int, tail: Positional, *choices: dict) -> Counting:
    tables = [dict() for _ in range(preamble)]
    for choice in choices:
        for (i, lid), a in choice.items():
            tables[i][lid] = a
    return Counting(tuple(tables), tail)


def _max_preamble(model: CtmdpModel, budget: int, limit: int) -> int:
    n = 0
    while n < limit and _slots(model, n + 1, None).count() <= budget:
        n += 1
    return n


def _payoff(model, t, epsilon, preamble, budget):
    lam, ga, tail, evaluate = _evaluator(model)
    game = model.is_game
    max_slots = _slots(model, preamble, None if not game else "max")
    min_slots = _slots(model, preamble, MIN) if game else _Slots()
    total = max_slots.count() * min_slots.count()
    if total > budget:
        raise BudgetExceeded(f"{total} candidate tables exceed the budget of {budget}")
    max_tables = list(max_slots.tables())
    min_tables = list(min_slots.tables())
    values = [
        [evaluate(model, _assemble(preamble, tail, mx, mn), t, epsilon) for mn in min_tables]
        for mx in max_tables
    ]
    return lam, ga, tail, max_tables, min_tables, values


def synth_enumerate(model: CtmdpModel, t, epsilon: float = 1e-9, preamble: int | None = None,
                    budget: int = DEFAULT_BUDGET) -> SynthesisResult:
    """Best greedy-tailed deterministic preamble table of the given length.

    Candidates are enumerated in a canonical order (step, then location,
    then action order).  For games the result realises max over Max tables
    of min over Min tables.  Among candidates within ``2 * epsilon`` of the
    optimum the earliest one is returned; the others are reported as ties.
    Without an explicit ``preamble`` the refined greed bound of the
    uniformisation is used, cut down to fit the budget.  ``complete`` tells
    whether the preamble reaches that bound.
    """
    t = parse_rational(t, "time")
    lam, ga, _, _ = _evaluator(model)
    bound = greed_bound(lam, ga.discriminator, t)
    if preamble is None:
        preamble = _max_preamble(model, budget, bound.refined)
    complete = preamble >= bound.refined
    lam, ga, tail, max_tables, min_tables, values = _payoff(model, t, epsilon, preamble, budget)

    guaranteed = [min(row, key=lambda v: v.mid).mid for row in values]
    best = max(guaranteed)
    tied = [i for i, g in enumerate(guaranteed) if g >= best - 2 * epsilon]
    i_star = tied[0]
    row = values[i_star]
    worst = min(v.mid for v in row)
    j_star = next(j for j, v in enumerate(row) if v.mid <= worst + 2 * epsilon)
    chosen = _assemble(preamble, tail, max_tables[i_star], min_tables[j_star])
    ties = tuple(_assemble(preamble, tail, max_tables[i], min_tables[j_star]) for i in tied[1:])
    scheduler = split_strategies(model, chosen) if model.is_game else chosen
    return SynthesisResult(
        scheduler, row[j_star], "enumerate", preamble, bound, ties,
        len(max_tables) * len(min_tables), complete,
    )


@dataclass(frozen=True)
class SaddleReport:
    sup_inf: ValueInterval
    inf_sup: ValueInterval

    @property
    def gap(self) -> float:
        return abs(self.sup_inf.mid - self.inf_sup.mid)


def check_saddle(game: CtmdpModel, t, preamble: int, epsilon: float = 1e-9,
                 budget: int = DEFAULT_BUDGET) -> SaddleReport:
    """Both orders of optimisation over greedy-tailed preamble tables."""
    *_, values = _payoff(game, parse_rational(t, "time"), epsilon, preamble, budget)
    sup_inf = max((min(row, key=lambda v: v.mid) for row in values), key=lambda v: v.mid)
    columns = list(zip(*values))
    inf_sup = min((max(col, key=lambda v: v.mid) for col in columns), key=lambda v: v.mid)
    return SaddleReport(sup_inf, inf_sup)


def determinise(model: CtmdpModel, scheduler: Counting, t, epsilon: float = 1e-9) -> Counting:
    """Replace randomised decisions one by one with their best pure choice.

    Decisions are visited by increasing step, then location order; each is
    replaced by the pure action with the best evaluated value for the
    location's owner (first action on ties).  The order changes which
    optimum is returned, not its quality.
    """
    if not scheduler.randomized:
        return scheduler
    evaluate = evaluate_uniform if is_uniform(model) is not None else evaluate_general
    tables = [dict(table) for table in scheduler.preamble]
    for i, table in enumerate(tables):
        for lid in model.location_ids:
            entry = table.get(lid)
            if entry is None or isinstance(entry, str):
                continue
            sign = -1 if model.player(lid) == MIN else 1
            best_a, best_v = None, -math.inf
            for a in model.actions:
                if entry.get(a, 0) == 0:
                    continue
                table[lid] = a
                v = sign * evaluate(model, Counting(tuple(tables), scheduler.tail), t, epsilon).mid
                if v > best_v + TIE_TOL:
                    best_a, best_v = a, v
            table[lid] = best_a
    return Counting(tuple(tables), scheduler.tail)


def randomize_weights(entry: dict) -> dict:
    """Normalise nonnegative weights into an exact distribution."""
    total = sum(Fraction(w) for w in entry.values())
    return {a: Fraction(w) / total for a, w in entry.items() if w}
