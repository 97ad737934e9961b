"""Certified numeric evaluation of time-bounded reachability.

Step probabilities are propagated forward and paired with truncated
Poisson weights.  The truncated tail is charged in full to the upper end
of the returned interval, and a rounding slack is subtracted from the
lower end and added to the upper end.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np
from scipy import sparse
from scipy.special import gammainc

from .model import CtmdpModel, TimeAbstractPath, parse_rational
from .schedulers import VISIBLE, Scheduler, SchedulerError, resolved_decision
from .uniformise import UniformisationResult, is_uniform

EPS = np.finfo(float).eps
WEIGHT_RTOL = 1e-12


@dataclass(frozen=True)
class PoissonWeights:
    lambda_t: float
    n_max: int
    weights: np.ndarray
    tail_bound: float

    def tail_from(self, i: int) -> float:
        """Upper bound on ``Pr[N >= i]``."""
        if i > self.n_max:
            return self.tail_bound
        return math.fsum(self.weights[i:]) * (1 + WEIGHT_RTOL) + self.tail_bound


@dataclass(frozen=True)
class ValueInterval:
    lo: float
    hi: float
    slack: float = 0.0

    @property
    def mid(self) -> float:
        return 0.5 * (self.lo + self.hi)

    @property
    def width(self) -> float:
        return self.hi - self.lo

    def __contains__(self, x) -> bool:
        return self.lo <= x <= self.hi

    def __str__(self) -> str:
        return f"[{self.lo!r}, {self.hi!r}]"


def poisson_weights(lambda_t, epsilon: float) -> PoissonWeights:
    """Poisson(lambda_t) probabilities ``w_0..w_{n_max}`` with ``tail < epsilon``.

    Unnormalised weights are grown from the mode outward through the ratio
    ``p(n+1)/p(n) = lambda_t/(n+1)`` and then normalised, which avoids
    overflow and keeps the relative error far below ``1e-12`` for
    ``lambda_t <= 1e4``.  The right end is carried far past ``n_max`` and
    closed with a geometric bound, so the tail is an upper bound.
    """
    if not epsilon > 0:
        raise ValueError("epsilon must be positive")
    x = float(lambda_t)
    if x < 0:
        raise ValueError("lambda_t must be nonnegative")
    if x == 0:
        return PoissonWeights(0.0, 0, np.ones(1), 0.0)
    mode = int(math.floor(x))
    span = mode + 40 * int(math.sqrt(x) + 1) + 60
    while True:
        up = np.cumprod(x / np.arange(mode + 1, span + 1, dtype=float))
        if up[-1] < 1e-40:
            break
        span *= 2
    down = np.cumprod(np.arange(mode, 0, -1, dtype=float) / x)  # u_{mode-1}, ..., u_0
    u = np.concatenate([down[::-1], [1.0], up])
    total = math.fsum(u)
    # geometric remainder after the last computed index
    r = x / (span + 1)
    remainder = u[-1] * r / (1 - r) / total
    w = u / total
    suffix = np.cumsum(w[::-1])[::-1]  # suffix[n] = sum_{j >= n} w_j
    tails = np.append(suffix[1:], 0.0) + remainder  # tails[n] = sum_{j > n}
    tails = tails * (1 + WEIGHT_RTOL) + 1e-300
    n_max = int(np.argmax(tails < epsilon))
    return PoissonWeights(x, n_max, w[: n_max + 1].copy(), float(tails[n_max]))


def _lambda_t(rate, t) -> float:
    return float(Fraction(rate) * parse_rational(t, "time"))


def _as_uniform(u) -> tuple[CtmdpModel, Fraction]:
    model = u.uniform_model if isinstance(u, UniformisationResult) else u
    lam = is_uniform(model)
    if lam is None:
        raise ValueError("model is not uniform")
    return model, lam


def _counter_scheduler(scheduler: Scheduler) -> Scheduler:
    if scheduler.counter is None:
        raise SchedulerError(f"{type(scheduler).__name__} is not a counting scheduler")
    return scheduler


def _product_chain(model: CtmdpModel, scheduler: Scheduler, cap: int):
    """The step chain on (location, counter) pairs, counter capped at ``cap``.

    Returns ``(entries, n_states, goal_states)`` where ``entries`` are
    ``(src, dst, Fraction)`` transition probabilities and state ``l + c*|L|``
    stands for location index ``l`` with counter ``c``.
    """
    P = model.embedded
    ids = model.location_ids
    L = len(ids)
    visible = scheduler.observable if scheduler.counter == VISIBLE else None
    entries = []
    goal_states = []
    for c in range(cap + 1):
        nxt = min(c + 1, cap)
        for li, lid in enumerate(ids):
            s = li + c * L
            if lid in model.goal:
                entries.append((s, s, Fraction(1)))
                goal_states.append(s)
                continue
            for a, w in resolved_decision(model, scheduler, lid, c).items():
                if (lid, a) not in P:
                    raise SchedulerError(f"action {a!r} is not enabled at {lid}")
                for target, p in P[(lid, a)].items():
                    c2 = nxt if visible is None or target in visible else c
                    entries.append((s, model.index[target] + c2 * L, w * p))
    return entries, L * (cap + 1), goal_states


def _initial_vector(model: CtmdpModel, n_states: int, exact: bool):
    x = [Fraction(0)] * n_states if exact else np.zeros(n_states)
    for lid, p in model.initial.items():
        x[model.index[lid]] += p if exact else float(p)
    return x


def _goal_mass_sequence(model, scheduler, n_max, exact=False):
    """``d_nu[0..n_max]`` for a counter-based scheduler on a uniform model."""
    cap = min(scheduler.depth, n_max)
    entries, n, goal_states = _product_chain(model, scheduler, cap)
    x = _initial_vector(model, n, exact)
    d = []
    if exact:
        rows: dict[int, list] = {}
        for s, t, p in entries:
            rows.setdefault(s, []).append((t, p))
        for i in range(n_max + 1):
            d.append(sum((x[s] for s in goal_states), Fraction(0)))
            if i == n_max or d[-1] == 1:
                break
            y = [Fraction(0)] * n
            for s, xs in enumerate(x):
                if xs:
                    for t, p in rows[s]:
                        y[t] += xs * p
            x = y
        d += [d[-1]] * (n_max + 1 - len(d))
        return [float(v) for v in d], 0
    src, dst, prob = zip(*entries)
    M = sparse.csr_matrix((np.array([float(p) for p in prob]), (dst, src)), shape=(n, n))
    goal_mask = np.zeros(n, dtype=bool)
    goal_mask[list(goal_states)] = True
    for i in range(n_max + 1):
        d.append(float(x[goal_mask].sum()))
        if i == n_max or x[~goal_mask].sum() == 0:
            break
        x = M @ x
    d += [d[-1]] * (n_max + 1 - len(d))
    degree = int(np.diff(M.tocsc().indptr).max()) if n else 1
    return d, degree + 2


def _interval(d, pw: PoissonWeights, nu_goal: float, op_factor: int) -> ValueInterval:
    lo = math.fsum(np.asarray(d) * pw.weights)
    slack = WEIGHT_RTOL * lo + (pw.n_max + 1) * op_factor * EPS + 1e-15
    lo_out = max(nu_goal, lo - slack, 0.0)
    hi_out = min(1.0, lo + pw.tail_bound + slack)
    return ValueInterval(float(lo_out), float(max(hi_out, lo_out)), float(slack))


def _degenerate(model: CtmdpModel, lambda_t: float):
    nu_goal = model.initial_goal_mass()
    if nu_goal == 1:
        return ValueInterval(1.0, 1.0)
    if lambda_t == 0:
        v = float(nu_goal)
        return ValueInterval(v, v)
    return None


def evaluate_uniform(u, scheduler: Scheduler, t, epsilon: float = 1e-9, *, exact: bool = False) -> ValueInterval:
    """Time-bounded reachability of a counting (or visible) scheduler on a uniform model."""
    model, lam = _as_uniform(u)
    scheduler = _counter_scheduler(scheduler)
    pw = poisson_weights(_lambda_t(lam, t), epsilon)
    done = _degenerate(model, pw.lambda_t)
    if done is not None:
        return done
    d, op_factor = _goal_mass_sequence(model, scheduler, pw.n_max, exact)
    return _interval(d, pw, float(model.initial_goal_mass()), op_factor)


def step_bounded(u, scheduler: Scheduler, t, k: int, epsilon: float = 1e-9, *, exact: bool = False) -> ValueInterval:
    """Probability to reach the goal within time ``t`` and at most ``k`` steps."""
    model, lam = _as_uniform(u)
    scheduler = _counter_scheduler(scheduler)
    pw = poisson_weights(_lambda_t(lam, t), epsilon)
    nu_goal = float(model.initial_goal_mass())
    if k == 0 or pw.lambda_t == 0 or nu_goal == 1:
        return ValueInterval(nu_goal, nu_goal)
    d, op_factor = _goal_mass_sequence(model, scheduler, min(k, pw.n_max), exact)
    d = [d[min(i, len(d) - 1)] for i in range(pw.n_max + 1)]
    return _interval(d, pw, nu_goal, op_factor)


def evaluate_general(model: CtmdpModel, scheduler: Scheduler, t, epsilon: float = 1e-9) -> ValueInterval:
    """Reachability on any model through the scheduler-induced CTMC.

    States are (location, min(steps, cap), chosen action); the action is
    fixed on entering a location, so randomised decisions stay exact.  The
    chain is uniformised at the model's maximal exit rate.
    """
    scheduler = _counter_scheduler(scheduler)
    if scheduler.counter == VISIBLE:
        raise SchedulerError("visible schedulers live on a uniformisation; use evaluate_uniform")
    lam = model.max_exit_rate
    pw = poisson_weights(_lambda_t(lam, t), epsilon)
    done = _degenerate(model, pw.lambda_t)
    if done is not None:
        return done
    cap = min(scheduler.depth, pw.n_max)
    lam_f = float(lam)
    index: dict[tuple, int] = {}
    goal_states = []

    def state(lid, c, a):
        key = (lid,) if lid in model.goal else (lid, c, a)
        if key not in index:
            index[key] = len(index)
            if lid in model.goal:
                goal_states.append(index[key])
            todo.append(key)
        return index[key]

    todo: list[tuple] = []
    x0 = {}
    for lid, p in model.initial.items():
        if p == 0:
            continue
        for a, w in resolved_decision(model, scheduler, lid, 0).items():
            s = state(lid, 0, a)
            x0[s] = x0.get(s, 0.0) + float(p * w)
    src, dst, prob = [], [], []
    while todo:
        key = todo.pop()
        s = index[key]
        if len(key) == 1:
            src.append(s), dst.append(s), prob.append(1.0)
            continue
        lid, c, a = key
        row = model.rates.get((lid, a))
        if row is None:
            raise SchedulerError(f"action {a!r} is not enabled at {lid}")
        stay = 1.0
        c2 = min(c + 1, cap)
        for target, rate in row.items():
            r = float(rate) / lam_f
            stay -= r
            for a2, w in resolved_decision(model, scheduler, target, c2).items():
                src.append(s), dst.append(state(target, c2, a2)), prob.append(r * float(w))
        if stay > 0:
            src.append(s), dst.append(s), prob.append(stay)
    n = len(index)
    M = sparse.csr_matrix((prob, (dst, src)), shape=(n, n))
    x = np.zeros(n)
    for s, p in x0.items():
        x[s] = p
    goal_mask = np.zeros(n, dtype=bool)
    goal_mask[goal_states] = True
    d = []
    for i in range(pw.n_max + 1):
        d.append(float(x[goal_mask].sum()))
        if i == pw.n_max or x[~goal_mask].sum() == 0:
            break
        x = M @ x
    d += [d[-1]] * (pw.n_max + 1 - len(d))
    degree = int(np.diff(M.tocsc().indptr).max())
    return _interval(d, pw, float(model.initial_goal_mass()), degree + 4)


def evaluate(model: CtmdpModel, scheduler: Scheduler, t, epsilon: float = 1e-9, *, exact: bool = False) -> ValueInterval:
    """Dispatch to :func:`evaluate_uniform` when the model is uniform."""
    if is_uniform(model) is not None and scheduler.counter is not None:
        return evaluate_uniform(model, scheduler, t, epsilon, exact=exact)
    return evaluate_general(model, scheduler, t, epsilon)


def path_probability(u, scheduler: Scheduler, path: TimeAbstractPath, t) -> float:
    """Probability of following ``path`` (from its start) within time ``t``."""
    model, lam = _as_uniform(u)
    if not model.is_valid_path(path):
        raise ValueError(f"path {path} is not valid in the model")
    P = model.embedded
    weight = Fraction(1)
    here = path.start
    for i, (action, target) in enumerate(path.steps):
        choice = scheduler.decide(path.prefix(i)).get(action, Fraction(0))
        weight *= choice * P[(here, action)][target]
        here = target
    if weight == 0:
        return 0.0
    lt = _lambda_t(lam, t)
    n = len(path)
    if n == 0:
        return float(weight)
    return float(weight) * float(gammainc(n, lt)) if lt > 0 else 0.0
