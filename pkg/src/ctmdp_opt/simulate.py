"""Monte-Carlo estimation of time-bounded reachability.

Samples are grouped into fixed blocks of ``BLOCK`` runs.  Block ``b`` draws
from a PCG64 stream seeded with ``SeedSequence(seed, spawn_key=(b,))``, so
the estimate only depends on ``(seed, samples)`` and never on how blocks
are spread over workers.  Each step consumes three uniforms in the order
action, sojourn, successor; sojourns use the inverse transform
``-log1p(-u) / rate``.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from statistics import NormalDist

import numpy as np

from .model import CtmdpModel, TimeAbstractPath
from .schedulers import STEPS, VISIBLE, Scheduler, resolved_decision

BLOCK = 1 << 14


@dataclass(frozen=True)
class Estimate:
    mean: float
    half_width: float
    confidence: float
    samples: int
    seed: int

    @property
    def lo(self) -> float:
        return max(0.0, self.mean - self.half_width)

    @property
    def hi(self) -> float:
        return min(1.0, self.mean + self.half_width)

    def __contains__(self, x) -> bool:
        return self.lo <= x <= self.hi


def block_rng(seed: int, block: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(block,))))


def _pick(weights: dict, u: float):
    """Inverse-CDF choice from unnormalised nonnegative weights."""
    items = [(k, float(w)) for k, w in weights.items() if w > 0]
    u *= math.fsum(w for _, w in items)
    acc = 0.0
    for k, w in items:
        acc += w
        if u < acc:
            return k
    return items[-1][0]


def sample_run(model: CtmdpModel, scheduler: Scheduler, t, rng: np.random.Generator, trace: list | None = None) -> bool:
    """One timed run; ``True`` iff the goal is entered by time ``t``."""
    t = float(t)
    here = _pick(model.initial, rng.random())
    path = TimeAbstractPath(here)
    clock = 0.0
    while here not in model.goal:
        dec = scheduler.decide(path)
        if dec is None:
            dec = resolved_decision(model, scheduler, here, len(path))
        action = _pick(dec, rng.random())
        row = model.rates[(here, action)]
        clock += -math.log1p(-rng.random()) / float(sum(row.values()))
        if clock > t:
            return False
        target = _pick(row, rng.random())
        if trace is not None:
            trace.append((action, clock, target))
        path = path.extend(action, target)
        here = target
    return True


class _Tables:
    """Dense lookup tables for vectorised runs of a counter-based scheduler."""

    def __init__(self, model: CtmdpModel, scheduler: Scheduler):
        L, A = len(model.locations), len(model.actions)
        self.cap = scheduler.depth
        R = model.dense_rates  # (A, L, L)
        self.exit = R.sum(axis=2).T  # (L, A)
        with np.errstate(invalid="ignore", divide="ignore"):
            P = np.transpose(R, (1, 0, 2)) / self.exit[:, :, None]
        P = np.nan_to_num(P)
        self.cum_p = _normalized_cumsum(P)
        W = np.zeros((self.cap + 1, L, A))
        for c in range(self.cap + 1):
            for li, lid in enumerate(model.location_ids):
                if lid in model.goal:
                    W[c, li, model.action_index[model.enabled(lid)[0]]] = 1.0
                    continue
                for a, w in resolved_decision(model, scheduler, lid, c).items():
                    W[c, li, model.action_index[a]] = float(w)
        self.cum_w = _normalized_cumsum(W)
        self.goal = np.array([lid in model.goal for lid in model.location_ids])
        if scheduler.counter == VISIBLE:
            self.step_inc = np.array([lid in scheduler.observable for lid in model.location_ids], dtype=int)
        else:
            self.step_inc = np.ones(L, dtype=int)
        init = np.array([float(model.initial.get(lid, 0)) for lid in model.location_ids])
        self.cum_init = _normalized_cumsum(init[None, :])[0]


def _normalized_cumsum(a):
    c = np.cumsum(a, axis=-1)
    last = c[..., -1:]
    with np.errstate(invalid="ignore", divide="ignore"):
        c = np.where(last > 0, c / np.where(last > 0, last, 1.0), 1.0)
    return c


def _choose(cum, u):
    return np.minimum((u[:, None] >= cum).sum(axis=1), cum.shape[-1] - 1)


def _run_block_vectorised(tables: _Tables, t: float, n: int, rng: np.random.Generator) -> int:
    loc = _choose(np.broadcast_to(tables.cum_init, (n, tables.cum_init.size)), rng.random(n))
    hit = tables.goal[loc].copy()
    active = ~hit
    clock = np.zeros(n)
    count = np.zeros(n, dtype=int)
    while active.any():
        idx = np.nonzero(active)[0]
        u = rng.random((idx.size, 3))
        l, c = loc[idx], count[idx]
        a = _choose(tables.cum_w[c, l], u[:, 0])
        clock[idx] += -np.log1p(-u[:, 1]) / tables.exit[l, a]
        late = clock[idx] > t
        target = _choose(tables.cum_p[l, a], u[:, 2])
        loc[idx] = target
        count[idx] = np.minimum(c + tables.step_inc[target], tables.cap)
        reached = ~late & tables.goal[target]
        hit[idx[reached]] = True
        active[idx[late | reached]] = False
    return int(hit.sum())


def _run_block_loop(model, scheduler, t, n, rng) -> int:
    return sum(sample_run(model, scheduler, t, rng) for _ in range(n))


def estimate(
    model: CtmdpModel,
    scheduler: Scheduler,
    t,
    samples: int,
    seed: int = 0,
    confidence: float = 0.99,
    workers: int = 1,
) -> Estimate:
    """Fraction of goal-reaching runs with a normal-approximation half width."""
    if samples < 1:
        raise ValueError("need at least one sample")
    if not 0 < confidence < 1:
        raise ValueError("confidence must lie in (0, 1)")
    t = float(t)
    tables = _Tables(model, scheduler) if scheduler.counter in (STEPS, VISIBLE) else None
    sizes = [min(BLOCK, samples - start) for start in range(0, samples, BLOCK)]

    def run(block):
        rng = block_rng(seed, block)
        if tables is not None:
            return _run_block_vectorised(tables, t, sizes[block], rng)
        return _run_block_loop(model, scheduler, t, sizes[block], rng)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            hits = sum(pool.map(run, range(len(sizes))))
    else:
        hits = sum(map(run, range(len(sizes))))
    mean = hits / samples
    z = NormalDist().inv_cdf(0.5 + confidence / 2)
    half = z * math.sqrt(mean * (1 - mean) / samples)
    return Estimate(mean, half, confidence, samples, seed)
