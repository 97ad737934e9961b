"""Time-abstract schedulers and the ``.sched`` document format.

Every scheduler answers :meth:`Scheduler.decide` on a time-abstract
history with a distribution over actions (a deterministic choice is a
point mass).  Schedulers whose choice only depends on the current location
and a capped counter additionally expose :meth:`Scheduler.decision`; the
numeric evaluators and the vectorised simulator rely on that form.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping, Optional, Union

from .model import MAX, MIN, CtmdpModel, ModelError, TimeAbstractPath, format_rational, parse_rational

Entry = Union[str, Mapping[str, Fraction]]
Decision = dict  # action -> Fraction weight

STEPS = "steps"
VISIBLE = "visible"


class SchedulerError(ValueError):
    pass


def as_decision(entry: Entry) -> Decision:
    if isinstance(entry, str):
        return {entry: Fraction(1)}
    return {a: Fraction(w) for a, w in entry.items() if w != 0}


def _freeze(entry: Entry) -> Entry:
    if isinstance(entry, str):
        return entry
    dist = {a: Fraction(w) for a, w in entry.items() if Fraction(w) != 0}
    if len(dist) == 1:
        return next(iter(dist))
    return dist


class Scheduler:
    """Common interface; concrete classes below."""

    counter: Optional[str] = STEPS
    depth: int = 0

    def decide(self, path: TimeAbstractPath) -> Decision:
        raise NotImplementedError

    def decision(self, location: str, count: int) -> Optional[Decision]:
        raise NotImplementedError

    @property
    def randomized(self) -> bool:
        return False


@dataclass(frozen=True)
class Positional(Scheduler):
    choice: Mapping[str, str]

    counter = STEPS
    depth = 0

    def decision(self, location, count=0):
        a = self.choice.get(location)
        return None if a is None else {a: Fraction(1)}

    def decide(self, path):
        return self.decision(path.last, len(path))

    def __getitem__(self, location):
        return self.choice[location]


@dataclass(frozen=True)
class Counting(Scheduler):
    """Hop-counting scheduler: ``preamble[i]`` rules step ``i``, ``tail`` afterwards.

    Preamble entries map a location to an action or to a distribution over
    actions; locations missing from an entry fall back to the tail.
    """

    preamble: tuple
    tail: Positional

    counter = STEPS

    def __post_init__(self):
        frozen = tuple({l: _freeze(e) for l, e in table.items()} for table in self.preamble)
        object.__setattr__(self, "preamble", frozen)

    @property
    def depth(self) -> int:
        return len(self.preamble)

    def entry(self, location: str, count: int) -> Optional[Entry]:
        if count < len(self.preamble) and location in self.preamble[count]:
            return self.preamble[count][location]
        return self.tail.choice.get(location)

    def decision(self, location, count):
        e = self.entry(location, count)
        return None if e is None else as_decision(e)

    def decide(self, path):
        return self.decision(path.last, len(path))

    @property
    def randomized(self) -> bool:
        return any(not isinstance(e, str) for table in self.preamble for e in table.values())

    def normalized(self) -> "Counting":
        """Drop trailing preamble entries that agree with the tail."""
        tables = list(self.preamble)
        while tables and all(self.tail.choice.get(l) == e for l, e in tables[-1].items()):
            tables.pop()
        return Counting(tuple(tables), self.tail)


# randomised counting schedulers share the representation
RandomizedCounting = Counting


@dataclass(frozen=True)
class HistoryDependent(Scheduler):
    """Decisions keyed by the full time-abstract history, with a fallback."""

    table: Mapping[TimeAbstractPath, Entry]
    fallback: Scheduler

    counter = None

    @property
    def depth(self) -> int:
        return max((len(p) + 1 for p in self.table), default=0)

    def decide(self, path):
        if path in self.table:
            return as_decision(self.table[path])
        return self.fallback.decide(path)

    @property
    def randomized(self) -> bool:
        return any(not isinstance(e, str) for e in self.table.values()) or self.fallback.randomized


@dataclass(frozen=True)
class VisibleScheduler(Scheduler):
    """A scheduler over a uniformisation that only looks at the visible history.

    ``base_of`` maps every location of the uniformisation to its original
    location; ``observable`` is the set of original locations.  The counter
    is the number of visible steps.
    """

    base: Scheduler
    base_of: Mapping[str, str]
    observable: frozenset

    counter = VISIBLE

    @property
    def depth(self) -> int:
        return self.base.depth

    def project(self, path: TimeAbstractPath) -> TimeAbstractPath:
        if path.start not in self.observable:
            raise SchedulerError(f"path starts at unobservable location {path.start}")
        steps = tuple((a, l) for a, l in path.steps if l in self.observable)
        return TimeAbstractPath(path.start, steps)

    def decide(self, path):
        return self.base.decide(self.project(path))

    def decision(self, location, count):
        return self.base.decision(self.base_of[location], count)

    @property
    def randomized(self) -> bool:
        return self.base.randomized


@dataclass(frozen=True)
class StrategyPair(Scheduler):
    """Max and Min strategies combined into one scheduler of the underlying CTMDP."""

    max_strategy: Scheduler
    min_strategy: Scheduler
    owners: Mapping[str, str] = field(default_factory=dict)

    @property
    def counter(self):
        kinds = {self.max_strategy.counter, self.min_strategy.counter}
        return kinds.pop() if len(kinds) == 1 else None

    @property
    def depth(self) -> int:
        return max(self.max_strategy.depth, self.min_strategy.depth)

    def _side(self, location):
        return self.min_strategy if self.owners.get(location, MAX) == MIN else self.max_strategy

    def decide(self, path):
        return self._side(path.last).decide(path)

    def decision(self, location, count):
        return self._side(location).decision(location, count)

    @property
    def randomized(self) -> bool:
        return self.max_strategy.randomized or self.min_strategy.randomized


def split_strategies(model: CtmdpModel, scheduler: Counting) -> StrategyPair:
    """Restrict a combined counting scheduler to each player's locations."""
    owners = {loc.id: loc.player for loc in model.locations}
    parts = {}
    for side in (MAX, MIN):
        mine = {l for l, p in owners.items() if p == side}
        pre = tuple({l: e for l, e in table.items() if l in mine} for table in scheduler.preamble)
        tail = Positional({l: a for l, a in scheduler.tail.choice.items() if l in mine})
        parts[side] = Counting(pre, tail)
    return StrategyPair(parts[MAX], parts[MIN], owners)


def combine(pair: StrategyPair) -> Counting:
    """The combined counting scheduler of two counting strategies."""
    n = pair.depth
    a, b = pair.max_strategy, pair.min_strategy
    tables = []
    for i in range(n):
        table = {}
        for strat in (a, b):
            for l in _known_locations(strat):
                if pair._side(l) is strat:
                    e = strat.entry(l, i)
                    if e is not None:
                        table[l] = e
        tables.append(table)
    tail = {}
    for strat in (a, b):
        for l, act in strat.tail.choice.items():
            if pair._side(l) is strat:
                tail[l] = act
    return Counting(tuple(tables), Positional(tail))


def _known_locations(strat: Counting):
    seen = dict.fromkeys(strat.tail.choice)
    for table in strat.preamble:
        seen.update(dict.fromkeys(table))
    return list(seen)


def check_scheduler(model: CtmdpModel, scheduler: Scheduler, horizon: int | None = None) -> None:
    """Raise :class:`SchedulerError` unless every decision is well formed.

    Counter-based schedulers are checked at every (location, counter) pair
    up to their depth; goal locations may be left without a decision.
    """
    if scheduler.counter is None:
        if isinstance(scheduler, HistoryDependent):
            for path, entry in scheduler.table.items():
                _check_decision(model, path.last, as_decision(entry))
            check_scheduler(model, scheduler.fallback, horizon)
        return
    depth = scheduler.depth if horizon is None else min(scheduler.depth, horizon)
    for lid in model.location_ids:
        for c in range(depth + 1):
            dec = scheduler.decision(lid, c)
            if dec is None:
                if lid in model.goal:
                    continue
                raise SchedulerError(f"no decision for location {lid} at step {c}")
            _check_decision(model, lid, dec)


def _check_decision(model, lid, dec):
    enabled = set(model.enabled(lid))
    for a, w in dec.items():
        if a not in enabled:
            raise SchedulerError(f"action {a!r} is not enabled at {lid}")
        if w < 0:
            raise SchedulerError(f"negative weight for {a!r} at {lid}")
    if sum(dec.values(), Fraction(0)) != 1:
        raise SchedulerError(f"decision at {lid} does not sum to 1")


def resolved_decision(model: CtmdpModel, scheduler: Scheduler, lid: str, count: int) -> Decision:
    """``scheduler.decision`` with goal locations defaulting to their first enabled action."""
    dec = scheduler.decision(lid, count)
    if dec is None:
        if lid not in model.goal:
            raise SchedulerError(f"no decision for location {lid} at step {count}")
        return {model.enabled(lid)[0]: Fraction(1)}
    return dec


# -- document format ---------------------------------------------------------

def _entry_from_doc(value, where) -> Entry:
    if isinstance(value, str):
        return value
    if isinstance(value, Mapping):
        try:
            return {a: parse_rational(w, f"{where}[{a}]") for a, w in value.items()}
        except ModelError as exc:
            raise SchedulerError(str(exc)) from None
    raise SchedulerError(f"{where}: decision must be an action or a distribution")


def scheduler_from_dict(doc: Mapping) -> Scheduler:
    if not isinstance(doc, Mapping):
        raise SchedulerError("scheduler document must be an object")
    kind = doc.get("type")
    if kind == "positional":
        table = doc.get("map")
        if not isinstance(table, Mapping) or not all(isinstance(v, str) for v in table.values()):
            raise SchedulerError("positional scheduler needs a 'map' of location -> action")
        return Positional(dict(table))
    if kind in ("counting", "randomized-counting"):
        tail = doc.get("tail", {})
        if not isinstance(tail, Mapping) or not all(isinstance(v, str) for v in tail.values()):
            raise SchedulerError("counting scheduler needs a deterministic 'tail' map")
        raw = doc.get("preamble", [])
        if not isinstance(raw, list):
            raise SchedulerError("'preamble' must be a list")
        pre = []
        for i, table in enumerate(raw):
            if not isinstance(table, Mapping):
                raise SchedulerError(f"preamble[{i}] must be an object")
            pre.append({l: _entry_from_doc(v, f"preamble[{i}][{l}]") for l, v in table.items()})
        return Counting(tuple(pre), Positional(dict(tail)))
    raise SchedulerError(f"unknown scheduler type {kind!r}")


def _entry_to_doc(entry: Entry):
    if isinstance(entry, str):
        return entry
    return {a: format_rational(w) for a, w in entry.items()}


def scheduler_to_dict(scheduler: Scheduler) -> dict:
    if isinstance(scheduler, StrategyPair):
        scheduler = combine(scheduler)
    if isinstance(scheduler, Positional):
        return {"type": "positional", "map": dict(scheduler.choice)}
    if isinstance(scheduler, Counting):
        return {
            "type": "counting",
            "preamble": [{l: _entry_to_doc(e) for l, e in t.items()} for t in scheduler.preamble],
            "tail": dict(scheduler.tail.choice),
        }
    raise SchedulerError(f"{type(scheduler).__name__} has no document form")


def parse_scheduler(document: str) -> Scheduler:
    try:
        doc = json.loads(document, parse_float=str, parse_int=str)
    except json.JSONDecodeError as exc:
        raise SchedulerError(f"syntax error at line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    return scheduler_from_dict(doc)


def serialize_scheduler(scheduler: Scheduler) -> str:
    return json.dumps(scheduler_to_dict(scheduler), indent=2)


def load_scheduler(path) -> Scheduler:
    with open(path, encoding="utf-8") as fh:
        return parse_scheduler(fh.read())
