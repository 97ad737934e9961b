"""CTMDPs and continuous-time Markov games.

A model is an immutable collection of locations (each owned by the
maximising or the minimising player), an ordered action alphabet, a sparse
rational rate matrix, an initial distribution and a goal region.  The
document order of locations and actions is kept and used for every
tie-break downstream.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from fractions import Fraction
from functools import cached_property
from importlib import resources
from typing import Iterable, Mapping

MAX = "max"
MIN = "min"


class ModelError(ValueError):
    """Raised for malformed or invalid model documents."""


def parse_rational(value, what: str = "value") -> Fraction:
    if isinstance(value, bool):
        raise ModelError(f"{what}: expected a rational, got {value!r}")
    if isinstance(value, (int, Fraction)):
        return Fraction(value)
    if isinstance(value, float):
        # JSON numbers are parsed from their shortest repr, not the binary value
        return Fraction(repr(value))
    if isinstance(value, str):
        try:
            return Fraction(value.strip())
        except (ValueError, ZeroDivisionError):
            raise ModelError(f"{what}: not a rational literal: {value!r}") from None
    raise ModelError(f"{what}: expected a rational, got {value!r}")


def format_rational(q: Fraction) -> str:
    q = Fraction(q)
    return str(q.numerator) if q.denominator == 1 else f"{q.numerator}/{q.denominator}"


@dataclass(frozen=True)
class Location:
    id: str
    player: str = MAX
    is_goal: bool = False


@dataclass(frozen=True)
class Transition:
    source: str
    action: str
    target: str
    rate: Fraction


@dataclass(frozen=True)
class TimeAbstractPath:
    """``start -a0-> l1 -a1-> ... -> ln`` without sojourn times."""

    start: str
    steps: tuple[tuple[str, str], ...] = ()

    def __len__(self) -> int:
        return len(self.steps)

    @property
    def last(self) -> str:
        return self.steps[-1][1] if self.steps else self.start

    @property
    def locations(self) -> tuple[str, ...]:
        return (self.start,) + tuple(target for _, target in self.steps)

    def extend(self, action: str, target: str) -> "TimeAbstractPath":
        return TimeAbstractPath(self.start, self.steps + ((action, target),))

    def prefix(self, n: int) -> "TimeAbstractPath":
        return TimeAbstractPath(self.start, self.steps[:n])

    def __str__(self) -> str:
        return self.start + "".join(f" -{a}-> {l}" for a, l in self.steps)


@dataclass(frozen=True)
class CtmdpModel:
    locations: tuple[Location, ...]
    actions: tuple[str, ...]
    transitions: tuple[Transition, ...]
    initial: Mapping[str, Fraction]
    name: str = "model"

    # -- derived views -------------------------------------------------
    @cached_property
    def location_ids(self) -> tuple[str, ...]:
        return tuple(loc.id for loc in self.locations)

    @cached_property
    def index(self) -> dict[str, int]:
        return {lid: i for i, lid in enumerate(self.location_ids)}

    @cached_property
    def action_index(self) -> dict[str, int]:
        return {a: i for i, a in enumerate(self.actions)}

    @cached_property
    def _by_id(self) -> dict[str, Location]:
        return {loc.id: loc for loc in self.locations}

    @cached_property
    def rates(self) -> dict[tuple[str, str], dict[str, Fraction]]:
        """``(l, a) -> {l': R(l, a, l')}`` for positive rates, document order."""
        out: dict[tuple[str, str], dict[str, Fraction]] = {}
        for tr in self.transitions:
            if tr.rate > 0:
                out.setdefault((tr.source, tr.action), {})[tr.target] = tr.rate
        return out

    @cached_property
    def goal(self) -> frozenset[str]:
        return frozenset(loc.id for loc in self.locations if loc.is_goal)

    @cached_property
    def is_game(self) -> bool:
        return any(loc.player == MIN for loc in self.locations)

    def location(self, lid: str) -> Location:
        return self._by_id[lid]

    def player(self, lid: str) -> str:
        return self._by_id[lid].player

    def exit_rate(self, lid: str, action: str) -> Fraction:
        return sum(self.rates.get((lid, action), {}).values(), Fraction(0))

    def enabled(self, lid: str) -> tuple[str, ...]:
        return tuple(a for a in self.actions if (lid, a) in self.rates)

    @cached_property
    def max_exit_rate(self) -> Fraction:
        return max((sum(row.values()) for row in self.rates.values()), default=Fraction(0))

    @cached_property
    def embedded(self) -> "EmbeddedDtmc":
        return embedded_probabilities(self)

    @cached_property
    def dense_rates(self):
        """``R`` as a float array of shape (|Act|, |L|, |L|)."""
        import numpy as np

        out = np.zeros((len(self.actions), len(self.locations), len(self.locations)))
        for (l, a), row in self.rates.items():
            for target, rate in row.items():
                out[self.action_index[a], self.index[l], self.index[target]] = float(rate)
        return out

    def initial_goal_mass(self) -> Fraction:
        return sum((p for l, p in self.initial.items() if l in self.goal), Fraction(0))

    def is_valid_path(self, path: TimeAbstractPath) -> bool:
        if path.start not in self.index:
            return False
        here = path.start
        for action, target in path.steps:
            if self.rates.get((here, action), {}).get(target, 0) <= 0:
                return False
            here = target
        return True


@dataclass(frozen=True)
class EmbeddedDtmc:
    probabilities: Mapping[tuple[str, str], Mapping[str, Fraction]] = field(default_factory=dict)

    def __getitem__(self, key: tuple[str, str]) -> Mapping[str, Fraction]:
        return self.probabilities[key]

    def __contains__(self, key) -> bool:
        return key in self.probabilities


def embedded_probabilities(model: CtmdpModel) -> EmbeddedDtmc:
    probs = {}
    for key, row in model.rates.items():
        total = sum(row.values())
        probs[key] = {target: rate / total for target, rate in row.items()}
    return EmbeddedDtmc(probs)


def validate(model: CtmdpModel) -> list[str]:
    """Every violated model invariant, as human-readable strings."""
    problems = []
    ids = set(model.location_ids)
    if len(ids) != len(model.locations):
        problems.append("duplicate location id")
    if len(set(model.actions)) != len(model.actions):
        problems.append("duplicate action id")
    seen = set()
    for tr in model.transitions:
        key = (tr.source, tr.action, tr.target)
        if tr.source not in ids or tr.target not in ids:
            problems.append(f"unknown location in transition {tr.source} -{tr.action}-> {tr.target}")
        if tr.action not in model.actions:
            problems.append(f"unknown action {tr.action!r}")
        if tr.rate < 0:
            problems.append(f"negative rate on {tr.source} -{tr.action}-> {tr.target}")
        if key in seen:
            problems.append(f"duplicate transition {tr.source} -{tr.action}-> {tr.target}")
        seen.add(key)
    for loc in model.locations:
        if loc.player not in (MAX, MIN):
            problems.append(f"unknown player {loc.player!r} at {loc.id}")
        if not model.enabled(loc.id):
            problems.append(f"no enabled action at {loc.id}")
    for lid, p in model.initial.items():
        if lid not in ids:
            problems.append(f"unknown location {lid!r} in initial distribution")
        if p < 0:
            problems.append(f"negative initial probability at {lid}")
    if sum(model.initial.values(), Fraction(0)) != 1:
        problems.append("initial mass ≠ 1")
    for lid in model.location_ids:
        if lid not in model.goal:
            continue
        for a in model.enabled(lid):
            if any(target not in model.goal for target in model.rates[(lid, a)]):
                problems.append(f"goal not absorbing at {lid}")
                break
    return problems


def check(model: CtmdpModel) -> CtmdpModel:
    problems = validate(model)
    if problems:
        raise ModelError("; ".join(problems))
    return model


def absorb_goal(model: CtmdpModel) -> CtmdpModel:
    """Make the goal region absorbing.

    Goal locations that already only lead back into the goal are left
    alone, which makes the transform idempotent; the others get a single
    self-loop on the first action at the model's maximal exit rate.
    """
    offending = set()
    for lid in model.goal:
        for a in model.enabled(lid):
            if any(t not in model.goal for t in model.rates[(lid, a)]):
                offending.add(lid)
        if not model.enabled(lid):
            offending.add(lid)
    if not offending:
        return model
    rate = model.max_exit_rate or Fraction(1)
    kept = [tr for tr in model.transitions if tr.source not in offending]
    loops = [Transition(lid, model.actions[0], lid, rate) for lid in model.location_ids if lid in offending]
    return replace(model, transitions=tuple(kept + loops))


def with_players(model: CtmdpModel, players: Mapping[str, str]) -> CtmdpModel:
    locs = tuple(replace(loc, player=players.get(loc.id, loc.player)) for loc in model.locations)
    return replace(model, locations=locs)


def make_model(
    locations: Iterable,
    actions: Iterable[str],
    transitions: Iterable,
    initial: Mapping,
    goal: Iterable[str] = (),
    players: Mapping[str, str] | None = None,
    name: str = "model",
) -> CtmdpModel:
    """Convenience constructor; ``transitions`` are ``(from, action, to, rate)``."""
    goal = set(goal)
    players = players or {}
    locs = []
    for loc in locations:
        if isinstance(loc, Location):
            locs.append(loc)
        else:
            locs.append(Location(loc, players.get(loc, MAX), loc in goal))
    trs = tuple(Transition(s, a, t, parse_rational(r, "rate")) for s, a, t, r in transitions)
    init = {l: parse_rational(p, "initial") for l, p in initial.items()}
    return CtmdpModel(tuple(locs), tuple(actions), trs, init, name)


# -- document format ---------------------------------------------------------

def _require(doc, key, kind, where="document"):
    if key not in doc:
        raise ModelError(f"{where}: missing field {key!r}")
    if not isinstance(doc[key], kind):
        raise ModelError(f"{where}: field {key!r} has the wrong type")
    return doc[key]


def model_from_dict(doc: Mapping) -> CtmdpModel:
    if not isinstance(doc, Mapping):
        raise ModelError("document: top level must be an object")
    raw_locs = _require(doc, "locations", list)
    players = doc.get("players", {}) or {}
    if not isinstance(players, Mapping):
        raise ModelError("document: 'players' must be an object")
    locs = []
    for i, entry in enumerate(raw_locs):
        if isinstance(entry, str):
            entry = {"id": entry}
        if not isinstance(entry, Mapping) or not isinstance(entry.get("id"), str):
            raise ModelError(f"locations[{i}]: needs a string 'id'")
        lid = entry["id"]
        player = str(players.get(lid, entry.get("player", MAX))).lower()
        if player not in (MAX, MIN):
            raise ModelError(f"locations[{i}]: unknown player {player!r}")
        locs.append(Location(lid, player, bool(entry.get("goal", False))))
    ids = [loc.id for loc in locs]
    if len(set(ids)) != len(ids):
        raise ModelError("locations: duplicate location id")
    for lid in players:
        if lid not in ids:
            raise ModelError(f"players: unknown location {lid!r}")
    actions = _require(doc, "actions", list)
    if not all(isinstance(a, str) for a in actions) or len(set(actions)) != len(actions):
        raise ModelError("actions: must be distinct strings")

    transitions = []
    seen = set()
    for i, entry in enumerate(_require(doc, "transitions", list)):
        where = f"transitions[{i}]"
        if not isinstance(entry, Mapping):
            raise ModelError(f"{where}: must be an object")
        src, act, dst = (_require(entry, k, str, where) for k in ("from", "action", "to"))
        for lid in (src, dst):
            if lid not in ids:
                raise ModelError(f"{where}: unknown location {lid!r}")
        if act not in actions:
            raise ModelError(f"{where}: unknown action {act!r}")
        if (src, act, dst) in seen:
            raise ModelError(f"{where}: duplicate transition {src} -{act}-> {dst}")
        seen.add((src, act, dst))
        rate = parse_rational(_require(entry, "rate", (str, int, float), where), f"{where}.rate")
        if rate < 0:
            raise ModelError(f"{where}: negative rate")
        transitions.append(Transition(src, act, dst, rate))

    initial = {}
    for lid, p in _require(doc, "initial", Mapping).items():
        if lid not in ids:
            raise ModelError(f"initial: unknown location {lid!r}")
        initial[lid] = parse_rational(p, f"initial[{lid}]")
    return CtmdpModel(tuple(locs), tuple(actions), tuple(transitions), initial, str(doc.get("name", "model")))


def parse_model(document: str, *, check_valid: bool = True) -> CtmdpModel:
    """Parse a ``.ctmdp`` document; rationals are read exactly.

    With ``check_valid`` (the default) any invariant violation reported by
    :func:`validate` is raised as a :class:`ModelError`.
    """
    try:
        doc = json.loads(document, parse_float=str, parse_int=str)
    except json.JSONDecodeError as exc:
        raise ModelError(f"syntax error at line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    model = model_from_dict(doc)
    return check(model) if check_valid else model


def model_to_dict(model: CtmdpModel) -> dict:
    locs = []
    for loc in model.locations:
        entry = {"id": loc.id}
        if loc.is_goal:
            entry["goal"] = True
        locs.append(entry)
    doc = {"name": model.name, "locations": locs}
    players = {loc.id: loc.player for loc in model.locations if loc.player != MAX}
    if players:
        doc["players"] = players
    doc["actions"] = list(model.actions)
    doc["transitions"] = [
        {"from": tr.source, "action": tr.action, "to": tr.target, "rate": format_rational(tr.rate)}
        for tr in model.transitions
    ]
    doc["initial"] = {lid: format_rational(p) for lid, p in model.initial.items()}
    return doc


def serialize_model(model: CtmdpModel) -> str:
    return json.dumps(model_to_dict(model), indent=2, ensure_ascii=False)


def load_model(path, *, check_valid: bool = True) -> CtmdpModel:
    with open(path, encoding="utf-8") as fh:
        return parse_model(fh.read(), check_valid=check_valid)


def example_model() -> CtmdpModel:
    """The bundled three-location example with goal ``l2``."""
    text = resources.files("ctmdp_opt").joinpath("data/example.ctmdp").read_text(encoding="utf-8")
    return parse_model(text)
