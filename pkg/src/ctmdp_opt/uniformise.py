"""Uniformisation with observable and unobservable location copies."""

from __future__ import annotations

from dataclasses import dataclass, replace
from fractions import Fraction
from typing import Mapping, Optional

from .model import CtmdpModel, Location, ModelError, TimeAbstractPath, Transition
from .schedulers import Scheduler, VisibleScheduler

COPY_SUFFIX = "__u"


@dataclass(frozen=True)
class UniformisationResult:
    uniform_model: CtmdpModel
    rate: Fraction
    counterpart: Mapping[str, str]
    source: CtmdpModel

    def observable(self, lid: str) -> bool:
        return lid in self.counterpart

    @property
    def base_of(self) -> dict[str, str]:
        out = {l: l for l in self.counterpart}
        out.update({u: l for l, u in self.counterpart.items()})
        return out


def is_uniform(model: CtmdpModel) -> Optional[Fraction]:
    """The common exit rate if every enabled (l, a) shares it, else ``None``."""
    totals = {sum(row.values()) for row in model.rates.values()}
    return totals.pop() if len(totals) == 1 else None


def uniformise(model: CtmdpModel) -> UniformisationResult:
    """Build the uniformisation: a copy ``<id>__u`` per location, filler rates into the copy.

    Filler transitions are only added for enabled actions and only when the
    missing rate is positive.  Copies are kept even when unreachable.
    """
    ids = set(model.location_ids)
    counterpart = {}
    for lid in model.location_ids:
        copy = lid + COPY_SUFFIX
        if lid.endswith(COPY_SUFFIX) or copy in ids:
            raise ModelError(f"location id {lid!r} clashes with the reserved suffix {COPY_SUFFIX!r}")
        counterpart[lid] = copy
    lam = model.max_exit_rate

    observable_rows: list[Transition] = []
    for lid in model.location_ids:
        for a in model.enabled(lid):
            row = model.rates[(lid, a)]
            for target, rate in row.items():
                observable_rows.append(Transition(lid, a, target, rate))
            filler = lam - sum(row.values())
            if filler > 0:
                observable_rows.append(Transition(lid, a, counterpart[lid], filler))
    # the filler already targets l_U, so copying it yields the l_U self-loop
    copied = [Transition(counterpart[tr.source], tr.action, tr.target, tr.rate) for tr in observable_rows]
    copies = tuple(replace(loc, id=counterpart[loc.id]) for loc in model.locations)
    uniform = CtmdpModel(
        locations=tuple(model.locations) + copies,
        actions=model.actions,
        transitions=tuple(observable_rows + copied),
        initial=dict(model.initial),
        name=f"{model.name}-uniform",
    )
    return UniformisationResult(uniform, lam, counterpart, model)


def reachable(model: CtmdpModel) -> set[str]:
    seen = {l for l, p in model.initial.items() if p > 0}
    todo = list(seen)
    while todo:
        here = todo.pop()
        for a in model.enabled(here):
            for target in model.rates[(here, a)]:
                if target not in seen:
                    seen.add(target)
                    todo.append(target)
    return seen


def prune(model: CtmdpModel) -> CtmdpModel:
    """Drop locations unreachable from the initial distribution."""
    keep = reachable(model)
    return replace(
        model,
        locations=tuple(loc for loc in model.locations if loc.id in keep),
        transitions=tuple(tr for tr in model.transitions if tr.source in keep),
    )


def vis_project(path: TimeAbstractPath, result: UniformisationResult) -> TimeAbstractPath:
    """Delete unobservable locations together with the transitions leading into them."""
    if not result.observable(path.start):
        raise ModelError(f"path starts at unobservable location {path.start}")
    return TimeAbstractPath(path.start, tuple((a, l) for a, l in path.steps if result.observable(l)))


def lift_scheduler(scheduler: Scheduler, result: UniformisationResult) -> VisibleScheduler:
    """The visible scheduler over the uniformisation that acts like ``scheduler`` on ``vis``."""
    return VisibleScheduler(scheduler, result.base_of, frozenset(result.counterpart))
