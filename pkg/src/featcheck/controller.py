"""Feature controllers: which feature combinations may follow which."""

from __future__ import annotations

import typing as t
from dataclasses import dataclass

from .core import TRUE, Combination, ContractError, Distribution, FeatureSignature, dirac
from .module_algebra import ZERO, ActTransition, Cost, FeatureInterface, FeatureModule


@dataclass(frozen=True)
class SwitchEvent:
    source: Combination
    cost: Cost
    target: Distribution

    @property
    def is_simple(self) -> bool:
        return len(self.target) == 1


@dataclass(frozen=True)
class Controller:
    signature: FeatureSignature
    initial: t.Tuple[Combination, ...]
    events: t.Tuple[SwitchEvent, ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "initial", tuple(frozenset(c) for c in self.initial))
        object.__setattr__(self, "events", tuple(dict.fromkeys(self.events)))

    def events_from(self, c: Combination) -> t.List[SwitchEvent]:
        return [e for e in self.events if e.source == c]

    def with_initial(self, initial: t.Iterable[Combination]) -> Controller:
        return Controller(self.signature, tuple(initial), self.events)


def event(source: t.Iterable[str], target: t.Any, cost: Cost = ZERO) -> SwitchEvent:
    """Build a switch event; a bare target combination means a Dirac target."""
    if not isinstance(target, Distribution):
        target = dirac(frozenset(target))
    return SwitchEvent(frozenset(source), cost, target)


def validate_controller(c: Controller) -> t.List[str]:
    problems: t.List[str] = []
    valid = c.signature.valid
    fmt = c.signature.format
    if not c.initial:
        problems.append("no initial feature combination")
    for init in c.initial:
        if init not in valid:
            problems.append(f"invalid initial combination {fmt(init)}")
    seen: t.Dict[t.Tuple[Combination, Distribution], Cost] = {}
    for i, e in enumerate(c.events):
        if e.source not in valid:
            problems.append(f"event #{i}: invalid source combination {fmt(e.source)}")
        for target in e.target.support:
            if target not in valid:
                problems.append(f"event #{i}: invalid target combination {fmt(target)}")
        key = (e.source, e.target)
        if key in seen and seen[key] != e.cost:
            problems.append(
                f"event #{i}: cost determinism violated for {fmt(e.source)} "
                f"({seen[key].format()} vs {e.cost.format()})"
            )
        seen.setdefault(key, e.cost)
    return problems


def static_controller(sig: FeatureSignature) -> Controller:
    return Controller(sig, tuple(sig.combinations), ())


def de_controller(sig: FeatureSignature, dynamic: t.Iterable[str], environment: t.Iterable[str]) -> Controller:
    """Controller in which exactly the dynamic and environment features toggle freely."""
    d, e = frozenset(dynamic), frozenset(environment)
    if d & e:
        raise ContractError(f"dynamic and environment features overlap: {sorted(d & e)}")
    unknown = (d | e) - set(sig.features)
    if unknown:
        raise ContractError(f"unknown features {sorted(unknown)}")
    free = d | e
    events = []
    for c in sig.combinations:
        for c2 in sig.combinations:
            diff = c ^ c2
            if diff and diff <= free:
                events.append(event(c, c2))
    return Controller(sig, tuple(sig.combinations), tuple(events))


def controller_to_module(c: Controller, prefix: str = "sw") -> FeatureModule:
    """View ``c`` as a feature module whose locations are the valid combinations.

    Every switch event becomes an action transition with its own fresh action
    name and the trivial guard.
    """
    transitions = []
    for i, e in enumerate(c.events):
        transitions.append(ActTransition(e.source, TRUE, f"{prefix}{i}", e.cost, e.target))
    return FeatureModule(
        tuple(c.signature.combinations),
        c.initial,
        FeatureInterface(frozenset(), frozenset(c.signature.features)),
        frozenset(tr.action for tr in transitions),
        tuple(transitions),
        (),
        name="controller",
    )
