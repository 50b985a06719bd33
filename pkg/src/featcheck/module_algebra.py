"""Data-abstract feature modules and their parallel composition."""

from __future__ import annotations

import typing as t
from dataclasses import dataclass, field
from fractions import Fraction

from .core import (
    TRUE,
    BoolExpr,
    ContractError,
    Distribution,
    conj,
    dirac,
    feature_names,
    frame,
    has_primes,
    product,
)


class CompositionError(ContractError):
    pass


class Cost(t.Mapping[str, int]):
    """A vector of natural-number costs indexed by cost-type name.

    Absent types read as 0 and zero entries are dropped, so two vectors
    compare equal iff they agree on every type.
    """

    __slots__ = ("_items",)

    def __init__(self, values: t.Union[t.Mapping[str, int], t.Iterable[t.Tuple[str, int]], None] = None, **kw: int):
        merged: t.Dict[str, int] = {}
        src = values.items() if isinstance(values, t.Mapping) else (values or ())
        for name, v in list(src) + list(kw.items()):
            if isinstance(v, bool) or not isinstance(v, int) or v < 0:
                raise ContractError(f"cost {name}={v!r} is not a natural number")
            merged[name] = merged.get(name, 0) + v
        self._items = tuple(sorted((k, v) for k, v in merged.items() if v))

    def __getitem__(self, name: str) -> int:
        for k, v in self._items:
            if k == name:
                return v
        raise KeyError(name)

    def get(self, name: str, default: int = 0) -> int:  # type: ignore[override]
        for k, v in self._items:
            if k == name:
                return v
        return default

    def __iter__(self) -> t.Iterator[str]:
        return (k for k, _ in self._items)

    def __len__(self) -> int:
        return len(self._items)

    def __add__(self, other: Cost) -> Cost:
        return Cost(list(self._items) + list(other._items))

    def __eq__(self, other: object) -> bool:
        if isinstance(other, Cost):
            return self._items == other._items
        if isinstance(other, t.Mapping):
            return self == Cost(other)
        return NotImplemented

    def __hash__(self) -> int:
        return hash(self._items)

    def __repr__(self) -> str:
        return "Cost(" + ", ".join(f"{k}={v}" for k, v in self._items) + ")"

    def format(self) -> str:
        return ",".join(f"{k}={v}" for k, v in self._items) or "-"


ZERO = Cost()


@dataclass(frozen=True)
class FeatureInterface:
    own: t.FrozenSet[str] = frozenset()
    ext: t.FrozenSet[str] = frozenset()

    def __post_init__(self) -> None:
        object.__setattr__(self, "own", frozenset(self.own))
        object.__setattr__(self, "ext", frozenset(self.ext))
        if self.own & self.ext:
            raise ContractError(f"features both own and external: {sorted(self.own & self.ext)}")

    @property
    def features(self) -> t.FrozenSet[str]:
        return self.own | self.ext


@dataclass(frozen=True)
class ActTransition:
    source: t.Hashable
    guard: BoolExpr
    action: str
    cost: Cost
    target: Distribution


@dataclass(frozen=True)
class SwTransition:
    source: t.Hashable
    guard: BoolExpr
    rho: BoolExpr
    cost: Cost
    target: Distribution


@dataclass(frozen=True)
class FeatureModule:
    locations: t.Tuple[t.Hashable, ...]
    initial: t.Tuple[t.Hashable, ...]
    interface: FeatureInterface
    actions: t.FrozenSet[str]
    tr_act: t.Tuple[ActTransition, ...] = ()
    tr_sw: t.Tuple[SwTransition, ...] = ()
    name: str = field(default="", compare=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "locations", tuple(self.locations))
        object.__setattr__(self, "initial", tuple(self.initial))
        object.__setattr__(self, "actions", frozenset(self.actions))
        object.__setattr__(self, "tr_act", _dedup(self.tr_act))
        object.__setattr__(self, "tr_sw", _dedup(self.tr_sw))

    @property
    def own(self) -> t.FrozenSet[str]:
        return self.interface.own

    @property
    def ext(self) -> t.FrozenSet[str]:
        return self.interface.ext


def _dedup(items: t.Iterable[t.Any]) -> t.Tuple[t.Any, ...]:
    items = list(items)
    try:
        return tuple(dict.fromkeys(items))
    except TypeError:
        # Hand-built transitions with raw dict targets are unhashable; keep
        # them so validate_module can report on them.
        out: t.List[t.Any] = []
        for x in items:
            if x not in out:
                out.append(x)
        return tuple(out)


def validate_module(m: FeatureModule) -> t.List[str]:
    """Describe every violated well-formedness condition of ``m``."""
    problems: t.List[str] = []
    locs = set(m.locations)
    if len(locs) != len(m.locations):
        problems.append("duplicate locations")
    if not m.initial:
        problems.append("no initial location")
    for l in m.initial:
        if l not in locs:
            problems.append(f"initial location {l!r} is not a declared location")
    if m.own & m.ext:
        problems.append(f"features both own and external: {sorted(m.own & m.ext)}")
    visible = m.interface.features

    def check_dist(what: str, d: t.Any) -> None:
        # Raw mappings get here only from hand-built modules; Distribution
        # itself refuses to be constructed unnormalized.
        if isinstance(d, Distribution):
            weights = dict(d.items())
        elif isinstance(d, t.Mapping):
            weights = {k: Fraction(v) for k, v in d.items()}
        else:
            problems.append(f"{what}: target is not a distribution")
            return
        if any(w <= 0 for w in weights.values()):
            problems.append(f"{what}: non-positive probability in target")
        total = sum(weights.values())
        if total != 1:
            problems.append(f"{what}: distribution not normalized (sums to {total})")
        for x in weights:
            if x not in locs:
                problems.append(f"{what}: target {x!r} is not a declared location")

    for i, tr in enumerate(m.tr_act):
        what = f"action transition #{i} ({tr.source!r} --{tr.action}-->)"
        if tr.source not in locs:
            problems.append(f"{what}: unknown source location")
        if tr.action not in m.actions:
            problems.append(f"{what}: action {tr.action!r} not in the action set")
        if has_primes(tr.guard):
            problems.append(f"{what}: guard contains primed atoms")
        outside = feature_names(tr.guard) - visible
        if outside:
            problems.append(f"{what}: guard atom outside the interface {sorted(outside)}")
        check_dist(what, tr.target)
    for i, tr in enumerate(m.tr_sw):
        what = f"switch transition #{i} ({tr.source!r})"
        if tr.source not in locs:
            problems.append(f"{what}: unknown source location")
        if has_primes(tr.guard):
            problems.append(f"{what}: guard contains primed atoms")
        outside = feature_names(tr.guard) - visible
        if outside:
            problems.append(f"{what}: guard atom outside the interface {sorted(outside)}")
        foreign = feature_names(tr.rho) - m.own
        if foreign:
            problems.append(f"{what}: rho atom outside OwnF {sorted(foreign)}")
        check_dist(what, tr.target)
    return problems


def composable(m1: FeatureModule, m2: FeatureModule) -> bool:
    return not (m1.own & m2.own)


def compose(m1: FeatureModule, m2: FeatureModule) -> FeatureModule:
    """Parallel composition ``m1 || m2``.

    Locations are pairs ``(l1, l2)``. Actions in both alphabets synchronize,
    all others interleave; switch transitions fire alone (freezing the other
    side's own features) or jointly.
    """
    shared_own = m1.own & m2.own
    if shared_own:
        raise CompositionError(f"modules share own features {sorted(shared_own)}")
    own = m1.own | m2.own
    ext = (m1.ext | m2.ext) - own
    shared = m1.actions & m2.actions

    tr_act: t.List[ActTransition] = []
    for tr in m1.tr_act:
        if tr.action in shared:
            continue
        for l2 in m2.locations:
            tr_act.append(
                ActTransition((tr.source, l2), tr.guard, tr.action, tr.cost, product(tr.target, dirac(l2)))
            )
    for tr in m2.tr_act:
        if tr.action in shared:
            continue
        for l1 in m1.locations:
            tr_act.append(
                ActTransition((l1, tr.source), tr.guard, tr.action, tr.cost, product(dirac(l1), tr.target))
            )
    for a in m1.tr_act:
        if a.action not in shared:
            continue
        for b in m2.tr_act:
            if b.action != a.action:
                continue
            tr_act.append(
                ActTransition(
                    (a.source, b.source), conj(a.guard, b.guard), a.action, a.cost + b.cost,
                    product(a.target, b.target),
                )
            )

    frame1, frame2 = frame(m1.own), frame(m2.own)
    tr_sw: t.List[SwTransition] = []
    for tr in m1.tr_sw:
        for l2 in m2.locations:
            tr_sw.append(
                SwTransition((tr.source, l2), tr.guard, conj(tr.rho, frame2), tr.cost, product(tr.target, dirac(l2)))
            )
    for tr in m2.tr_sw:
        for l1 in m1.locations:
            tr_sw.append(
                SwTransition((l1, tr.source), tr.guard, conj(tr.rho, frame1), tr.cost, product(dirac(l1), tr.target))
            )
    for a in m1.tr_sw:
        for b in m2.tr_sw:
            tr_sw.append(
                SwTransition(
                    (a.source, b.source), conj(a.guard, b.guard), conj(a.rho, b.rho), a.cost + b.cost,
                    product(a.target, b.target),
                )
            )

    locations = [(l1, l2) for l1 in m1.locations for l2 in m2.locations]
    initial = [(l1, l2) for l1 in m1.initial for l2 in m2.initial]
    name = f"({m1.name}||{m2.name})" if m1.name or m2.name else ""
    return FeatureModule(
        locations, initial, FeatureInterface(own, ext), m1.actions | m2.actions, tr_act, tr_sw, name=name
    )


def compose_all(modules: t.Sequence[FeatureModule]) -> FeatureModule:
    if not modules:
        raise CompositionError("nothing to compose")
    result = modules[0]
    for m in modules[1:]:
        result = compose(result, m)
    return result


def act(source: t.Hashable, action: str, target: t.Any, guard: BoolExpr = TRUE, cost: Cost = ZERO) -> ActTransition:
    """Shorthand constructor; a bare target location means a Dirac target."""
    return ActTransition(source, guard, action, cost, _as_dist(target))


def sw(source: t.Hashable, rho: BoolExpr, target: t.Any, guard: BoolExpr = TRUE, cost: Cost = ZERO) -> SwTransition:
    return SwTransition(source, guard, rho, cost, _as_dist(target))


def _as_dist(target: t.Any) -> Distribution:
    if isinstance(target, Distribution):
        return target
    if isinstance(target, dict):
        return Distribution({k: Fraction(v) for k, v in target.items()})
    return dirac(target)
