"""MDP semantics of variable feature modules under a controller.

:func:`join_var` joins one closed module. :func:`join_system` joins a list
of modules without building their composition first: at each state it
combines the enabled transitions of the participating modules, which gives
the same MDP as composing everything and then calling :func:`join_var`.
"""

from __future__ import annotations

import itertools
import typing as t
from dataclasses import dataclass
from fractions import Fraction

from ..controller import Controller, SwitchEvent
from ..core import Combination, ContractError
from ..module_algebra import CompositionError, Cost
from ..semantics import Mdp, explore
from .ast import ModelError
from .evaluation import (
    CompiledBranch,
    Value,
    Variable,
    VarFeatureModule,
    compile_update,
    compile_value,
    run_update,
)

Valuation = t.Tuple[Value, ...]

# Enumerating initial valuations beyond this size is refused.
MAX_INIT_ENUMERATION = 10**6


def _initial_valuations(
    variables: t.Sequence[Variable], init: t.Any, layout: t.Mapping[str, int], offset: int = 0
) -> t.List[Valuation]:
    domains = [(v.init,) if v.init is not None else v.domain for v in variables]
    size = 1
    for d in domains:
        size *= len(d)
    if size > MAX_INIT_ENUMERATION:
        raise ModelError(f"initial condition ranges over {size} valuations; give more variables an init value")
    # The init predicate sees the module's own variables only.
    local_layout = {name: idx - offset for name, idx in layout.items()}
    pred = compile_value(init, local_layout)
    return [v for v in itertools.product(*domains) if pred(v, frozenset())]


def _check_features(features: t.AbstractSet[str], c: Controller) -> None:
    outside = set(features) - set(c.signature.features)
    if outside:
        raise ContractError(f"module features {sorted(outside)} are not in the controller's signature")


def _events_by_source(c: Controller) -> t.Dict[Combination, t.List[SwitchEvent]]:
    out: t.Dict[Combination, t.List[SwitchEvent]] = {}
    for e in c.events:
        out.setdefault(e.source, []).append(e)
    return out


def _all_valuations(variables: t.Sequence[Variable]) -> t.List[Valuation]:
    return list(itertools.product(*(v.domain for v in variables)))


def join_var(m: VarFeatureModule, c: Controller, reachable_only: bool = True) -> Mdp:
    """The MDP of a closed variable module joined with a controller."""
    if m.external:
        names = ", ".join(v.name for v in m.external)
        raise ContractError(f"module has external variables ({names}); compose first")
    _check_features(m.interface.features, c)
    variables = m.variables
    layout = {v.name: i for i, v in enumerate(variables)}
    own = m.own
    acts = []
    sws = []
    for tr in m.transitions:
        guard = compile_value(tr.guard, layout)
        upd = compile_update(tr.update, layout)
        where = tr.origin or "transition"
        if tr.is_switch:
            sws.append((guard, compile_value(tr.rho, {}), upd, tr.cost, where))
        else:
            acts.append((guard, upd, tr.cost, where, tr.action))
    by_source = _events_by_source(c)

    def successors(state):
        v, C = state
        for guard, upd, cost, where, action in acts:
            if guard(v, C):
                dist = run_update(upd, v, C, variables, where)
                yield cost, {(v2, C): p for v2, p in dist.items()}, f"R1:{action}"
        events = by_source.get(C, ())
        mine = C & own
        for e in events:
            if all(c2 & own == mine for c2 in e.target.support):
                yield e.cost, {(v, c2): p for c2, p in e.target.items()}, "R2"
        for guard, rho, upd, cost, where in sws:
            if not guard(v, C):
                continue
            dist = None
            for e in events:
                targets = e.target.support
                if not any(c2 & own != mine for c2 in targets):
                    continue
                if not all(rho(None, C, c2) for c2 in targets):
                    continue
                if dist is None:
                    dist = run_update(upd, v, C, variables, where)
                yield cost + e.cost, {
                    (v2, c2): p * q for v2, p in dist.items() for c2, q in e.target.items()
                }, "R3"

    inits = _initial_valuations(variables, m.init, layout)
    initial = [(v, C) for v in inits for C in c.initial]
    everything = None
    if not reachable_only:
        everything = [(v, C) for v in _all_valuations(variables) for C in c.signature.combinations]
    return explore(initial, successors, everything, variables=tuple(layout), feature_order=c.signature.features)


@dataclass(frozen=True)
class _Cmd:
    guard: t.Callable[..., t.Any]
    rho: t.Callable[..., t.Any] | None
    branches: t.Tuple[CompiledBranch, ...]
    cost: Cost
    where: str


def _partial(
    cmd: _Cmd, v: Valuation, C: Combination, variables: t.Sequence[Variable]
) -> t.List[t.Tuple[t.Tuple[t.Tuple[int, Value], ...], Fraction]]:
    """Branches of one command as (assignments, probability), checked against domains."""
    out = []
    for b in cmd.branches:
        assigns = []
        for idx, fn in b.assigns:
            val = fn(v, C)
            if not variables[idx].contains(val):
                var = variables[idx]
                raise_runtime(cmd.where, var, val)
            assigns.append((idx, val))
        out.append((tuple(assigns), b.prob))
    return out


def raise_runtime(where: str, var: Variable, val: t.Any) -> t.NoReturn:
    from .ast import ModelRuntimeError

    raise ModelRuntimeError(f"{where}: value {val!r} for variable {var.name} outside its domain {var.describe()}")


def _combine(
    v: Valuation, parts: t.Sequence[t.List[t.Tuple[t.Tuple[t.Tuple[int, Value], ...], Fraction]]]
) -> t.Dict[Valuation, Fraction]:
    out: t.Dict[Valuation, Fraction] = {}
    for combo in itertools.product(*parts):
        p = Fraction(1)
        new = None
        for assigns, q in combo:
            p *= q
            if assigns:
                if new is None:
                    new = list(v)
                for idx, val in assigns:
                    new[idx] = val
        key = v if new is None else tuple(new)
        out[key] = out.get(key, Fraction(0)) + p
    return out


class SystemLayout:
    """Variables of a module list, concatenated in module order."""

    def __init__(self, modules: t.Sequence[VarFeatureModule]):
        self.modules = tuple(modules)
        self.variables: t.Tuple[Variable, ...] = tuple(v for m in modules for v in m.variables)
        self.index = {v.name: i for i, v in enumerate(self.variables)}
        if len(self.index) != len(self.variables):
            seen: t.Set[str] = set()
            dup = sorted({v.name for v in self.variables if v.name in seen or seen.add(v.name)})
            raise CompositionError(f"modules share local variables {dup}")
        owners: t.Dict[str, str] = {}
        for m in modules:
            for f in m.own:
                if f in owners:
                    raise CompositionError(f"modules {owners[f]} and {m.name} share own feature {f}")
                owners[f] = m.name
        for m in modules:
            for x in m.external:
                if x.name not in self.index:
                    raise ContractError(f"external variable {x.name} of module {m.name} is not local to any module")

    @property
    def names(self) -> t.Tuple[str, ...]:
        return tuple(v.name for v in self.variables)


def join_system(modules: t.Sequence[VarFeatureModule], c: Controller, reachable_only: bool = True) -> Mdp:
    """The MDP of ``(m1 || ... || mk) ⋈ c``, composed on the fly."""
    if not modules:
        raise ContractError("no modules to join")
    lay = SystemLayout(modules)
    variables = lay.variables
    layout = lay.index
    for m in modules:
        _check_features(m.interface.features, c)
    own_all = frozenset().union(*(m.own for m in modules))
    owns = [m.own for m in modules]
    acts: t.List[t.Dict[str, t.List[_Cmd]]] = []
    sws: t.List[t.List[_Cmd]] = []
    for m in modules:
        a: t.Dict[str, t.List[_Cmd]] = {x: [] for x in sorted(m.actions)}
        s: t.List[_Cmd] = []
        for tr in m.transitions:
            cmd = _Cmd(
                compile_value(tr.guard, layout),
                compile_value(tr.rho, {}) if tr.is_switch else None,
                compile_update(tr.update, layout),
                tr.cost,
                f"{m.name}: {tr.origin}" if tr.origin else m.name,
            )
            (s if tr.is_switch else a[tr.action]).append(cmd)
        acts.append(a)
        sws.append(s)
    alphabet = sorted(set().union(*(m.actions for m in modules)))
    participants = {x: [i for i, m in enumerate(modules) if x in m.actions] for x in alphabet}
    by_source = _events_by_source(c)

    def successors(state):
        v, C = state
        for x in alphabet:
            enabled = []
            for i in participants[x]:
                cmds = [cmd for cmd in acts[i][x] if cmd.guard(v, C)]
                if not cmds:
                    break
                enabled.append(cmds)
            else:
                for pick in itertools.product(*enabled):
                    cost = pick[0].cost
                    for cmd in pick[1:]:
                        cost = cost + cmd.cost
                    dist = _combine(v, [_partial(cmd, v, C, variables) for cmd in pick])
                    yield cost, {(v2, C): p for v2, p in dist.items()}, f"R1:{x}"
        events = by_source.get(C, ())
        if not events:
            return
        mine = C & own_all
        admissible_cache: t.Dict[int, t.List[_Cmd]] = {}
        for e in events:
            targets = e.target.support
            if all(c2 & own_all == mine for c2 in targets):
                yield e.cost, {(v, c2): p for c2, p in e.target.items()}, "R2"
                continue
            choices: t.List[t.List[_Cmd | None]] = []
            for i, o in enumerate(owns):
                changed = any(c2 & o != C & o for c2 in targets)
                adm = [cmd for cmd in sws[i] if cmd.guard(v, C) and all(cmd.rho(None, C, c2) for c2 in targets)]
                if changed:
                    if not adm:
                        break
                    choices.append(adm)
                else:
                    choices.append([None] + adm)
            else:
                for pick in itertools.product(*choices):
                    cmds = [cmd for cmd in pick if cmd is not None]
                    cost = e.cost
                    for cmd in cmds:
                        cost = cost + cmd.cost
                    dist = _combine(v, [_partial(cmd, v, C, variables) for cmd in cmds])
                    yield cost, {
                        (v2, c2): p * q for v2, p in dist.items() for c2, q in e.target.items()
                    }, "R3"

    per_module = []
    offset = 0
    for m in modules:
        sub = {v.name: layout[v.name] for v in m.variables}
        per_module.append(_initial_valuations(m.variables, m.init, sub, offset))
        offset += len(m.variables)
    inits = [tuple(itertools.chain.from_iterable(p)) for p in itertools.product(*per_module)]
    initial = [(v, C) for v in inits for C in c.initial]
    everything = None
    if not reachable_only:
        everything = [(v, C) for v in _all_valuations(variables) for C in c.signature.combinations]
    return explore(initial, successors, everything, variables=lay.names, feature_order=c.signature.features)
