"""Parallel composition of variable feature modules."""

from __future__ import annotations

import typing as t
from fractions import Fraction

from ..core import FALSE, TRUE, conj, disj_of, frame
from ..module_algebra import CompositionError, FeatureInterface, FeatureModule
from .ast import BinOp, EnumLit, Name
from .evaluation import ProbUpdate, SymbolicTransition, Update, Variable, VarFeatureModule


def compose_var(m1: VarFeatureModule, m2: VarFeatureModule) -> VarFeatureModule:
    shared_own = m1.own & m2.own
    if shared_own:
        raise CompositionError(f"modules share own features {sorted(shared_own)}")
    shared_vars = set(m1.var_names) & set(m2.var_names)
    if shared_vars:
        raise CompositionError(f"modules share local variables {sorted(shared_vars)}")
    own = m1.own | m2.own
    ext = (m1.ext | m2.ext) - own
    common = m1.actions & m2.actions

    out: t.List[SymbolicTransition] = []
    for tr in m1.transitions + m2.transitions:
        if tr.action is not None and tr.action not in common:
            out.append(tr)
    for a in m1.transitions:
        if a.action is None or a.action not in common:
            continue
        for b in m2.transitions:
            if b.action == a.action:
                out.append(_merge(a, b, a.action, None))
    f1, f2 = frame(m1.own), frame(m2.own)
    sw1 = [tr for tr in m1.transitions if tr.is_switch]
    sw2 = [tr for tr in m2.transitions if tr.is_switch]
    for tr in sw1:
        out.append(SymbolicTransition(tr.guard, None, conj(tr.rho, f2), tr.cost, tr.update, tr.origin))
    for tr in sw2:
        out.append(SymbolicTransition(tr.guard, None, conj(tr.rho, f1), tr.cost, tr.update, tr.origin))
    for a in sw1:
        for b in sw2:
            out.append(_merge(a, b, None, conj(a.rho, b.rho)))

    local = m1.variables + m2.variables
    names = {v.name for v in local}
    external: t.Dict[str, Variable] = {}
    for v in m1.external + m2.external:
        if v.name not in names:
            external.setdefault(v.name, v)
    name = f"({m1.name}||{m2.name})" if m1.name or m2.name else ""
    return VarFeatureModule(
        local,
        FeatureInterface(own, ext),
        m1.actions | m2.actions,
        tuple(out),
        conj(m1.init, m2.init),
        tuple(external.values()),
        name=name,
    )


def _merge(a: SymbolicTransition, b: SymbolicTransition, action: str | None, rho: t.Any) -> SymbolicTransition:
    origin = f"{a.origin}*{b.origin}" if a.origin or b.origin else ""
    return SymbolicTransition(conj(a.guard, b.guard), action, rho, a.cost + b.cost, a.update * b.update, origin)


def compose_all_var(modules: t.Sequence[VarFeatureModule]) -> VarFeatureModule:
    if not modules:
        raise CompositionError("nothing to compose")
    result = modules[0]
    for m in modules[1:]:
        result = compose_var(result, m)
    return result


def location_name(loc: t.Any, index: int) -> str:
    # Enumeration values must be identifiers; locations in general are not.
    return f"l{index}"


def encode_feature_module(m: FeatureModule, var: str = "loc") -> t.Tuple[VarFeatureModule, t.Dict[t.Any, str]]:
    """Express a data-abstract module with one enumeration variable for its location.

    Returns the variable module and the location-to-literal map. A module
    with a single location needs no variable at all and gets none.
    """
    literals = {loc: location_name(loc, i) for i, loc in enumerate(m.locations)}
    single = len(m.locations) == 1

    def at(loc: t.Any) -> t.Any:
        return TRUE if single else BinOp("=", Name(var), EnumLit(literals[loc]))

    def moves_to(dist: t.Any) -> ProbUpdate:
        if single:
            return ProbUpdate(((Fraction(1), Update()),))
        return ProbUpdate(tuple((p, Update(((var, EnumLit(literals[l])),))) for l, p in dist.items()))

    transitions = []
    for i, tr in enumerate(m.tr_act):
        transitions.append(
            SymbolicTransition(conj(at(tr.source), tr.guard), tr.action, None, tr.cost, moves_to(tr.target), f"act{i}")
        )
    for i, tr in enumerate(m.tr_sw):
        transitions.append(
            SymbolicTransition(conj(at(tr.source), tr.guard), None, tr.rho, tr.cost, moves_to(tr.target), f"sw{i}")
        )
    if single:
        variables: t.Tuple[Variable, ...] = ()
        init = TRUE if m.initial else FALSE
    else:
        variables = (Variable(var, "enum", values=tuple(literals[l] for l in m.locations)),)
        init = disj_of(*(at(l) for l in m.initial))
    return (
        VarFeatureModule(variables, m.interface, m.actions, tuple(transitions), init, (), name=m.name),
        literals,
    )
