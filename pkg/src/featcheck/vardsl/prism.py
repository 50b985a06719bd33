"""Export of an elaborated system as PRISM-language text.

The translation is syntactic and best effort: features become boolean
variables of a controller module, enumerations become integers, and every
switch event is paired statically with the module switch commands that may
react to it. The result is not checked against PRISM itself.
"""

from __future__ import annotations

import itertools
import typing as t

from ..core import And, Atom, BoolConst, BoolExpr, Iff, Implies, Not, Or
from .ast import BinOp, Call, EnumLit, Int, Ite, Name
from .elaborate import System
from .evaluation import SymbolicTransition, Variable, VarFeatureModule, compile_value


def _feature_var(f: str) -> str:
    return f"f_{f}"


class _Writer:
    def __init__(self, system: System):
        self.system = system
        self.variables: t.Dict[str, Variable] = {v.name: v for m in system.modules for v in m.variables}

    def lit(self, name: str, var: str | None) -> str:
        if var is not None and var in self.variables and name in self.variables[var].values:
            return str(self.variables[var].values.index(name))
        for v in self.variables.values():
            if name in v.values:
                return str(v.values.index(name))
        return name

    def expr(self, e: BoolExpr, ctx: str | None = None) -> str:
        if isinstance(e, BoolConst):
            return "true" if e.value else "false"
        if isinstance(e, Atom):
            return _feature_var(e.name) + ("'" if e.primed else "")
        if isinstance(e, Int):
            return str(e.value) if e.value >= 0 else f"({e.value})"
        if isinstance(e, Name):
            return e.name
        if isinstance(e, EnumLit):
            return self.lit(e.name, ctx)
        if isinstance(e, Not):
            return f"!({self.expr(e.arg)})"
        if isinstance(e, And):
            return "(" + " & ".join(self.expr(a) for a in e.args) + ")"
        if isinstance(e, Or):
            return "(" + " | ".join(self.expr(a) for a in e.args) + ")"
        if isinstance(e, Implies):
            return f"({self.expr(e.left)} => {self.expr(e.right)})"
        if isinstance(e, Iff):
            return f"({self.expr(e.left)} <=> {self.expr(e.right)})"
        if isinstance(e, Ite):
            return f"({self.expr(e.cond)} ? {self.expr(e.then, ctx)} : {self.expr(e.other, ctx)})"
        if isinstance(e, Call):
            return f"{e.fn}(" + ", ".join(self.expr(a) for a in e.args) + ")"
        if isinstance(e, BinOp):
            side = None
            if isinstance(e.left, Name):
                side = e.left.name
            elif isinstance(e.right, Name):
                side = e.right.name
            return f"({self.expr(e.left, side)} {e.op} {self.expr(e.right, side)})"
        raise TypeError(f"cannot export {e!r}")

    def decl(self, v: Variable) -> str:
        if v.kind == "bool":
            return f"  {v.name} : bool;"
        if v.kind == "int":
            return f"  {v.name} : [{v.lo}..{v.hi}];"
        return f"  {v.name} : [0..{len(v.values) - 1}]; // {', '.join(v.values)}"

    def update(self, tr: SymbolicTransition) -> str:
        parts = []
        for p, u in tr.update.branches:
            if u.assigns:
                body = " & ".join(f"({x}'={self.expr(e, x)})" for x, e in u.assigns)
            else:
                body = "true"
            parts.append(body if len(tr.update.branches) == 1 else f"{p.numerator}/{p.denominator}:{body}")
        return " + ".join(parts)


def _combo_pred(features: t.Sequence[str], c: t.AbstractSet[str]) -> str:
    return " & ".join(_feature_var(f) if f in c else f"!{_feature_var(f)}" for f in features)


def _combo_update(features: t.Sequence[str], c: t.AbstractSet[str]) -> str:
    return " & ".join(f"({_feature_var(f)}'={'true' if f in c else 'false'})" for f in features)


def to_prism(system: System) -> str:
    w = _Writer(system)
    sig = system.signature
    feats = sig.features
    con = system.controller
    lines = ["mdp", ""]
    for name, value in system.consts.items():
        kind = "bool" if isinstance(value, bool) else "int"
        text = ("true" if value else "false") if isinstance(value, bool) else str(value)
        lines.append(f"const {kind} {name} = {text};")
    if system.consts:
        lines.append("")

    # Static pairing of controller events with module switch commands.
    sync: t.Dict[int, t.List[t.Tuple[str, t.Dict[int, SymbolicTransition]]]] = {}
    for i, e in enumerate(con.events):
        targets = e.target.support
        changed = [k for k, m in enumerate(system.modules) if any(c2 & m.own != e.source & m.own for c2 in targets)]
        options: t.List[t.List[SymbolicTransition]] = []
        for k in changed:
            m = system.modules[k]
            adm = []
            for tr in m.transitions:
                if tr.is_switch:
                    rho = compile_value(tr.rho, {})
                    if all(rho(None, e.source, c2) for c2 in targets):
                        adm.append(tr)
            options.append(adm)
        picks = [dict(zip(changed, choice)) for choice in itertools.product(*options)]
        sync[i] = [(f"ev{i}" if len(picks) == 1 else f"ev{i}_{j}", p) for j, p in enumerate(picks)]

    per_module_sync: t.Dict[int, t.List[t.Tuple[str, SymbolicTransition]]] = {}
    for i, entries in sync.items():
        for label, picks in entries:
            for k, tr in picks.items():
                per_module_sync.setdefault(k, []).append((label, tr))

    lines.append("module Con")
    for f in feats:
        lines.append(f"  {_feature_var(f)} : bool;")
    lines.append("")
    for i, e in enumerate(con.events):
        dist = " + ".join(
            f"{p.numerator}/{p.denominator}:{_combo_update(feats, c2)}" if len(e.target) > 1 else _combo_update(feats, c2)
            for c2, p in e.target.items()
        )
        for label, _ in sync[i]:
            lines.append(f"  [{label}] {_combo_pred(feats, e.source)} -> {dist};")
    lines.append("endmodule")
    lines.append("")

    for k, m in enumerate(system.modules):
        lines.extend(_module(w, m, per_module_sync.get(k, [])))
        lines.append("")

    inits = []
    for m in system.modules:
        for v in m.variables:
            if v.init is not None:
                val = v.init
                text = ("true" if val else "false") if isinstance(val, bool) else (
                    str(v.values.index(val)) if v.kind == "enum" else str(val)
                )
                inits.append(f"{v.name}={text}")
        if m.init != BoolConst(True):
            inits.append(w.expr(m.init))
    inits.append("(" + " | ".join(f"({_combo_pred(feats, c)})" for c in con.initial) + ")")
    lines.append("init")
    lines.append("  " + " & ".join(inits))
    lines.append("endinit")
    lines.append("")

    for name, expr in system.labels.items():
        lines.append(f'label "{name}" = {w.expr(expr)};')
    if system.labels:
        lines.append("")

    cost_types = sorted(
        {name for m in system.modules for tr in m.transitions for name in tr.cost}
        | {name for e in con.events for name in e.cost}
    )
    for ct in cost_types:
        lines.append(f'rewards "{ct}"')
        for k, m in enumerate(system.modules):
            for tr in m.transitions:
                if tr.is_switch or not tr.cost.get(ct):
                    continue
                lines.append(f"  [{tr.action}] {w.expr(tr.guard)} : {tr.cost[ct]};")
            for label, tr in per_module_sync.get(k, []):
                if tr.cost.get(ct):
                    lines.append(f"  [{label}] {w.expr(tr.guard)} : {tr.cost[ct]};")
        for i, e in enumerate(con.events):
            if e.cost.get(ct):
                for label, _ in sync[i]:
                    lines.append(f"  [{label}] {_combo_pred(feats, e.source)} : {e.cost[ct]};")
        lines.append("endrewards")
        lines.append("")
    return "\n".join(lines).rstrip() + "\n"


def _module(w: _Writer, m: VarFeatureModule, switches: t.Sequence[t.Tuple[str, SymbolicTransition]]) -> t.List[str]:
    name = m.name or "M"
    out = [f"module {name}"]
    if not m.variables:
        # PRISM modules need at least one variable.
        out.append(f"  {name}_dummy : bool;")
    out.extend(w.decl(v) for v in m.variables)
    out.append("")
    for tr in m.transitions:
        if not tr.is_switch:
            out.append(f"  [{tr.action}] {w.expr(tr.guard)} -> {w.update(tr)};")
    for label, tr in switches:
        out.append(f"  [{label}] {w.expr(tr.guard)} -> {w.update(tr)};")
    out.append("endmodule")
    return out


__all__ = ["to_prism"]
