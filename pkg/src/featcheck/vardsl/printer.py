"""Pretty-printer producing the normal form of ``.fdsl`` files.

Parentheses are emitted exactly where the parser's precedence would
otherwise regroup the tree, so printing then parsing is the identity on
syntax trees.
"""

from __future__ import annotations

import typing as t
from fractions import Fraction

from ..core import And, Atom, BoolConst, BoolExpr, Iff, Implies, Not, Or
from .ast import (
    BinOp,
    Branch,
    Call,
    CommandDecl,
    ControllerDecl,
    EnumLit,
    EventDecl,
    Int,
    Ite,
    ModelFile,
    ModuleDecl,
    Name,
    QueryDecl,
    VarDecl,
)

_PREC = {"ite": 1, "iff": 2, "implies": 3, "or": 4, "and": 5, "not": 6, "cmp": 7, "add": 8, "mul": 9, "atom": 10}


def _prec(e: BoolExpr) -> int:
    if isinstance(e, Ite):
        return _PREC["ite"]
    if isinstance(e, Iff):
        return _PREC["iff"]
    if isinstance(e, Implies):
        return _PREC["implies"]
    if isinstance(e, Or):
        return _PREC["or"]
    if isinstance(e, And):
        return _PREC["and"]
    if isinstance(e, Not):
        return _PREC["not"]
    if isinstance(e, BinOp):
        if e.op in ("+", "-"):
            return _PREC["add"]
        if e.op == "*":
            return _PREC["mul"]
        return _PREC["cmp"]
    return _PREC["atom"]


def format_expr(e: BoolExpr, features_mode: bool = False) -> str:
    def go(x: BoolExpr, need: int) -> str:
        s = render(x)
        return f"({s})" if _prec(x) < need else s

    def render(x: BoolExpr) -> str:
        if isinstance(x, BoolConst):
            return "true" if x.value else "false"
        if isinstance(x, Atom):
            if features_mode:
                return x.name + ("'" if x.primed else "")
            if x.primed:
                raise ValueError("primed feature atom outside a switch annotation")
            return f"feat({x.name})"
        if isinstance(x, Int):
            return str(x.value)
        if isinstance(x, (Name, EnumLit)):
            return x.name
        if isinstance(x, Not):
            return "!" + go(x.arg, _PREC["not"])
        if isinstance(x, And):
            return " & ".join(go(a, _PREC["and"] + 1) for a in x.args)
        if isinstance(x, Or):
            return " | ".join(go(a, _PREC["or"] + 1) for a in x.args)
        if isinstance(x, Implies):
            return f"{go(x.left, _PREC['or'])} => {go(x.right, _PREC['implies'])}"
        if isinstance(x, Iff):
            return f"{go(x.left, _PREC['iff'])} <=> {go(x.right, _PREC['implies'])}"
        if isinstance(x, Ite):
            return f"{go(x.cond, _PREC['iff'])} ? {go(x.then, _PREC['ite'])} : {go(x.other, _PREC['ite'])}"
        if isinstance(x, Call):
            return f"{x.fn}(" + ", ".join(go(a, _PREC["ite"]) for a in x.args) + ")"
        if isinstance(x, BinOp):
            p = _prec(x)
            if p == _PREC["cmp"]:
                return f"{go(x.left, p + 1)} {x.op} {go(x.right, p + 1)}"
            return f"{go(x.left, p)} {x.op} {go(x.right, p + 1)}"
        raise TypeError(f"cannot print {x!r}")

    return render(e)


def format_prob(p: Fraction) -> str:
    return str(p.numerator) if p.denominator == 1 else f"{p.numerator}/{p.denominator}"


def _combo(c: t.Sequence[str]) -> str:
    return "{" + ", ".join(c) + "}"


def _costs(cost: t.Sequence[t.Tuple[str, BoolExpr]]) -> str:
    return ", ".join(f"{name} {format_expr(e)}" for name, e in cost)


def _update(assigns: t.Sequence[t.Any]) -> str:
    if not assigns:
        return "true"
    return " & ".join(f"({a.var}' = {format_expr(a.expr)})" for a in assigns)


def _branches(bs: t.Sequence[Branch]) -> str:
    if len(bs) == 1 and bs[0].prob == 1:
        return _update(bs[0].assigns)
    return " + ".join(f"{format_prob(b.prob)}: {_update(b.assigns)}" for b in bs)


def _var(v: VarDecl) -> str:
    if v.kind == "bool":
        ty = "bool"
    elif v.kind == "int":
        ty = f"[{format_expr(v.lo)}..{format_expr(v.hi)}]"
    else:
        ty = _combo(v.values)
    init = f" init {format_expr(v.init)}" if v.init is not None else ""
    return f"var {v.name} : {ty}{init};"


def _command(c: CommandDecl) -> str:
    if c.is_switch:
        head = f'[switch "{format_expr(c.rho, features_mode=True)}"]'
    else:
        head = f"[{c.action}]"
    cost = f" cost {_costs(c.cost)}" if c.cost else ""
    return f"{head} {format_expr(c.guard)} -> {_branches(c.branches)}{cost};"


def _module(m: ModuleDecl) -> t.List[str]:
    head = f"module {m.name}"
    if m.owns:
        head += f" owns({', '.join(m.owns)})"
    if m.uses:
        head += f" uses({', '.join(m.uses)})"
    out = [head + " {"]
    out += ["  " + _var(v) for v in m.variables]
    if m.init is not None:
        out.append(f"  init {format_expr(m.init)};")
    out += ["  " + _command(c) for c in m.commands]
    out.append("}")
    return out


def _event(e: EventDecl) -> str:
    cost = f"cost {_costs(e.cost)} : " if e.cost else ""
    if len(e.targets) == 1 and e.targets[0][0] == 1:
        target = _combo(e.targets[0][1])
    else:
        target = "{" + "; ".join(f"{format_prob(p)}: {_combo(c)}" for p, c in e.targets) + "}"
    return f"event {_combo(e.source)} -> {cost}{target};"


def _controller(c: ControllerDecl) -> t.List[str]:
    if c.kind == "static":
        return ["controller static;"]
    if c.kind == "de":
        return [f"controller de(dynamic: {', '.join(c.dynamic)}; environment: {', '.join(c.environment)});"]
    init = "all" if c.init is None else ", ".join(_combo(x) for x in c.init)
    out = ["controller {", f"  init {init};"]
    out += ["  " + _event(e) for e in c.events]
    out.append("}")
    return out


def _query(q: QueryDecl) -> str:
    op = q.op + (f'{{"{q.cost_type}"}}' if q.cost_type else "")
    if q.constraint is None:
        body = f"F {format_expr(q.target)}"
    else:
        body = f"{format_expr(q.constraint)} U {format_expr(q.target)}"
    thr = f" {q.threshold[0]} {format_prob(q.threshold[1])}" if q.threshold else ""
    return f"query {q.name} : {op} [ {body} ]{thr};"


def format_model(m: ModelFile) -> str:
    out: t.List[str] = []
    for c in m.consts:
        out.append(f"const {c.name} = {format_expr(c.value)};")
    if m.consts:
        out.append("")
    sig = m.signature
    out.append("signature {")
    out.append(f"  features {', '.join(sig.features)};")
    if sig.constraint is not None:
        out.append(f"  valid where {format_expr(sig.constraint, features_mode=True)};")
    elif sig.valid is not None:
        out.append(f"  valid {', '.join(_combo(c) for c in sig.valid)};")
    out.append("}")
    for mod in m.modules:
        out.append("")
        out += _module(mod)
    out.append("")
    out += _controller(m.controller)
    if m.labels:
        out.append("")
        out += [f"label {lab.name} = {format_expr(lab.expr)};" for lab in m.labels]
    if m.queries:
        out.append("")
        out += [_query(q) for q in m.queries]
    return "\n".join(out) + "\n"
