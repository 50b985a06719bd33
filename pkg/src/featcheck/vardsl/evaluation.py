"""Feature modules with typed variables, and how their expressions evaluate.

Expressions here are elaborated: constants are substituted, names denote
variables only and enumeration literals are :class:`EnumLit` nodes. They are
either interpreted directly (:func:`eval_expr`, the reference semantics) or
compiled to Python closures over valuation tuples for state-space
construction.
"""

from __future__ import annotations

import typing as t
from dataclasses import dataclass, field
from fractions import Fraction

from ..core import (
    TRUE,
    And,
    Atom,
    BoolConst,
    BoolExpr,
    ContractError,
    Distribution,
    Iff,
    Implies,
    Not,
    Or,
)
from ..module_algebra import ZERO, Cost, FeatureInterface
from .ast import BinOp, Call, EnumLit, Int, Ite, ModelRuntimeError, Name, NormalizationError

Value = t.Union[bool, int, str]


@dataclass(frozen=True)
class Variable:
    name: str
    kind: str  # "bool" | "int" | "enum"
    lo: int = 0
    hi: int = 1
    values: t.Tuple[str, ...] = ()
    init: Value | None = None

    def __post_init__(self) -> None:
        if self.kind == "int" and self.lo > self.hi:
            raise ContractError(f"variable {self.name}: empty range [{self.lo}..{self.hi}]")
        if self.kind == "enum" and not self.values:
            raise ContractError(f"variable {self.name}: empty enumeration")
        if self.init is not None and not self.contains(self.init):
            raise ContractError(f"variable {self.name}: initial value {self.init!r} outside its domain")

    @property
    def domain(self) -> t.Tuple[Value, ...]:
        if self.kind == "bool":
            return (False, True)
        if self.kind == "int":
            return tuple(range(self.lo, self.hi + 1))
        return self.values

    def contains(self, v: t.Any) -> bool:
        if self.kind == "bool":
            return isinstance(v, bool)
        if self.kind == "int":
            return isinstance(v, int) and not isinstance(v, bool) and self.lo <= v <= self.hi
        return isinstance(v, str) and v in self.values

    def describe(self) -> str:
        if self.kind == "bool":
            return "bool"
        if self.kind == "int":
            return f"[{self.lo}..{self.hi}]"
        return "{" + ", ".join(self.values) + "}"


@dataclass(frozen=True)
class Update:
    """Simultaneous assignments to pairwise distinct local variables."""

    assigns: t.Tuple[t.Tuple[str, BoolExpr], ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "assigns", tuple(self.assigns))
        names = [v for v, _ in self.assigns]
        if len(set(names)) != len(names):
            raise ContractError(f"update assigns a variable twice: {names}")

    @property
    def variables(self) -> t.FrozenSet[str]:
        return frozenset(v for v, _ in self.assigns)

    def __add__(self, other: Update) -> Update:
        return Update(self.assigns + other.assigns)


@dataclass(frozen=True)
class ProbUpdate:
    branches: t.Tuple[t.Tuple[Fraction, Update], ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "branches", tuple((Fraction(p), u) for p, u in self.branches))
        if not self.branches:
            raise NormalizationError("probabilistic update without branches")
        if any(p <= 0 for p, _ in self.branches):
            raise NormalizationError("update branch with non-positive probability")
        total = sum(p for p, _ in self.branches)
        if total != 1:
            raise NormalizationError(f"update probabilities sum to {total}, not 1")

    def __mul__(self, other: ProbUpdate) -> ProbUpdate:
        return ProbUpdate(tuple((p * q, u + v) for p, u in self.branches for q, v in other.branches))


IDENTITY = ProbUpdate(((Fraction(1), Update()),))


@dataclass(frozen=True)
class SymbolicTransition:
    """A guarded command. ``action`` is ``None`` for switch transitions."""

    guard: BoolExpr
    action: str | None
    rho: BoolExpr | None
    cost: Cost
    update: ProbUpdate
    origin: str = field(default="", compare=False)

    @property
    def is_switch(self) -> bool:
        return self.action is None


@dataclass(frozen=True)
class VarFeatureModule:
    variables: t.Tuple[Variable, ...]
    interface: FeatureInterface
    actions: t.FrozenSet[str]
    transitions: t.Tuple[SymbolicTransition, ...]
    init: BoolExpr = TRUE
    external: t.Tuple[Variable, ...] = ()
    name: str = field(default="", compare=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "variables", tuple(self.variables))
        object.__setattr__(self, "external", tuple(self.external))
        object.__setattr__(self, "actions", frozenset(self.actions))
        object.__setattr__(self, "transitions", tuple(dict.fromkeys(self.transitions)))
        local = [v.name for v in self.variables]
        if len(set(local)) != len(local):
            raise ContractError(f"module {self.name}: duplicate local variables")
        if set(local) & {v.name for v in self.external}:
            raise ContractError(f"module {self.name}: variable both local and external")
        for tr in self.transitions:
            if tr.action is not None and tr.action not in self.actions:
                raise ContractError(f"module {self.name}: action {tr.action!r} not declared")
            for _, u in tr.update.branches:
                foreign = u.variables - set(local)
                if foreign:
                    raise ContractError(
                        f"module {self.name}: {tr.origin or 'transition'} writes non-local variables {sorted(foreign)}"
                    )

    @property
    def own(self) -> t.FrozenSet[str]:
        return self.interface.own

    @property
    def ext(self) -> t.FrozenSet[str]:
        return self.interface.ext

    @property
    def var_names(self) -> t.Tuple[str, ...]:
        return tuple(v.name for v in self.variables)


# ---------------------------------------------------------------------------
# Reference interpretation


def eval_expr(e: BoolExpr, valuation: t.Mapping[str, Value], combination: t.AbstractSet[str] = frozenset()) -> Value:
    if isinstance(e, Int):
        return e.value
    if isinstance(e, BoolConst):
        return e.value
    if isinstance(e, EnumLit):
        return e.name
    if isinstance(e, Name):
        if e.name not in valuation:
            raise ContractError(f"unbound variable {e.name!r}")
        return valuation[e.name]
    if isinstance(e, Atom):
        if e.primed:
            raise ContractError("primed feature atom in a predicate")
        return e.name in combination
    if isinstance(e, Not):
        return not eval_expr(e.arg, valuation, combination)
    if isinstance(e, And):
        return all(eval_expr(a, valuation, combination) for a in e.args)
    if isinstance(e, Or):
        return any(eval_expr(a, valuation, combination) for a in e.args)
    if isinstance(e, Implies):
        return (not eval_expr(e.left, valuation, combination)) or bool(eval_expr(e.right, valuation, combination))
    if isinstance(e, Iff):
        return eval_expr(e.left, valuation, combination) == eval_expr(e.right, valuation, combination)
    if isinstance(e, Ite):
        branch = e.then if eval_expr(e.cond, valuation, combination) else e.other
        return eval_expr(branch, valuation, combination)
    if isinstance(e, Call):
        vals = [eval_expr(a, valuation, combination) for a in e.args]
        return min(vals) if e.fn == "min" else max(vals)
    if isinstance(e, BinOp):
        a = eval_expr(e.left, valuation, combination)
        b = eval_expr(e.right, valuation, combination)
        return _BINOPS[e.op](a, b)
    raise ContractError(f"cannot evaluate {e!r}")


_BINOPS: t.Dict[str, t.Callable[[t.Any, t.Any], t.Any]] = {
    "+": lambda a, b: a + b,
    "-": lambda a, b: a - b,
    "*": lambda a, b: a * b,
    "<": lambda a, b: a < b,
    "<=": lambda a, b: a <= b,
    ">": lambda a, b: a > b,
    ">=": lambda a, b: a >= b,
    "=": lambda a, b: a == b,
    "!=": lambda a, b: a != b,
}


def eval_pred(pred: BoolExpr, valuation: t.Mapping[str, Value], combination: t.AbstractSet[str] = frozenset()) -> bool:
    v = eval_expr(pred, valuation, combination)
    if not isinstance(v, bool):
        raise ContractError(f"predicate evaluated to non-boolean {v!r}")
    return v


class Valuation(t.Mapping[str, Value]):
    """Immutable, hashable assignment of values to variable names."""

    __slots__ = ("_items", "_d")

    def __init__(self, values: t.Mapping[str, Value] | t.Iterable[t.Tuple[str, Value]] = ()):
        d = dict(values.items() if isinstance(values, t.Mapping) else values)
        self._d = d
        self._items = tuple(sorted(d.items()))

    def __getitem__(self, k: str) -> Value:
        return self._d[k]

    def __iter__(self) -> t.Iterator[str]:
        return iter(self._d)

    def __len__(self) -> int:
        return len(self._d)

    def __hash__(self) -> int:
        return hash(self._items)

    def __eq__(self, other: object) -> bool:
        if isinstance(other, Valuation):
            return self._items == other._items
        if isinstance(other, t.Mapping):
            return self._d == dict(other)
        return NotImplemented

    def __repr__(self) -> str:
        return "{" + ", ".join(f"{k}: {v!r}" for k, v in self._items) + "}"


def apply_prob_update(
    pu: ProbUpdate,
    valuation: t.Mapping[str, Value],
    domains: t.Mapping[str, Variable] | None = None,
    combination: t.AbstractSet[str] = frozenset(),
    where: str = "update",
) -> Distribution:
    """The distribution over successor valuations; equal results are merged."""
    out: t.Dict[Valuation, Fraction] = {}
    for p, upd in pu.branches:
        new = dict(valuation)
        for var, e in upd.assigns:
            if var not in valuation:
                raise ContractError(f"{where}: assignment to unknown variable {var!r}")
            val = eval_expr(e, valuation, combination)
            if domains is not None and var in domains and not domains[var].contains(val):
                raise ModelRuntimeError(
                    f"{where}: value {val!r} for variable {var} outside its domain {domains[var].describe()}"
                )
            new[var] = val
        key = Valuation(new)
        out[key] = out.get(key, Fraction(0)) + p
    return Distribution(out)


# ---------------------------------------------------------------------------
# Compilation to closures


def _code(e: BoolExpr, layout: t.Mapping[str, int]) -> str:
    if isinstance(e, Int):
        return repr(e.value)
    if isinstance(e, BoolConst):
        return "True" if e.value else "False"
    if isinstance(e, EnumLit):
        return repr(e.name)
    if isinstance(e, Name):
        if e.name not in layout:
            raise ContractError(f"unbound variable {e.name!r}")
        return f"v[{layout[e.name]}]"
    if isinstance(e, Atom):
        return f"({e.name!r} in {'D' if e.primed else 'C'})"
    if isinstance(e, Not):
        return f"(not {_code(e.arg, layout)})"
    if isinstance(e, And):
        return "(" + " and ".join(_code(a, layout) for a in e.args) + ")"
    if isinstance(e, Or):
        return "(" + " or ".join(_code(a, layout) for a in e.args) + ")"
    if isinstance(e, Implies):
        return f"((not {_code(e.left, layout)}) or {_code(e.right, layout)})"
    if isinstance(e, Iff):
        return f"({_code(e.left, layout)} == {_code(e.right, layout)})"
    if isinstance(e, Ite):
        return f"({_code(e.then, layout)} if {_code(e.cond, layout)} else {_code(e.other, layout)})"
    if isinstance(e, Call):
        return f"{e.fn}(" + ", ".join(_code(a, layout) for a in e.args) + ")"
    if isinstance(e, BinOp):
        op = {"=": "==", "!=": "!="}.get(e.op, e.op)
        return f"({_code(e.left, layout)} {op} {_code(e.right, layout)})"
    raise ContractError(f"cannot compile {e!r}")


def compile_value(e: BoolExpr, layout: t.Mapping[str, int]) -> t.Callable[..., Value]:
    """Compile to ``f(v, C, D=frozenset())`` over a valuation tuple ``v``."""
    src = f"lambda v, C, D=frozenset(): {_code(e, layout)}"
    return eval(src, {"__builtins__": {}, "min": min, "max": max, "frozenset": frozenset})  # noqa: S307


@dataclass(frozen=True)
class CompiledBranch:
    prob: Fraction
    assigns: t.Tuple[t.Tuple[int, t.Callable[..., Value]], ...]


def compile_update(pu: ProbUpdate, layout: t.Mapping[str, int]) -> t.Tuple[CompiledBranch, ...]:
    return tuple(
        CompiledBranch(p, tuple((layout[var], compile_value(e, layout)) for var, e in u.assigns))
        for p, u in pu.branches
    )


def run_update(
    branches: t.Sequence[CompiledBranch],
    v: t.Tuple[Value, ...],
    C: t.AbstractSet[str],
    variables: t.Sequence[Variable],
    where: str,
) -> t.Dict[t.Tuple[Value, ...], Fraction]:
    out: t.Dict[t.Tuple[Value, ...], Fraction] = {}
    for b in branches:
        if b.assigns:
            new = list(v)
            for idx, fn in b.assigns:
                val = fn(v, C)
                if not variables[idx].contains(val):
                    var = variables[idx]
                    raise ModelRuntimeError(
                        f"{where}: value {val!r} for variable {var.name} outside its domain {var.describe()}"
                    )
                new[idx] = val
            key = tuple(new)
        else:
            key = v
        out[key] = out.get(key, Fraction(0)) + b.prob
    return out


def cost_of(items: t.Iterable[t.Tuple[str, int]]) -> Cost:
    items = list(items)
    return Cost(items) if items else ZERO
