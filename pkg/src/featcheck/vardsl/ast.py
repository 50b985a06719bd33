"""Syntax trees for ``.fdsl`` model files.

Boolean connectives and feature atoms reuse the nodes of :mod:`featcheck.core`;
the classes below add integer arithmetic, comparisons and names. Source
positions never take part in equality, so a reprinted and reparsed file
compares equal to the original.
"""

from __future__ import annotations

import typing as t
from dataclasses import dataclass, field
from fractions import Fraction

from ..core import Atom, BoolConst, BoolExpr, ContractError


class ModelError(ContractError):
    """Problem in a model file, optionally with a source position."""

    def __init__(self, message: str, line: int | None = None, col: int | None = None):
        self.message = message
        self.line = line
        self.col = col
        where = f"line {line}" + (f", column {col}" if col is not None else "") + ": " if line else ""
        super().__init__(where + message)


class DslSyntaxError(ModelError):
    pass


class DslTypeError(ModelError):
    pass


class DslScopeError(ModelError):
    pass


class NormalizationError(ModelError):
    pass


class ModelRuntimeError(ModelError):
    """An update produced a value outside its variable's domain."""


class Expr(BoolExpr):
    __slots__ = ()

    def children(self) -> t.Tuple[BoolExpr, ...]:
        return ()


@dataclass(frozen=True)
class Int(Expr):
    value: int


@dataclass(frozen=True)
class Name(Expr):
    """A variable, constant, label or enum literal; resolved by context."""

    name: str


@dataclass(frozen=True)
class EnumLit(Expr):
    name: str


@dataclass(frozen=True)
class BinOp(Expr):
    op: str
    left: BoolExpr
    right: BoolExpr

    def children(self) -> t.Tuple[BoolExpr, ...]:
        return (self.left, self.right)


@dataclass(frozen=True)
class Call(Expr):
    fn: str
    args: t.Tuple[BoolExpr, ...]

    def children(self) -> t.Tuple[BoolExpr, ...]:
        return self.args


@dataclass(frozen=True)
class Ite(Expr):
    cond: BoolExpr
    then: BoolExpr
    other: BoolExpr

    def children(self) -> t.Tuple[BoolExpr, ...]:
        return (self.cond, self.then, self.other)


ARITH = ("+", "-", "*")
COMPARE = ("<", "<=", ">", ">=", "=", "!=")


def children(e: BoolExpr) -> t.Tuple[BoolExpr, ...]:
    from ..core import And, Iff, Implies, Not, Or

    if isinstance(e, (And, Or)):
        return e.args
    if isinstance(e, Not):
        return (e.arg,)
    if isinstance(e, (Implies, Iff)):
        return (e.left, e.right)
    if isinstance(e, Expr):
        return e.children()
    return ()


def transform(e: BoolExpr, fn: t.Callable[[BoolExpr], BoolExpr | None]) -> BoolExpr:
    """Bottom-up rewrite; ``fn`` returns a replacement or ``None`` to keep."""
    from ..core import And, Iff, Implies, Not, Or

    if isinstance(e, And):
        e = And(tuple(transform(a, fn) for a in e.args))
    elif isinstance(e, Or):
        e = Or(tuple(transform(a, fn) for a in e.args))
    elif isinstance(e, Not):
        e = Not(transform(e.arg, fn))
    elif isinstance(e, Implies):
        e = Implies(transform(e.left, fn), transform(e.right, fn))
    elif isinstance(e, Iff):
        e = Iff(transform(e.left, fn), transform(e.right, fn))
    elif isinstance(e, BinOp):
        e = BinOp(e.op, transform(e.left, fn), transform(e.right, fn))
    elif isinstance(e, Call):
        e = Call(e.fn, tuple(transform(a, fn) for a in e.args))
    elif isinstance(e, Ite):
        e = Ite(transform(e.cond, fn), transform(e.then, fn), transform(e.other, fn))
    out = fn(e)
    return e if out is None else out


def names(e: BoolExpr) -> t.Set[str]:
    found: t.Set[str] = set()
    stack = [e]
    while stack:
        x = stack.pop()
        if isinstance(x, Name):
            found.add(x.name)
        stack.extend(children(x))
    return found


# ---------------------------------------------------------------------------
# Declarations


@dataclass(frozen=True)
class ConstDecl:
    name: str
    value: BoolExpr
    line: int = field(default=0, compare=False)


@dataclass(frozen=True)
class SignatureDecl:
    features: t.Tuple[str, ...]
    valid: t.Tuple[t.Tuple[str, ...], ...] | None = None
    constraint: BoolExpr | None = None
    line: int = field(default=0, compare=False)


@dataclass(frozen=True)
class VarDecl:
    name: str
    kind: str  # "bool" | "int" | "enum"
    lo: BoolExpr | None = None
    hi: BoolExpr | None = None
    values: t.Tuple[str, ...] = ()
    init: BoolExpr | None = None
    line: int = field(default=0, compare=False)


@dataclass(frozen=True)
class Assign:
    var: str
    expr: BoolExpr


@dataclass(frozen=True)
class Branch:
    prob: Fraction
    assigns: t.Tuple[Assign, ...]


@dataclass(frozen=True)
class CommandDecl:
    """``[action] guard -> branches cost ...;`` or ``[switch "rho"] ...``."""

    action: str | None
    rho: BoolExpr | None
    guard: BoolExpr
    branches: t.Tuple[Branch, ...]
    cost: t.Tuple[t.Tuple[str, BoolExpr], ...] = ()
    line: int = field(default=0, compare=False)

    @property
    def is_switch(self) -> bool:
        return self.action is None


@dataclass(frozen=True)
class ModuleDecl:
    name: str
    owns: t.Tuple[str, ...]
    uses: t.Tuple[str, ...]
    variables: t.Tuple[VarDecl, ...]
    init: BoolExpr | None
    commands: t.Tuple[CommandDecl, ...]
    line: int = field(default=0, compare=False)


@dataclass(frozen=True)
class EventDecl:
    source: t.Tuple[str, ...]
    targets: t.Tuple[t.Tuple[Fraction, t.Tuple[str, ...]], ...]
    cost: t.Tuple[t.Tuple[str, BoolExpr], ...] = ()
    line: int = field(default=0, compare=False)


@dataclass(frozen=True)
class ControllerDecl:
    kind: str  # "explicit" | "static" | "de"
    init: t.Tuple[t.Tuple[str, ...], ...] | None = None  # None means all valid
    events: t.Tuple[EventDecl, ...] = ()
    dynamic: t.Tuple[str, ...] = ()
    environment: t.Tuple[str, ...] = ()
    line: int = field(default=0, compare=False)


@dataclass(frozen=True)
class LabelDecl:
    name: str
    expr: BoolExpr
    line: int = field(default=0, compare=False)


@dataclass(frozen=True)
class QueryDecl:
    name: str
    op: str  # "Pmax" | "Pmin" | "Emin" | "Emax"
    target: BoolExpr
    constraint: BoolExpr | None = None
    cost_type: str | None = None
    threshold: t.Tuple[str, Fraction] | None = None
    line: int = field(default=0, compare=False)


@dataclass(frozen=True)
class ModelFile:
    consts: t.Tuple[ConstDecl, ...]
    signature: SignatureDecl
    modules: t.Tuple[ModuleDecl, ...]
    controller: ControllerDecl
    labels: t.Tuple[LabelDecl, ...] = ()
    queries: t.Tuple[QueryDecl, ...] = ()


__all__ = [
    "ARITH",
    "COMPARE",
    "Assign",
    "Atom",
    "BinOp",
    "BoolConst",
    "Branch",
    "Call",
    "CommandDecl",
    "ConstDecl",
    "ControllerDecl",
    "DslScopeError",
    "DslSyntaxError",
    "DslTypeError",
    "EnumLit",
    "EventDecl",
    "Expr",
    "Int",
    "Ite",
    "LabelDecl",
    "ModelError",
    "ModelFile",
    "ModelRuntimeError",
    "ModuleDecl",
    "Name",
    "NormalizationError",
    "QueryDecl",
    "SignatureDecl",
    "VarDecl",
    "children",
    "names",
    "transform",
]
