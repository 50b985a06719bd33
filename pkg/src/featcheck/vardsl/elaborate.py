"""From syntax trees to checked variable modules, controllers and queries."""

from __future__ import annotations

import typing as t
from dataclasses import dataclass, field
from fractions import Fraction

from ..analysis import Query, QueryKind
from ..controller import Controller, SwitchEvent, de_controller, static_controller, validate_controller
from ..core import (
    TRUE,
    Atom,
    BoolConst,
    BoolExpr,
    ContractError,
    Distribution,
    FeatureSignature,
    Not,
    all_combinations,
    check_identifier,
)
from ..module_algebra import Cost, FeatureInterface
from ..semantics import Mdp
from .ast import (
    ARITH,
    BinOp,
    Call,
    CommandDecl,
    ControllerDecl,
    DslScopeError,
    DslTypeError,
    EnumLit,
    Int,
    Ite,
    ModelError,
    ModelFile,
    ModuleDecl,
    Name,
    QueryDecl,
    VarDecl,
    children,
    transform,
)
from .evaluation import (
    ProbUpdate,
    SymbolicTransition,
    Update,
    Value,
    Variable,
    VarFeatureModule,
    compile_value,
    eval_expr,
)

_QUERY_KINDS = {
    ("Pmax", False): QueryKind.PMAX_REACH,
    ("Pmax", True): QueryKind.PMAX_UNTIL,
    ("Pmin", False): QueryKind.PMIN_REACH,
    ("Pmin", True): QueryKind.PMIN_UNTIL,
    ("Emin", False): QueryKind.EMIN_REACH,
    ("Emax", False): QueryKind.EMAX_REACH,
}


@dataclass(frozen=True)
class QuerySpec:
    name: str
    kind: QueryKind
    target: BoolExpr
    constraint: BoolExpr | None = None
    cost_type: str | None = None
    threshold: t.Tuple[str, Fraction] | None = None


@dataclass
class System:
    """An elaborated model file, ready to be joined and analysed."""

    signature: FeatureSignature
    modules: t.Tuple[VarFeatureModule, ...]
    controller: Controller
    labels: t.Dict[str, BoolExpr] = field(default_factory=dict)
    queries: t.Tuple[QuerySpec, ...] = ()
    consts: t.Dict[str, Value] = field(default_factory=dict)

    def build(self, reachable_only: bool = True) -> Mdp:
        from .join import join_system

        return join_system(self.modules, self.controller, reachable_only)

    def composed(self) -> VarFeatureModule:
        from .compose import compose_all_var

        return compose_all_var(self.modules)

    def predicate(self, expr: BoolExpr, mdp: Mdp) -> t.Callable[[t.Any], bool]:
        layout = {name: i for i, name in enumerate(mdp.variables)}
        fn = compile_value(expr, layout)
        return lambda state: bool(fn(state[0], state[1]))

    def query(self, spec: QuerySpec | str, mdp: Mdp) -> Query:
        if isinstance(spec, str):
            spec = self.query_spec(spec)
        target = self.predicate(spec.target, mdp)
        constraint = self.predicate(spec.constraint, mdp) if spec.constraint is not None else None
        thr = (spec.threshold[0], float(spec.threshold[1])) if spec.threshold else None
        return Query(spec.kind, target, spec.cost_type, constraint, thr, spec.name)

    def query_spec(self, name: str) -> QuerySpec:
        for q in self.queries:
            if q.name == name:
                return q
        raise ContractError(f"no query named {name!r}")


# ---------------------------------------------------------------------------
# Types

BOOL = "bool"
INT = "int"


def _type_name(ty: t.Any) -> str:
    if isinstance(ty, tuple) and ty[0] == "enum":
        return "{" + ", ".join(ty[1]) + "}"
    if isinstance(ty, tuple):
        return f"enum literal {ty[1]}"
    return ty


def type_of(e: BoolExpr, variables: t.Mapping[str, Variable], line: int = 0) -> t.Any:
    """``"bool"``, ``"int"``, ``("enum", values)`` or ``("lit", name)``."""

    def fail(msg: str) -> t.NoReturn:
        raise DslTypeError(msg, line)

    def expect(x: BoolExpr, want: str) -> None:
        got = go(x)
        if got != want:
            fail(f"expected {want} expression, got {_type_name(got)}")

    def go(x: BoolExpr) -> t.Any:
        if isinstance(x, Int):
            return INT
        if isinstance(x, (BoolConst, Atom)):
            return BOOL
        if isinstance(x, EnumLit):
            return ("lit", x.name)
        if isinstance(x, Name):
            v = variables[x.name]
            return ("enum", v.values) if v.kind == "enum" else v.kind
        if isinstance(x, Ite):
            expect(x.cond, BOOL)
            a, b = go(x.then), go(x.other)
            if not compatible(a, b):
                fail(f"branches of conditional have types {_type_name(a)} and {_type_name(b)}")
            return a if not (isinstance(a, tuple) and a[0] == "lit") else b
        if isinstance(x, Call):
            for a in x.args:
                expect(a, INT)
            return INT
        if isinstance(x, BinOp):
            if x.op in ARITH:
                expect(x.left, INT)
                expect(x.right, INT)
                return INT
            if x.op in ("<", "<=", ">", ">="):
                expect(x.left, INT)
                expect(x.right, INT)
                return BOOL
            a, b = go(x.left), go(x.right)
            if not compatible(a, b):
                fail(f"cannot compare {_type_name(a)} with {_type_name(b)}")
            return BOOL
        for c in children(x):
            expect(c, BOOL)
        return BOOL

    return go(e)


def compatible(a: t.Any, b: t.Any) -> bool:
    if a == b:
        return True
    if isinstance(a, tuple) and isinstance(b, tuple):
        if a[0] == "enum" and b[0] == "lit":
            return b[1] in a[1]
        if a[0] == "lit" and b[0] == "enum":
            return a[1] in b[1]
    return False


def _var_type(v: Variable) -> t.Any:
    return ("enum", v.values) if v.kind == "enum" else v.kind


# ---------------------------------------------------------------------------
# Elaboration


class _Scope:
    def __init__(self) -> None:
        self.consts: t.Dict[str, Value] = {}
        self.variables: t.Dict[str, Variable] = {}
        self.owner: t.Dict[str, str] = {}
        self.literals: t.Set[str] = set()
        self.labels: t.Dict[str, BoolExpr] = {}

    def resolve(
        self,
        e: BoolExpr,
        line: int,
        features: t.AbstractSet[str] | None,
        allow_vars: bool = True,
        allow_labels: bool = False,
        what: str = "expression",
    ) -> BoolExpr:
        def fix(x: BoolExpr) -> BoolExpr | None:
            if isinstance(x, Atom):
                if x.primed:
                    raise DslScopeError(f"primed feature {x.name} in {what}", line)
                if features is not None and x.name not in features:
                    raise DslScopeError(f"feature {x.name} in {what} is not visible here", line)
                return None
            if not isinstance(x, Name):
                return None
            n = x.name
            if n in self.variables:
                if not allow_vars:
                    raise DslScopeError(f"variable {n} may not appear in {what}", line)
                return None
            if n in self.consts:
                val = self.consts[n]
                return BoolConst(val) if isinstance(val, bool) else Int(val)
            if allow_labels and n in self.labels:
                return self.labels[n]
            if n in self.literals:
                return EnumLit(n)
            raise DslScopeError(f"unknown identifier {n!r} in {what}", line)

        return transform(e, fix)

    def constant(self, e: BoolExpr, line: int, what: str) -> Value:
        r = self.resolve(e, line, frozenset(), allow_vars=False, what=what)
        try:
            return eval_expr(r, {}, frozenset())
        except ContractError as exc:
            raise DslTypeError(f"{what} is not a constant: {exc}", line) from None

    def natural(self, e: BoolExpr, line: int, what: str) -> int:
        v = self.constant(e, line, what)
        if isinstance(v, bool) or not isinstance(v, int):
            raise DslTypeError(f"{what} must be an integer, got {v!r}", line)
        if v < 0:
            raise DslTypeError(f"{what} must be nonnegative, got {v}", line)
        return v


def parse_override(text: str) -> t.Tuple[str, Value]:
    """Parse ``NAME=VALUE`` as given on the command line."""
    name, sep, raw = text.partition("=")
    name, raw = name.strip(), raw.strip()
    if not sep or not name:
        raise ModelError(f"constant override {text!r} is not of the form NAME=VALUE")
    if raw in ("true", "false"):
        return name, raw == "true"
    try:
        return name, int(raw)
    except ValueError:
        raise ModelError(f"constant override {text!r}: value must be an integer or true/false") from None


def _costs(scope: _Scope, items: t.Sequence[t.Tuple[str, BoolExpr]], line: int) -> Cost:
    out = []
    for name, e in items:
        check_identifier(name, "cost type")
        out.append((name, scope.natural(e, line, f"cost {name}")))
    return Cost(out)


def _variable(scope: _Scope, d: VarDecl) -> Variable:
    lo = hi = 0
    if d.kind == "int":
        lo = scope.constant(d.lo, d.line, f"lower bound of {d.name}")
        hi = scope.constant(d.hi, d.line, f"upper bound of {d.name}")
        if isinstance(lo, bool) or isinstance(hi, bool) or not isinstance(lo, int) or not isinstance(hi, int):
            raise DslTypeError(f"bounds of {d.name} must be integers", d.line)
        if lo > hi:
            raise DslTypeError(f"empty range [{lo}..{hi}] for {d.name}", d.line)
    init = None
    if d.init is not None:
        init = scope.constant(d.init, d.line, f"initial value of {d.name}")
    try:
        return Variable(d.name, d.kind, lo, hi, d.values, None if init is None else init)
    except ContractError as exc:
        raise DslTypeError(str(exc), d.line) from None


def _signature(scope: _Scope, tree: ModelFile) -> FeatureSignature:
    sig = tree.signature
    try:
        for f in sig.features:
            check_identifier(f, "feature name")
        if sig.constraint is not None:
            for a in _atoms_of(sig.constraint):
                if a.primed:
                    raise DslScopeError(f"primed feature {a.name} in validity constraint", sig.line)
                if a.name not in sig.features:
                    raise DslScopeError(f"unknown feature {a.name} in validity constraint", sig.line)
            return FeatureSignature.from_constraint(sig.features, sig.constraint)
        if sig.valid is not None:
            for c in sig.valid:
                unknown = set(c) - set(sig.features)
                if unknown:
                    raise DslScopeError(f"valid combination uses unknown features {sorted(unknown)}", sig.line)
            return FeatureSignature(sig.features, frozenset(frozenset(c) for c in sig.valid))
        return FeatureSignature(sig.features, frozenset(all_combinations(sig.features)))
    except ModelError:
        raise
    except ContractError as exc:
        raise ModelError(str(exc), sig.line) from None


def _atoms_of(e: BoolExpr) -> t.List[Atom]:
    out = []
    stack = [e]
    while stack:
        x = stack.pop()
        if isinstance(x, Atom):
            out.append(x)
        stack.extend(children(x))
    return out


def _names_of(e: BoolExpr) -> t.Set[str]:
    out = set()
    stack = [e]
    while stack:
        x = stack.pop()
        if isinstance(x, Name):
            out.add(x.name)
        stack.extend(children(x))
    return out


def _command(
    scope: _Scope, mod: ModuleDecl, c: CommandDecl, own: t.FrozenSet[str], visible: t.FrozenSet[str], used: t.Set[str]
) -> SymbolicTransition:
    label = f"[switch] at line {c.line}" if c.is_switch else f"[{c.action}] at line {c.line}"
    guard = scope.resolve(c.guard, c.line, visible, what=f"guard of {label}")
    if type_of(guard, scope.variables, c.line) != BOOL:
        raise DslTypeError(f"guard of {label} is not a boolean expression", c.line)
    used |= _names_of(guard)
    rho = None
    if c.is_switch:
        for a in _atoms_of(c.rho):
            if a.name not in own:
                raise DslScopeError(f"rho atom outside OwnF: {a.name} in {label}", c.line)
        rho = c.rho
        if type_of(rho, scope.variables, c.line) != BOOL:
            raise DslTypeError(f"switch annotation of {label} is not boolean", c.line)
        if _names_of(rho):
            raise DslScopeError(f"switch annotation of {label} may only mention features", c.line)
    else:
        check_identifier(c.action, "action name")
    branches = []
    for b in c.branches:
        assigns = []
        for a in b.assigns:
            if a.var not in scope.variables:
                raise DslScopeError(f"assignment to unknown variable {a.var} in {label}", c.line)
            if scope.owner[a.var] != mod.name:
                raise DslScopeError(
                    f"module {mod.name} cannot write variable {a.var} of module {scope.owner[a.var]} "
                    f"(external variables can only appear in guards and expressions)",
                    c.line,
                )
            rhs = scope.resolve(a.expr, c.line, visible, what=f"update of {a.var} in {label}")
            var = scope.variables[a.var]
            got = type_of(rhs, scope.variables, c.line)
            if not compatible(_var_type(var), got):
                raise DslTypeError(
                    f"cannot assign {_type_name(got)} expression to {a.var} of type {var.describe()} in {label}",
                    c.line,
                )
            used |= _names_of(rhs)
            assigns.append((a.var, rhs))
        try:
            branches.append((b.prob, Update(tuple(assigns))))
        except ContractError as exc:
            raise DslScopeError(f"{label}: {exc}", c.line) from None
    return SymbolicTransition(
        guard, c.action, rho, _costs(scope, c.cost, c.line), ProbUpdate(tuple(branches)), label
    )


def _module(scope: _Scope, sig: FeatureSignature, mod: ModuleDecl) -> VarFeatureModule:
    features = set(sig.features)
    for f in mod.owns + mod.uses:
        if f not in features:
            raise DslScopeError(f"module {mod.name} refers to unknown feature {f}", mod.line)
    try:
        interface = FeatureInterface(frozenset(mod.owns), frozenset(mod.uses))
    except ContractError as exc:
        raise ModelError(f"module {mod.name}: {exc}", mod.line) from None
    visible = interface.features
    used: t.Set[str] = set()
    transitions = [_command(scope, mod, c, interface.own, visible, used) for c in mod.commands]
    local = tuple(scope.variables[v.name] for v in mod.variables)
    local_names = {v.name for v in local}
    init = TRUE
    line = mod.line
    if mod.init is not None:
        init = scope.resolve(mod.init, line, frozenset(), what=f"init condition of {mod.name}")
        if type_of(init, scope.variables, line) != BOOL:
            raise DslTypeError(f"init condition of {mod.name} is not boolean", line)
        foreign = _names_of(init) - local_names
        if foreign:
            raise DslScopeError(
                f"init condition of {mod.name} mentions non-local variables {sorted(foreign)}", line
            )
    external = tuple(scope.variables[n] for n in sorted(used - local_names))
    actions = frozenset(tr.action for tr in transitions if tr.action is not None)
    try:
        return VarFeatureModule(local, interface, actions, tuple(transitions), init, external, name=mod.name)
    except ContractError as exc:
        raise ModelError(str(exc), line) from None


def _controller(scope: _Scope, sig: FeatureSignature, d: ControllerDecl) -> Controller:
    features = set(sig.features)

    def combo(names: t.Sequence[str]) -> t.FrozenSet[str]:
        unknown = set(names) - features
        if unknown:
            raise DslScopeError(f"controller mentions unknown features {sorted(unknown)}", d.line)
        return frozenset(names)

    try:
        if d.kind == "static":
            return static_controller(sig)
        if d.kind == "de":
            return de_controller(sig, combo(d.dynamic), combo(d.environment))
    except ModelError:
        raise
    except ContractError as exc:
        raise ModelError(str(exc), d.line) from None
    initial = tuple(sig.combinations) if d.init is None else tuple(combo(c) for c in d.init)
    events = []
    for e in d.events:
        target = Distribution({combo(c): p for p, c in e.targets})
        events.append(SwitchEvent(combo(e.source), _costs(scope, e.cost, e.line), target))
    con = Controller(sig, initial, tuple(events))
    problems = validate_controller(con)
    if problems:
        raise ModelError("invalid controller: " + "; ".join(problems), d.line)
    return con


def _query(scope: _Scope, sig: FeatureSignature, q: QueryDecl) -> QuerySpec:
    kind = _QUERY_KINDS.get((q.op, q.constraint is not None))
    if kind is None:
        raise DslTypeError(f"query {q.name}: {q.op} does not take an until formula", q.line)
    features = frozenset(sig.features)

    def pred(e: BoolExpr, what: str) -> BoolExpr:
        r = scope.resolve(e, q.line, features, allow_labels=True, what=what)
        if type_of(r, scope.variables, q.line) != BOOL:
            raise DslTypeError(f"{what} is not boolean", q.line)
        return r

    target = pred(q.target, f"target of query {q.name}")
    constraint = pred(q.constraint, f"constraint of query {q.name}") if q.constraint is not None else None
    if q.cost_type is not None:
        check_identifier(q.cost_type, "cost type")
    return QuerySpec(q.name, kind, target, constraint, q.cost_type, q.threshold)


def elaborate(tree: ModelFile, overrides: t.Mapping[str, Value] | None = None) -> System:
    overrides = dict(overrides or {})
    scope = _Scope()
    declared = {c.name for c in tree.consts}
    unknown = set(overrides) - declared
    if unknown:
        raise ModelError(f"override for undeclared constants {sorted(unknown)}")
    for c in tree.consts:
        if c.name in scope.consts:
            raise DslScopeError(f"constant {c.name} declared twice", c.line)
        value = scope.constant(c.value, c.line, f"constant {c.name}")
        if c.name in overrides:
            new = overrides[c.name]
            if isinstance(new, bool) != isinstance(value, bool):
                raise DslTypeError(f"override for {c.name} has the wrong type", c.line)
            value = new
        scope.consts[c.name] = value
    sig = _signature(scope, tree)

    for mod in tree.modules:
        for v in mod.variables:
            if v.name in scope.owner:
                raise DslScopeError(
                    f"variable {v.name} declared in both {scope.owner[v.name]} and {mod.name}", v.line
                )
            if v.name in scope.consts:
                raise DslScopeError(f"variable {v.name} shadows a constant", v.line)
            scope.owner[v.name] = mod.name
            scope.literals.update(v.values)
    clash = scope.literals & (set(scope.owner) | set(scope.consts))
    if clash:
        raise DslScopeError(f"enumeration values clash with variable or constant names: {sorted(clash)}")
    for mod in tree.modules:
        for v in mod.variables:
            scope.variables[v.name] = _variable(scope, v)
    names = [m.name for m in tree.modules]
    if len(set(names)) != len(names):
        raise DslScopeError("duplicate module names")
    modules = tuple(_module(scope, sig, m) for m in tree.modules)
    owned: t.Dict[str, str] = {}
    for m in modules:
        for f in m.own:
            if f in owned:
                raise ModelError(f"modules {owned[f]} and {m.name} both own feature {f}")
            owned[f] = m.name
    controller = _controller(scope, sig, tree.controller)

    for lab in tree.labels:
        if lab.name in scope.labels or lab.name in scope.variables or lab.name in scope.consts:
            raise DslScopeError(f"label {lab.name} clashes with an earlier declaration", lab.line)
        e = scope.resolve(lab.expr, lab.line, frozenset(sig.features), allow_labels=True, what=f"label {lab.name}")
        if type_of(e, scope.variables, lab.line) != BOOL:
            raise DslTypeError(f"label {lab.name} is not boolean", lab.line)
        scope.labels[lab.name] = e
    queries = []
    seen: t.Set[str] = set()
    for q in tree.queries:
        if q.name in seen:
            raise DslScopeError(f"query {q.name} declared twice", q.line)
        seen.add(q.name)
        queries.append(_query(scope, sig, q))
    return System(sig, modules, controller, dict(scope.labels), tuple(queries), dict(scope.consts))


def load_system(text: str, overrides: t.Mapping[str, Value] | None = None) -> System:
    from .parser import parse_syntax

    return elaborate(parse_syntax(text), overrides)


__all__ = ["QuerySpec", "System", "elaborate", "load_system", "parse_override", "type_of", "Not"]
