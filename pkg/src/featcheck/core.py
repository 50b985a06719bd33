"""Feature sets, Boolean feature expressions and finite distributions.

Feature combinations are plain ``frozenset``\\ s of feature names. Boolean
expressions are small immutable trees; atoms may be *primed* to talk about
the feature combination after a switch.
"""

from __future__ import annotations

import itertools
import re
import typing as t
from dataclasses import dataclass
from fractions import Fraction

Combination = t.FrozenSet[str]

_IDENT = re.compile(r"[A-Za-z_][A-Za-z0-9_]*\Z")


class ContractError(ValueError):
    """Raised when an operation is called outside its precondition."""


def check_identifier(name: str, what: str = "identifier") -> str:
    if not isinstance(name, str) or not _IDENT.match(name):
        raise ContractError(f"invalid {what} {name!r}")
    return name


def combo(*names: str) -> Combination:
    return frozenset(names)


def format_combination(c: t.Iterable[str], order: t.Sequence[str] | None = None) -> str:
    names = list(c)
    if order is not None:
        rank = {f: i for i, f in enumerate(order)}
        names.sort(key=lambda f: (rank.get(f, len(rank)), f))
    else:
        names.sort()
    return "{" + ", ".join(names) + "}"


# ---------------------------------------------------------------------------
# Boolean expressions


class BoolExpr:
    """Base class of feature expressions.

    Subclasses are frozen dataclasses, so structural equality and hashing
    come for free.
    """

    __slots__ = ()

    def __and__(self, other: BoolExpr) -> BoolExpr:
        return And((self, other))

    def __or__(self, other: BoolExpr) -> BoolExpr:
        return Or((self, other))

    def __invert__(self) -> BoolExpr:
        return Not(self)


@dataclass(frozen=True)
class BoolConst(BoolExpr):
    value: bool


@dataclass(frozen=True)
class Atom(BoolExpr):
    name: str
    primed: bool = False


@dataclass(frozen=True)
class Not(BoolExpr):
    arg: BoolExpr


@dataclass(frozen=True)
class And(BoolExpr):
    args: t.Tuple[BoolExpr, ...]


@dataclass(frozen=True)
class Or(BoolExpr):
    args: t.Tuple[BoolExpr, ...]


@dataclass(frozen=True)
class Implies(BoolExpr):
    left: BoolExpr
    right: BoolExpr


@dataclass(frozen=True)
class Iff(BoolExpr):
    left: BoolExpr
    right: BoolExpr


TRUE = BoolConst(True)
FALSE = BoolConst(False)


def conj(*parts: BoolExpr) -> BoolExpr:
    """Conjunction that drops literal ``true`` operands."""
    kept = tuple(p for p in parts if p != TRUE)
    if not kept:
        return TRUE
    if len(kept) == 1:
        return kept[0]
    return And(kept)


def disj_of(*parts: BoolExpr) -> BoolExpr:
    """Disjunction that drops literal ``false`` operands."""
    kept = tuple(p for p in parts if p != FALSE)
    if not kept:
        return FALSE
    if len(kept) == 1:
        return kept[0]
    return Or(kept)


def frame(features: t.Iterable[str]) -> BoolExpr:
    """The expression ``Y = Y'``, i.e. every feature keeps its value."""
    return conj(*(Iff(Atom(f), Atom(f, True)) for f in sorted(features)))


def atoms(expr: BoolExpr) -> t.Set[Atom]:
    """All atoms of ``expr``; non-feature nodes are traversed generically."""
    found: t.Set[Atom] = set()
    stack = [expr]
    while stack:
        e = stack.pop()
        if isinstance(e, Atom):
            found.add(e)
        elif isinstance(e, (And, Or)):
            stack.extend(e.args)
        elif isinstance(e, Not):
            stack.append(e.arg)
        elif isinstance(e, (Implies, Iff)):
            stack.extend((e.left, e.right))
        else:
            stack.extend(_children(e))
    return found


def _children(e: t.Any) -> t.Sequence[t.Any]:
    # Extension nodes (variable expressions) expose their operands here.
    kids = getattr(e, "children", None)
    return kids() if callable(kids) else ()


def has_primes(expr: BoolExpr) -> bool:
    return any(a.primed for a in atoms(expr))


def feature_names(expr: BoolExpr) -> t.Set[str]:
    return {a.name for a in atoms(expr)}


def evaluate(expr: BoolExpr, now: Combination, after: Combination = frozenset()) -> bool:
    if isinstance(expr, Atom):
        return expr.name in (after if expr.primed else now)
    if isinstance(expr, BoolConst):
        return expr.value
    if isinstance(expr, Not):
        return not evaluate(expr.arg, now, after)
    if isinstance(expr, And):
        return all(evaluate(a, now, after) for a in expr.args)
    if isinstance(expr, Or):
        return any(evaluate(a, now, after) for a in expr.args)
    if isinstance(expr, Implies):
        return (not evaluate(expr.left, now, after)) or evaluate(expr.right, now, after)
    if isinstance(expr, Iff):
        return evaluate(expr.left, now, after) == evaluate(expr.right, now, after)
    raise ContractError(f"not a feature expression: {expr!r}")


def satisfies(combination: t.AbstractSet[str], expr: BoolExpr) -> bool:
    """``combination |= expr`` for an expression without primed atoms."""
    if has_primes(expr):
        raise ContractError("satisfies() called on an expression with primed atoms")
    return evaluate(expr, frozenset(combination))


def switch_holds(rho: BoolExpr, before: t.AbstractSet[str], after: t.AbstractSet[str]) -> bool:
    """Membership of ``(before, after)`` in the relation described by ``rho``."""
    return evaluate(rho, frozenset(before), frozenset(after))


def compile_expr(expr: BoolExpr) -> t.Callable[[Combination, Combination], bool]:
    """Turn an expression into a closure ``f(now, after) -> bool``."""
    if isinstance(expr, Atom):
        name = expr.name
        if expr.primed:
            return lambda now, after: name in after
        return lambda now, after: name in now
    if isinstance(expr, BoolConst):
        v = expr.value
        return lambda now, after: v
    if isinstance(expr, Not):
        f = compile_expr(expr.arg)
        return lambda now, after: not f(now, after)
    if isinstance(expr, And):
        fs = [compile_expr(a) for a in expr.args]
        return lambda now, after: all(f(now, after) for f in fs)
    if isinstance(expr, Or):
        fs = [compile_expr(a) for a in expr.args]
        return lambda now, after: any(f(now, after) for f in fs)
    if isinstance(expr, Implies):
        fl, fr = compile_expr(expr.left), compile_expr(expr.right)
        return lambda now, after: (not fl(now, after)) or fr(now, after)
    if isinstance(expr, Iff):
        fl, fr = compile_expr(expr.left), compile_expr(expr.right)
        return lambda now, after: fl(now, after) == fr(now, after)
    raise ContractError(f"not a feature expression: {expr!r}")


# ---------------------------------------------------------------------------
# Signatures


@dataclass(frozen=True)
class FeatureSignature:
    """An SPL universe: ordered features and the valid combinations."""

    features: t.Tuple[str, ...]
    valid: t.FrozenSet[Combination]

    def __post_init__(self) -> None:
        object.__setattr__(self, "features", tuple(self.features))
        object.__setattr__(self, "valid", frozenset(frozenset(c) for c in self.valid))
        if len(set(self.features)) != len(self.features):
            raise ContractError("duplicate feature names in signature")
        for f in self.features:
            check_identifier(f, "feature name")
        if not self.valid:
            raise ContractError("a signature needs at least one valid combination")
        universe = set(self.features)
        for c in self.valid:
            if not c <= universe:
                raise ContractError(
                    f"valid combination {format_combination(c)} uses unknown features "
                    f"{format_combination(c - universe)}"
                )

    @classmethod
    def from_constraint(cls, features: t.Sequence[str], constraint: BoolExpr = TRUE) -> FeatureSignature:
        valid = [c for c in all_combinations(features) if satisfies(c, constraint)]
        return cls(tuple(features), frozenset(valid))

    def mask(self, c: t.AbstractSet[str]) -> int:
        return sum(1 << i for i, f in enumerate(self.features) if f in c)

    def unmask(self, bits: int) -> Combination:
        return frozenset(f for i, f in enumerate(self.features) if bits >> i & 1)

    @property
    def combinations(self) -> t.List[Combination]:
        """Valid combinations in canonical (bitmask) order."""
        return sorted(self.valid, key=self.mask)

    def format(self, c: t.AbstractSet[str]) -> str:
        return format_combination(c, self.features)


def all_combinations(features: t.Sequence[str]) -> t.List[Combination]:
    feats = list(features)
    out = []
    for bits in range(1 << len(feats)):
        out.append(frozenset(f for i, f in enumerate(feats) if bits >> i & 1))
    return out


# ---------------------------------------------------------------------------
# Distributions


def as_fraction(p: t.Any) -> Fraction:
    if isinstance(p, Fraction):
        return p
    if isinstance(p, float):
        # Floats are accepted only through their decimal spelling.
        return Fraction(repr(p))
    return Fraction(p)


class Distribution:
    """Finite-support probability distribution with exact rational weights."""

    __slots__ = ("_p", "_hash")

    def __init__(self, weights: t.Union[t.Mapping[t.Any, t.Any], t.Iterable[t.Tuple[t.Any, t.Any]]]):
        items = weights.items() if isinstance(weights, t.Mapping) else weights
        p: t.Dict[t.Any, Fraction] = {}
        for outcome, w in items:
            w = as_fraction(w)
            if w <= 0:
                raise ContractError(f"probability of {outcome!r} must be positive, got {w}")
            p[outcome] = p.get(outcome, Fraction(0)) + w
        if not p:
            raise ContractError("distribution with empty support")
        total = sum(p.values())
        if total != 1:
            raise ContractError(f"distribution not normalized: probabilities sum to {total}")
        self._p = p
        self._hash: int | None = None

    def prob(self, outcome: t.Any) -> Fraction:
        return self._p.get(outcome, Fraction(0))

    @property
    def support(self) -> t.Tuple[t.Any, ...]:
        return tuple(self._p)

    def items(self) -> t.ItemsView[t.Any, Fraction]:
        return self._p.items()

    def map(self, fn: t.Callable[[t.Any], t.Any]) -> Distribution:
        merged: t.Dict[t.Any, Fraction] = {}
        for x, w in self._p.items():
            y = fn(x)
            merged[y] = merged.get(y, Fraction(0)) + w
        return Distribution(merged)

    def __len__(self) -> int:
        return len(self._p)

    def __iter__(self) -> t.Iterator[t.Any]:
        return iter(self._p)

    def __eq__(self, other: object) -> bool:
        return isinstance(other, Distribution) and self._p == other._p

    def __hash__(self) -> int:
        if self._hash is None:
            self._hash = hash(frozenset(self._p.items()))
        return self._hash

    def __repr__(self) -> str:
        body = ", ".join(f"{x!r}: {w}" for x, w in self._p.items())
        return f"Distribution({{{body}}})"


def dirac(outcome: t.Any) -> Distribution:
    return Distribution({outcome: Fraction(1)})


def product(d1: Distribution, d2: Distribution) -> Distribution:
    return Distribution(
        ((a, b), pa * pb) for (a, pa), (b, pb) in itertools.product(d1.items(), d2.items())
    )
