"""Recursive-descent parser for ``.fdsl`` model files.

The grammar is documented in ``docs/grammar.ebnf``. :func:`parse_model`
returns the syntax tree after checking it for scope, type and
normalization errors; :func:`parse_syntax` stops after parsing.
"""

from __future__ import annotations

import typing as t
from fractions import Fraction

from ..core import FALSE, TRUE, And, Atom, BoolExpr, Iff, Implies, Not, Or
from .ast import (
    COMPARE,
    Assign,
    BinOp,
    Branch,
    Call,
    CommandDecl,
    ConstDecl,
    ControllerDecl,
    DslSyntaxError,
    EventDecl,
    Int,
    Ite,
    LabelDecl,
    ModelFile,
    ModuleDecl,
    Name,
    NormalizationError,
    QueryDecl,
    SignatureDecl,
    VarDecl,
)
from .lexer import Token, tokenize

QUERY_OPS = ("Pmax", "Pmin", "Emin", "Emax")


class Parser:
    def __init__(self, text: str, features_mode: bool = False, line_offset: int = 0):
        self.tokens = tokenize(text)
        self.i = 0
        # In feature mode bare names are feature atoms and may be primed.
        self.features_mode = features_mode
        self.line_offset = line_offset

    # -- token helpers -----------------------------------------------------

    @property
    def tok(self) -> Token:
        return self.tokens[self.i]

    def peek(self, k: int = 1) -> Token:
        return self.tokens[min(self.i + k, len(self.tokens) - 1)]

    def error(self, message: str, tok: Token | None = None) -> DslSyntaxError:
        tok = tok or self.tok
        return DslSyntaxError(message, tok.line + self.line_offset, tok.col)

    def at(self, text: str) -> bool:
        return self.tok.kind in ("op", "ident") and self.tok.text == text

    def accept(self, text: str) -> bool:
        if self.at(text):
            self.i += 1
            return True
        return False

    def expect(self, text: str) -> Token:
        if not self.at(text):
            found = self.tok.text or "end of input"
            raise self.error(f"expected {text!r}, found {found!r}")
        tok = self.tok
        self.i += 1
        return tok

    def ident(self, what: str = "identifier") -> str:
        if self.tok.kind != "ident":
            raise self.error(f"expected {what}, found {self.tok.text or 'end of input'!r}")
        text = self.tok.text
        self.i += 1
        return text

    def number(self) -> str:
        if self.tok.kind != "number":
            raise self.error(f"expected a number, found {self.tok.text or 'end of input'!r}")
        text = self.tok.text
        self.i += 1
        return text

    def idents(self, stop: str) -> t.Tuple[str, ...]:
        out: t.List[str] = []
        if self.at(stop):
            return ()
        out.append(self.ident())
        while self.accept(","):
            out.append(self.ident())
        return tuple(out)

    # -- expressions -------------------------------------------------------

    def expr(self) -> BoolExpr:
        cond = self.iff()
        if self.accept("?"):
            then = self.expr()
            self.expect(":")
            other = self.expr()
            return Ite(cond, then, other)
        return cond

    def iff(self) -> BoolExpr:
        left = self.implies()
        while self.accept("<=>"):
            left = Iff(left, self.implies())
        return left

    def implies(self) -> BoolExpr:
        left = self.disj()
        if self.accept("=>"):
            return Implies(left, self.implies())
        return left

    def disj(self) -> BoolExpr:
        parts = [self.conj()]
        while self.accept("|"):
            parts.append(self.conj())
        return parts[0] if len(parts) == 1 else Or(tuple(parts))

    def conj(self) -> BoolExpr:
        parts = [self.negation()]
        while self.accept("&"):
            parts.append(self.negation())
        return parts[0] if len(parts) == 1 else And(tuple(parts))

    def negation(self) -> BoolExpr:
        if self.accept("!"):
            return Not(self.negation())
        return self.comparison()

    def comparison(self) -> BoolExpr:
        left = self.sum()
        if self.tok.kind == "op" and self.tok.text in COMPARE:
            op = self.tok.text
            self.i += 1
            return BinOp(op, left, self.sum())
        return left

    def sum(self) -> BoolExpr:
        left = self.product()
        while self.tok.kind == "op" and self.tok.text in ("+", "-"):
            op = self.tok.text
            self.i += 1
            left = BinOp(op, left, self.product())
        return left

    def product(self) -> BoolExpr:
        left = self.unary()
        while self.accept("*"):
            left = BinOp("*", left, self.unary())
        return left

    def unary(self) -> BoolExpr:
        if self.accept("-"):
            if self.tok.kind == "number" and "." not in self.tok.text:
                return Int(-int(self.number()))
            return BinOp("-", Int(0), self.unary())
        return self.primary()

    def primary(self) -> BoolExpr:
        tok = self.tok
        if tok.kind == "number":
            if "." in tok.text:
                raise self.error("decimal numbers are only allowed as probabilities")
            self.i += 1
            return Int(int(tok.text))
        if self.accept("("):
            e = self.expr()
            self.expect(")")
            return e
        if tok.kind != "ident":
            raise self.error(f"unexpected {tok.text or 'end of input'!r} in expression")
        self.i += 1
        if tok.text == "true":
            return TRUE
        if tok.text == "false":
            return FALSE
        if tok.text == "feat" and self.at("("):
            self.expect("(")
            name = self.ident("feature name")
            self.expect(")")
            return Atom(name)
        if tok.text in ("min", "max") and self.at("("):
            self.expect("(")
            args = [self.expr()]
            while self.accept(","):
                args.append(self.expr())
            self.expect(")")
            if len(args) < 2:
                raise self.error(f"{tok.text} needs at least two arguments", tok)
            return Call(tok.text, tuple(args))
        if self.features_mode:
            primed = self.accept("'")
            return Atom(tok.text, primed)
        if self.at("'"):
            raise self.error("primed names are only allowed in switch annotations and updates")
        return Name(tok.text)

    # -- declarations ------------------------------------------------------

    def model(self) -> ModelFile:
        consts: t.List[ConstDecl] = []
        signature: SignatureDecl | None = None
        modules: t.List[ModuleDecl] = []
        controller: ControllerDecl | None = None
        labels: t.List[LabelDecl] = []
        queries: t.List[QueryDecl] = []
        while self.tok.kind != "eof":
            tok = self.tok
            if self.at("const"):
                consts.append(self.const())
            elif self.at("signature"):
                if signature is not None:
                    raise self.error("duplicate signature block")
                signature = self.signature()
            elif self.at("module"):
                modules.append(self.module())
            elif self.at("controller"):
                if controller is not None:
                    raise self.error("duplicate controller block")
                controller = self.controller()
            elif self.at("label"):
                labels.append(self.label())
            elif self.at("query"):
                queries.append(self.query())
            else:
                raise self.error(f"unexpected {tok.text!r} at top level")
        if signature is None:
            raise DslSyntaxError("model has no signature block", self.tok.line)
        if controller is None:
            raise DslSyntaxError("model has no controller block", self.tok.line)
        return ModelFile(tuple(consts), signature, tuple(modules), controller, tuple(labels), tuple(queries))

    def const(self) -> ConstDecl:
        line = self.expect("const").line
        name = self.ident("constant name")
        self.expect("=")
        value = self.expr()
        self.expect(";")
        return ConstDecl(name, value, line)

    def combo(self) -> t.Tuple[str, ...]:
        self.expect("{")
        names = self.idents("}")
        self.expect("}")
        return names

    def combos(self) -> t.Tuple[t.Tuple[str, ...], ...]:
        out = [self.combo()]
        while self.accept(","):
            out.append(self.combo())
        return tuple(out)

    def signature(self) -> SignatureDecl:
        line = self.expect("signature").line
        self.expect("{")
        self.expect("features")
        features = self.idents(";")
        self.expect(";")
        valid = None
        constraint = None
        if self.accept("valid"):
            if self.accept("where"):
                saved = self.features_mode
                self.features_mode = True
                constraint = self.expr()
                self.features_mode = saved
            else:
                valid = self.combos()
            self.expect(";")
        self.expect("}")
        return SignatureDecl(features, valid, constraint, line)

    def module(self) -> ModuleDecl:
        line = self.expect("module").line
        name = self.ident("module name")
        owns: t.Tuple[str, ...] = ()
        uses: t.Tuple[str, ...] = ()
        if self.accept("owns"):
            self.expect("(")
            owns = self.idents(")")
            self.expect(")")
        if self.accept("uses"):
            self.expect("(")
            uses = self.idents(")")
            self.expect(")")
        self.expect("{")
        variables: t.List[VarDecl] = []
        init: BoolExpr | None = None
        commands: t.List[CommandDecl] = []
        while not self.accept("}"):
            if self.at("var"):
                variables.append(self.var())
            elif self.at("init"):
                tok = self.expect("init")
                if init is not None:
                    raise self.error("duplicate init condition", tok)
                init = self.expr()
                self.expect(";")
            elif self.at("["):
                commands.append(self.command())
            else:
                raise self.error(f"unexpected {self.tok.text or 'end of input'!r} in module {name}")
        return ModuleDecl(name, owns, uses, tuple(variables), init, tuple(commands), line)

    def var(self) -> VarDecl:
        line = self.expect("var").line
        name = self.ident("variable name")
        self.expect(":")
        lo = hi = None
        values: t.Tuple[str, ...] = ()
        if self.accept("bool"):
            kind = "bool"
        elif self.accept("["):
            kind = "int"
            lo = self.sum()
            self.expect("..")
            hi = self.sum()
            self.expect("]")
        elif self.accept("{"):
            kind = "enum"
            values = self.idents("}")
            if not values:
                raise self.error("enumeration type needs at least one value")
            self.expect("}")
        else:
            raise self.error("expected a type (bool, [lo..hi] or {a, b, ...})")
        init = None
        if self.accept("init"):
            init = self.expr()
        self.expect(";")
        return VarDecl(name, kind, lo, hi, values, init, line)

    def prob(self) -> Fraction:
        text = self.number()
        if self.accept("/"):
            den = self.number()
            if "." in text or "." in den:
                raise self.error("fraction parts must be integers")
            if int(den) == 0:
                raise self.error("zero denominator")
            return Fraction(int(text), int(den))
        return Fraction(text)

    def update(self) -> t.Tuple[Assign, ...]:
        if self.accept("true"):
            return ()
        out = [self.assign()]
        while self.accept("&"):
            out.append(self.assign())
        return tuple(out)

    def assign(self) -> Assign:
        self.expect("(")
        var = self.ident("variable name")
        self.expect("'")
        self.expect("=")
        e = self.expr()
        self.expect(")")
        return Assign(var, e)

    def branches(self) -> t.Tuple[Branch, ...]:
        tok = self.tok
        if self.tok.kind != "number":
            return (Branch(Fraction(1), self.update()),)
        out = []
        while True:
            p = self.prob()
            self.expect(":")
            out.append(Branch(p, self.update()))
            if not self.accept("+"):
                break
        for b in out:
            if b.prob <= 0:
                raise NormalizationError("branch probabilities must be positive", tok.line, tok.col)
        total = sum(b.prob for b in out)
        if total != 1:
            raise NormalizationError(f"branch probabilities sum to {total}, not 1", tok.line, tok.col)
        return tuple(out)

    def costs(self) -> t.Tuple[t.Tuple[str, BoolExpr], ...]:
        out = [(self.ident("cost type"), self.expr())]
        while self.accept(","):
            out.append((self.ident("cost type"), self.expr()))
        return tuple(out)

    def command(self) -> CommandDecl:
        line = self.expect("[").line
        action: str | None = None
        rho: BoolExpr | None = None
        if self.at("switch") and self.peek().kind == "string":
            self.i += 1
            tok = self.tok
            self.i += 1
            rho = parse_feature_expr(tok.text[1:-1], tok.line - 1)
        else:
            action = self.ident("action name")
        self.expect("]")
        guard = self.expr()
        self.expect("->")
        branches = self.branches()
        cost: t.Tuple[t.Tuple[str, BoolExpr], ...] = ()
        if self.accept("cost"):
            cost = self.costs()
        self.expect(";")
        return CommandDecl(action, rho, guard, branches, cost, line)

    def controller(self) -> ControllerDecl:
        line = self.expect("controller").line
        if self.accept("static"):
            self.expect(";")
            return ControllerDecl("static", None, (), (), (), line)
        if self.accept("de"):
            self.expect("(")
            self.expect("dynamic")
            self.expect(":")
            dynamic = self.idents(";")
            self.expect(";")
            self.expect("environment")
            self.expect(":")
            environment = self.idents(")")
            self.expect(")")
            self.expect(";")
            return ControllerDecl("de", None, (), dynamic, environment, line)
        self.expect("{")
        init: t.Tuple[t.Tuple[str, ...], ...] | None = None
        seen_init = False
        events: t.List[EventDecl] = []
        while not self.accept("}"):
            if self.at("init"):
                tok = self.expect("init")
                if seen_init:
                    raise self.error("duplicate init clause", tok)
                seen_init = True
                init = None if self.accept("all") else self.combos()
                self.expect(";")
            elif self.at("event"):
                events.append(self.event())
            else:
                raise self.error(f"unexpected {self.tok.text or 'end of input'!r} in controller")
        if not seen_init:
            raise DslSyntaxError("controller needs an init clause", line)
        return ControllerDecl("explicit", init, tuple(events), (), (), line)

    def event(self) -> EventDecl:
        line = self.expect("event").line
        source = self.combo()
        self.expect("->")
        cost: t.Tuple[t.Tuple[str, BoolExpr], ...] = ()
        if self.accept("cost"):
            cost = self.costs()
            self.expect(":")
        tok = self.tok
        if self.at("{") and self.peek().kind == "number":
            self.expect("{")
            targets = []
            while True:
                p = self.prob()
                self.expect(":")
                targets.append((p, self.combo()))
                if not self.accept(";") or self.at("}"):
                    break
            self.expect("}")
            total = sum(p for p, _ in targets)
            if any(p <= 0 for p, _ in targets):
                raise NormalizationError("event probabilities must be positive", tok.line, tok.col)
            if total != 1:
                raise NormalizationError(f"event probabilities sum to {total}, not 1", tok.line, tok.col)
        else:
            targets = [(Fraction(1), self.combo())]
        self.expect(";")
        return EventDecl(source, tuple(targets), cost, line)

    def label(self) -> LabelDecl:
        line = self.expect("label").line
        name = self.ident("label name")
        self.expect("=")
        e = self.expr()
        self.expect(";")
        return LabelDecl(name, e, line)

    def query(self) -> QueryDecl:
        line = self.expect("query").line
        name = self.ident("query name")
        self.expect(":")
        tok = self.tok
        op = self.ident("query operator")
        if op not in QUERY_OPS:
            raise self.error(f"unknown query operator {op!r} (expected one of {', '.join(QUERY_OPS)})", tok)
        cost_type = None
        if op.startswith("E"):
            self.expect("{")
            if self.tok.kind != "string":
                raise self.error("expected a quoted cost type")
            cost_type = self.tok.text[1:-1]
            self.i += 1
            self.expect("}")
        self.expect("[")
        constraint = None
        if self.accept("F"):
            target = self.expr()
        else:
            if op.startswith("E"):
                raise self.error("expected-cost queries take the form [ F target ]")
            constraint = self.expr()
            self.expect("U")
            target = self.expr()
        self.expect("]")
        threshold = None
        if self.tok.kind == "op" and self.tok.text in ("<", "<=", ">", ">="):
            cmp = self.tok.text
            self.i += 1
            threshold = (cmp, self.prob())
        self.expect(";")
        return QueryDecl(name, op, target, constraint, cost_type, threshold, line)


def parse_feature_expr(text: str, line_offset: int = 0) -> BoolExpr:
    """Parse an expression whose bare names are (possibly primed) features."""
    p = Parser(text, features_mode=True, line_offset=line_offset)
    e = p.expr()
    if p.tok.kind != "eof":
        raise p.error(f"unexpected {p.tok.text!r} after feature expression")
    return e


def parse_expr(text: str) -> BoolExpr:
    p = Parser(text)
    e = p.expr()
    if p.tok.kind != "eof":
        raise p.error(f"unexpected {p.tok.text!r} after expression")
    return e


def parse_syntax(text: str) -> ModelFile:
    return Parser(text).model()


def parse_model(text: str, overrides: t.Mapping[str, t.Any] | None = None) -> ModelFile:
    """Parse and check a model file; raises a :class:`ModelError` subclass."""
    from .elaborate import elaborate

    tree = parse_syntax(text)
    elaborate(tree, overrides or {})
    return tree
