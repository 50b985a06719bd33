import random
from fractions import Fraction
from pathlib import Path

import pytest
from hypothesis import given
from hypothesis import strategies as st

from featcheck.analysis import check
from featcheck.controller import static_controller
from featcheck.core import TRUE, Atom, Distribution, FeatureSignature, combo
from featcheck.module_algebra import Cost, FeatureInterface, FeatureModule, act, compose
from featcheck.semantics import join, terminal_states
from featcheck.vardsl import (
    DslScopeError,
    DslSyntaxError,
    DslTypeError,
    NormalizationError,
    ProbUpdate,
    Update,
    compose_var,
    encode_feature_module,
    format_expr,
    format_model,
    join_var,
    load_system,
    parse_expr,
    parse_model,
    parse_override,
    parse_syntax,
)
from featcheck.vardsl.ast import BinOp, EnumLit, Int, Name
from featcheck.vardsl.evaluation import Variable, apply_prob_update, eval_expr, eval_pred
from featcheck.vardsl.prism import to_prism
from generators import erase_location, mdp_key, random_composable

FIXTURES = Path(__file__).parent / "fixtures"


def fixture(name):
    return (FIXTURES / name).read_text()


TWO_MODULES = """
signature { features f, g; }
module A owns(f) {
  var x : [0..1] init 0;
  [a] x = 0 -> 1/2: (x' = 1) + 1/2: (x' = 0) cost energy 1;
  [p] true -> (x' = 0);
}
module B owns(g) {
  var y : [0..1] init 0;
  [a] y = 0 -> 1/2: (y' = 1) + 1/2: (y' = 0) cost energy 1;
  [q] true -> (y' = 1);
}
controller static;
"""


class TestParseErrors:
    def test_minimal(self):
        tree = parse_model(fixture("minimal.fdsl"))
        assert len(tree.modules) == 1

    def test_write_foreign_variable(self):
        text = """
signature { features f, g; }
module A owns(f) { var x : [0..1] init 0; [a] true -> (x' = 1); }
module B owns(g) { var y : [0..1] init 0; [a] true -> (x' = 0); }
controller static;
"""
        with pytest.raises(DslScopeError) as err:
            parse_model(text)
        assert err.value.line == 4

    def test_read_foreign_variable_allowed(self):
        text = """
signature { features f, g; }
module A owns(f) { var x : [0..1] init 0; [a] true -> (x' = 1); }
module B owns(g) { var y : [0..1] init 0; [a] x = 1 -> (y' = 1); }
controller static;
"""
        parse_model(text)

    def test_unnormalized_update(self):
        text = """
signature { features f; }
module A owns(f) { var x : [0..2] init 0; [a] true -> 0.5: (x' = 1) + 0.4: (x' = 2); }
controller static;
"""
        with pytest.raises(NormalizationError):
            parse_model(text)

    def test_syntax_error_position(self):
        with pytest.raises(DslSyntaxError) as err:
            parse_syntax("signature { features f }")
        assert err.value.line == 1

    def test_type_error(self):
        text = """
signature { features f; }
module A owns(f) { var x : [0..2] init 0; [a] x -> (x' = 1); }
controller static;
"""
        with pytest.raises(DslTypeError):
            parse_model(text)

    def test_invisible_feature(self):
        text = """
signature { features f, g; }
module A owns(f) { var x : [0..1] init 0; [a] feat(g) -> (x' = 1); }
controller static;
"""
        with pytest.raises(DslScopeError):
            parse_model(text)

    def test_rho_outside_own(self):
        text = """
signature { features f, g; }
module A owns(f) uses(g) { var x : [0..1] init 0; [switch "g'"] true -> (x' = 1); }
controller static;
"""
        with pytest.raises(DslScopeError, match="rho atom outside OwnF"):
            parse_model(text)

    def test_override(self):
        assert parse_override("N=4") == ("N", 4)
        system = load_system(fixture("counter.fdsl"), {"N": 3})
        assert system.consts["N"] == 3


class TestEvaluation:
    def test_comparison_chain(self):
        assert eval_pred(parse_expr("x < y & y > 2"), {"x": 2, "y": 3}) is True

    def test_true(self):
        assert eval_pred(TRUE, {"x": 7}, {"f"}) is True

    def test_enum_inequality(self):
        pred = BinOp("!=", Name("z"), EnumLit("green"))
        assert eval_pred(pred, {"z": "green"}) is False
        assert eval_pred(pred, {"z": "red"}) is True

    def test_features(self):
        assert eval_pred(Atom("f"), {}, {"f"})
        assert eval_expr(parse_expr("min(x, 4) + max(1, 2)"), {"x": 9}) == 6
        assert eval_expr(parse_expr("x > 1 ? 10 : 20"), {"x": 0}) == 20

    def test_identity_update(self):
        pu = ProbUpdate(((1, Update((("x", Name("x")),))),))
        d = apply_prob_update(pu, {"x": 5})
        assert list(d.items()) == [({"x": 5}, 1)]

    def test_equal_results_merge(self):
        one = Update((("x", Int(1)),))
        d = apply_prob_update(ProbUpdate(((Fraction(1, 2), one), (Fraction(1, 2), one))), {"x": 0})
        assert list(d.items()) == [(_v(x=1), 1)]

    def test_branches(self):
        pu = ProbUpdate(
            (
                (Fraction(3, 10), Update((("x", BinOp("+", Name("x"), Int(1))),))),
                (Fraction(7, 10), Update((("x", Int(0)),))),
            )
        )
        d = dict(apply_prob_update(pu, {"x": 1}).items())
        assert d == {_v(x=2): Fraction(3, 10), _v(x=0): Fraction(7, 10)}

    def test_domain_violation(self):
        from featcheck.vardsl import ModelRuntimeError

        pu = ProbUpdate(((1, Update((("x", Int(5)),))),))
        with pytest.raises(ModelRuntimeError):
            apply_prob_update(pu, {"x": 0}, {"x": Variable("x", "int", 0, 2)})

    def test_normalization(self):
        with pytest.raises(NormalizationError):
            ProbUpdate(((Fraction(1, 2), Update()), (Fraction(2, 5), Update())))


def _v(**kw):
    from featcheck.vardsl.evaluation import Valuation

    return Valuation(kw)


class TestComposeVar:
    def modules(self):
        return load_system(TWO_MODULES).modules

    def test_disjoint_actions_union(self):
        a, b = self.modules()
        m = compose_var(a, b)
        lone = sorted(tr.action for tr in m.transitions if tr.action in ("p", "q"))
        assert lone == ["p", "q"]

    def test_shared_action_merges_cost_and_branches(self):
        a, b = self.modules()
        m = compose_var(a, b)
        (tr,) = [tr for tr in m.transitions if tr.action == "a"]
        assert tr.cost == Cost(energy=2)
        assert len(tr.update.branches) == 4
        assert all(p == Fraction(1, 4) for p, _ in tr.update.branches)

    def test_shared_variable_rejected(self):
        from featcheck.module_algebra import CompositionError

        a, _ = self.modules()
        # same variable x, different own features
        twin = type(a)(a.variables, FeatureInterface(frozenset({"g"})), a.actions, a.transitions)
        with pytest.raises(CompositionError, match="local variables"):
            compose_var(a, twin)

    def test_shared_own_feature_rejected(self):
        from featcheck.module_algebra import CompositionError

        a, b = self.modules()
        clash = type(b)(b.variables, FeatureInterface(frozenset({"f"})), b.actions, b.transitions)
        with pytest.raises(CompositionError, match="own features"):
            compose_var(a, clash)


class TestJoinVar:
    def test_chain(self):
        system = load_system(fixture("chain.fdsl"))
        mdp = join_var(system.composed(), system.controller)
        assert mdp.num_states == 3
        assert mdp.num_moves == 2
        assert len(terminal_states(mdp)) == 1

    def test_unsatisfiable_guard(self):
        system = load_system(fixture("chain.fdsl"))
        mdp = system.build()
        assert all(mv.rule != "R1:never" for ms in mdp.moves for mv in ms)

    def test_switch_cost_is_sum(self):
        system = load_system(fixture("switch_cost.fdsl"))
        mdp = system.build()
        (mv,) = [mv for ms in mdp.moves for mv in ms]
        assert mv.rule == "R3"
        assert mv.cost == Cost(energy=1, money=10)

    def test_build_matches_join_var_of_composition(self):
        system = load_system(fixture("counter.fdsl"))
        assert mdp_key(system.build()) == mdp_key(join_var(system.composed(), system.controller))

    def test_external_variables_rejected(self):
        from featcheck.core import ContractError

        system = load_system(TWO_MODULES.replace("[q] true", "[q] x = 0"))
        with pytest.raises(ContractError):
            join_var(system.modules[1], system.controller)


class TestErasure:
    @given(st.integers(0, 10**6))
    def test_encoded_module_joins_alike(self, seed):
        from featcheck.controller import de_controller

        rng = random.Random(seed)
        mods = random_composable(rng, rng.randint(1, 2), features=("f", "g", "h"))
        m = mods[0] if len(mods) == 1 else compose(*mods)
        sig = FeatureSignature.from_constraint(("f", "g", "h"))
        c = de_controller(sig, {"f", "g"}, {"h"})
        vm, literals = encode_feature_module(m)
        assert mdp_key(join(m, c), erase_location(literals)) == mdp_key(join_var(vm, c))

    def test_single_location_has_no_variable(self):
        m = FeatureModule(("only",), ("only",), FeatureInterface(frozenset({"f"})), frozenset({"a"}), (act("only", "a", "only"),))
        vm, literals = encode_feature_module(m)
        assert vm.variables == ()
        assert literals == {"only": "l0"}


class TestPrinting:
    @pytest.mark.parametrize("name", sorted(p.name for p in FIXTURES.glob("*.fdsl")))
    def test_round_trip(self, name):
        tree = parse_syntax(fixture(name))
        assert parse_syntax(format_model(tree)) == tree

    @pytest.mark.parametrize(
        "text",
        ["a & b | c", "a & (b | c)", "!(x < 3)", "a => b => c", "(a => b) => c", "x - (y - z)", "x - y - z",
         "c ? 1 : 2", "-x * 3", "a <=> b <=> c", "min(x, y + 1)", "(c ? a : b) & d"],
    )
    def test_expr_round_trip(self, text):
        e = parse_expr(text)
        assert parse_expr(format_expr(e)) == e

    def test_precedence(self):
        assert parse_expr("a & b | c") == parse_expr("(a & b) | c")
        assert parse_expr("a => b => c") == parse_expr("a => (b => c)")
        assert parse_expr("x + y * z") == parse_expr("x + (y * z)")


class TestPrism:
    def test_rewards_block(self):
        text = to_prism(load_system(fixture("chain.fdsl")))
        assert text.startswith("mdp")
        assert text.count('rewards "energy"') == 1
        assert "module C" in text and "module Con" in text

    def test_switch_pairing(self):
        text = to_prism(load_system(fixture("switch_cost.fdsl")))
        assert "[ev0]" in text
        assert 'rewards "money"' in text
        assert 'rewards "energy"' in text


class TestQueries:
    def test_two_moves(self):
        system = load_system(fixture("two_moves.fdsl"))
        mdp = system.build()
        result = check(mdp, system.query("e", mdp))
        assert {float(result.values[i]) for i in mdp.initial} == {2.0}

    def test_threshold_parsed(self):
        spec = load_system(fixture("two_moves.fdsl")).query_spec("p")
        assert spec.threshold == (">=", Fraction(1, 2))
