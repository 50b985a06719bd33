import random
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from featcheck.analysis import Query, QueryKind, check
from featcheck.controller import Controller, de_controller, static_controller
from featcheck.core import FALSE, And, Atom, ContractError, FeatureSignature, Or, Not, combo, switch_holds
from featcheck.module_algebra import Cost, FeatureInterface, FeatureModule, act, compose
from featcheck.semantics import (
    Mdp,
    Move,
    Path,
    Step,
    from_flat,
    is_path_of,
    join,
    path_cost,
    path_prob,
    reachable,
    terminal_states,
    to_dot,
    to_flat,
    to_states_listing,
)
from generators import random_composable, random_mdp
import join_fixtures as jf


class TestJoinRules:
    @pytest.mark.parametrize("name", sorted(jf.FIXTURES))
    def test_fixture(self, name):
        mdp, expected = jf.FIXTURES[name]()
        for state, moves in expected.items():
            assert jf.move_set(mdp, state) == moves, state

    def test_rho_example(self):
        x1, x2, x3 = Atom("x1"), Atom("x2"), Atom("x3")
        rho = And((Or((x1, Atom("x3", True))), Not(x2)))
        from featcheck.core import all_combinations

        combos = all_combinations(("x1", "x2", "x3"))
        got = {(y, z) for y in combos for z in combos if switch_holds(rho, y, z)}
        assert got == jf.rho_example_relation()

    def test_rho_example_counts(self):
        # x2 absent leaves 4 choices of Y; with x1 in Y any Z works (2*8),
        # without x1 Z must contain x3 (2*4).
        assert len(jf.rho_example_relation()) == 16 + 8

    def test_unknown_feature_rejected(self):
        m = FeatureModule(("l",), ("l",), FeatureInterface(frozenset({"z"})), frozenset())
        with pytest.raises(ContractError):
            join(m, static_controller(jf.SIG))


class TestJoinInvariants:
    @given(st.integers(0, 10**6))
    def test_rule_shapes(self, seed):
        rng = random.Random(seed)
        m = compose(*random_composable(rng, 2, features=("f", "g", "h")))
        sig = FeatureSignature.from_constraint(("f", "g", "h"))
        c = de_controller(sig, {"f", "g"}, {"h"})
        mdp = join(m, c)
        own = m.own
        for i, ms in enumerate(mdp.moves):
            loc, comb = mdp.states[i]
            for mv in ms:
                succ = [mdp.states[s] for s, _ in mv.dist]
                if mv.rule.startswith("R1"):
                    assert all(c2 == comb for _, c2 in succ)
                elif mv.rule == "R2":
                    assert all(l2 == loc for l2, _ in succ)
                    assert all(c2 & own == comb & own for _, c2 in succ)
                else:
                    assert mv.rule == "R3"
                    assert any(c2 & own != comb & own for _, c2 in succ)

    @given(st.integers(0, 10**6))
    def test_no_own_features_no_r3(self, seed):
        rng = random.Random(seed)
        (m,) = random_composable(rng, 1, features=("f", "g"))
        m = FeatureModule(m.locations, m.initial, FeatureInterface(frozenset(), m.interface.features), m.actions, m.tr_act, ())
        sig = FeatureSignature.from_constraint(("f", "g"))
        c = de_controller(sig, {"f"}, {"g"})
        mdp = join(m, c)
        rules = [mv.rule for ms in mdp.moves for mv in ms]
        assert "R3" not in rules
        # every event leaving a reachable combination gives an R2 move per location
        for i, (loc, comb) in enumerate(mdp.states):
            r2 = [mv for mv in mdp.moves[i] if mv.rule == "R2"]
            assert len(r2) == len(c.events_from(comb))

    @given(st.integers(0, 10**6))
    def test_pruning_preserves_values(self, seed):
        rng = random.Random(seed)
        m = compose(*random_composable(rng, 2, features=("f", "g", "h")))
        sig = FeatureSignature.from_constraint(("f", "g", "h"))
        c = de_controller(sig, {"f"}, {"g"})
        small = join(m, c)
        full = join(m, c, reachable_only=False)
        assert small.num_states <= full.num_states
        goal = lambda s: "f" in s[1] and s[0] == m.locations[-1]
        for kind in (QueryKind.PMAX_REACH, QueryKind.PMIN_REACH):
            a = check(small, Query(kind, goal))
            b = check(full, Query(kind, goal))
            for i in small.initial:
                j = full.index_of(small.states[i])
                assert a.values[i] == pytest.approx(b.values[j], abs=1e-9)


class TestPaths:
    def test_empty(self):
        p = Path("s")
        assert path_prob(p) == 1
        assert path_cost(p, "energy") == 0
        assert p.last == "s"

    def test_product(self):
        p = Path("s", (Step(Cost(energy=2), Fraction(1, 2), "t"), Step(Cost(energy=3), Fraction(1, 3), "u")))
        assert path_prob(p) == Fraction(1, 6)
        assert path_cost(p, "energy") == 5
        assert path_cost(p, "money") == 0
        assert p.prefix(1).last == "t"

    def test_dirac_path(self):
        p = Path("s", tuple(Step(Cost(), Fraction(1), x) for x in "abc"))
        assert path_prob(p) == 1

    def test_purchase(self):
        p = Path("sor", (Step(Cost(money=269), Fraction(15, 100), "sorfb"), Step(Cost(), Fraction(1), "done")))
        assert path_cost(p, "money") == 269

    def test_bad_probability(self):
        with pytest.raises(ContractError):
            Path("s", (Step(Cost(), Fraction(0), "t"),))

    def test_is_path_of(self):
        mdp = Mdp((0, 1), (0,), ((Move(Cost(energy=1), ((0, Fraction(1, 2)), (1, Fraction(1, 2)))),), ()))
        assert is_path_of(Path(0, (Step(Cost(energy=1), Fraction(1, 2), 1),)), mdp)
        assert not is_path_of(Path(0, (Step(Cost(energy=2), Fraction(1, 2), 1),)), mdp)
        assert not is_path_of(Path(1, (Step(Cost(energy=1), Fraction(1, 2), 1),)), mdp)


class TestTerminal:
    def test_self_loops(self):
        mdp = Mdp((0, 1), (0,), ((Move(Cost(), ((0, Fraction(1)),)),), (Move(Cost(), ((1, Fraction(1)),)),)))
        assert terminal_states(mdp) == frozenset()

    def test_single_state(self):
        assert terminal_states(Mdp((0,), (0,), ((),))) == {0}

    def test_unsatisfiable_guards(self):
        m = FeatureModule(
            ("l", "m"), ("l",), FeatureInterface(frozenset({"f"}), frozenset({"g"})), frozenset({"a"}),
            (act("l", "a", "m", guard=FALSE), act("m", "a", "l", guard=And((Atom("f"), Not(Atom("f")))))),
        )
        mdp = join(m, static_controller(jf.SIG), reachable_only=False)
        assert terminal_states(mdp) == frozenset(range(mdp.num_states))

    def test_reachable(self):
        mdp = Mdp((0, 1, 2), (0,), ((Move(Cost(), ((1, Fraction(1)),)),), (), ()))
        assert reachable(mdp) == {0, 1}
        assert reachable(mdp, [2]) == {2}


class TestExports:
    @given(st.integers(0, 10**6))
    def test_flat_round_trip(self, seed):
        mdp = random_mdp(random.Random(seed), cost_types=("energy", "money"))
        back = from_flat(to_flat(mdp), to_states_listing(mdp))
        assert back.initial == mdp.initial
        assert back.num_states == mdp.num_states
        assert all(set(a) == set(b) for a, b in zip(back.moves, mdp.moves))

    def test_flat_format(self):
        mdp = Mdp((0, 1, 2), (0,), (
            (Move(Cost(energy=1), ((1, Fraction(1)),)),),
            (Move(Cost(), ((1, Fraction(1, 3)), (2, Fraction(2, 3)))),),
            (),
        ))
        assert to_flat(mdp) == "0 energy=1 1:1\n1 - 1/3:1 2/3:2\n"

    def test_flat_rejects_unnormalized(self):
        with pytest.raises(ValueError):
            from_flat("0 - 1/2:0\n")

    def test_dot(self):
        mdp, _ = jf.r1_guard()
        text = to_dot(mdp, {i: 0 for i, ms in enumerate(mdp.moves) if ms}, np.zeros(mdp.num_states))
        assert text.startswith("digraph mdp {")
        assert "energy=2" in text and "style=bold" in text
        assert text.rstrip().endswith("}")

    def test_describe(self):
        mdp, _ = jf.r1_guard()
        assert mdp.describe(mdp.index_of(("l", combo("f")))) == "<l|{f}>"
