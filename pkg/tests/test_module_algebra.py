import random
from fractions import Fraction

import pytest
from hypothesis import given
from hypothesis import strategies as st

from featcheck.core import TRUE, And, Atom, ContractError, Distribution, Not, conj, satisfies, switch_holds
from featcheck.module_algebra import (
    ZERO,
    ActTransition,
    CompositionError,
    Cost,
    FeatureInterface,
    FeatureModule,
    act,
    composable,
    compose,
    compose_all,
    sw,
    validate_module,
)
from generators import canonical_module, random_composable

f, g, h = Atom("f"), Atom("g"), Atom("h")


def module(locs, own=(), ext=(), actions=(), tr_act=(), tr_sw=(), initial=None, name=""):
    return FeatureModule(
        tuple(locs),
        tuple(initial if initial is not None else locs[:1]),
        FeatureInterface(frozenset(own), frozenset(ext)),
        frozenset(actions),
        tuple(tr_act),
        tuple(tr_sw),
        name=name,
    )


class TestCost:
    def test_zero_entries_dropped(self):
        assert Cost({"energy": 0}) == ZERO
        assert len(Cost(energy=0, money=3)) == 1

    def test_addition_is_pointwise(self):
        total = Cost(energy=2) + Cost(energy=3, money=1)
        assert total == Cost(energy=5, money=1)
        assert total.get("time") == 0

    def test_negative_rejected(self):
        with pytest.raises(ContractError):
            Cost(energy=-1)

    def test_format(self):
        assert Cost(money=2, energy=1).format() == "energy=1,money=2"
        assert ZERO.format() == "-"


class TestValidate:
    def test_wellformed(self):
        m = module(["a", "b"], own=["f"], actions=["go"], tr_act=[act("a", "go", "b", guard=f)])
        assert validate_module(m) == []

    def test_rho_outside_own(self):
        m = module(["a"], own=["f"], ext=["g"], tr_sw=[sw("a", Atom("g", True), "a")])
        assert any("rho atom outside OwnF" in p for p in validate_module(m))

    def test_guard_outside_interface(self):
        m = module(["a"], own=["f"], actions=["go"], tr_act=[act("a", "go", "a", guard=h)])
        assert any("outside the interface" in p for p in validate_module(m))

    def test_primed_guard(self):
        m = module(["a"], own=["f"], actions=["go"], tr_act=[act("a", "go", "a", guard=Atom("f", True))])
        assert any("primed" in p for p in validate_module(m))

    def test_unnormalized_raw_mapping(self):
        tr = ActTransition("a", TRUE, "go", ZERO, {"a": Fraction(1, 2), "b": Fraction(1, 4)})
        m = module(["a", "b"], actions=["go"], tr_act=[tr])
        assert any("distribution not normalized" in p for p in validate_module(m))

    def test_unknown_action_and_location(self):
        m = module(["a"], actions=["go"], tr_act=[act("z", "stop", "a")])
        problems = validate_module(m)
        assert any("unknown source" in p for p in problems)
        assert any("not in the action set" in p for p in problems)

    def test_bad_initial(self):
        m = module(["a"], initial=["q"])
        assert any("initial location" in p for p in validate_module(m))

    def test_interface_overlap_rejected(self):
        with pytest.raises(ContractError):
            FeatureInterface(frozenset("f"), frozenset("f"))

    def test_duplicate_transitions_removed(self):
        m = module(["a"], actions=["go"], tr_act=[act("a", "go", "a"), act("a", "go", "a")])
        assert len(m.tr_act) == 1


class TestCompose:
    def test_composable(self):
        m1 = module(["a"], own=["f"])
        m2 = module(["b"], own=["g"], ext=["f"])
        m3 = module(["c"], own=["f"])
        assert composable(m1, m2)
        assert not composable(m1, m3)
        with pytest.raises(CompositionError):
            compose(m1, m3)

    def test_interleaving_copies_per_location(self):
        # m2 has three locations, so m1's local step appears once per location of m2.
        m1 = module(["a", "b"], own=["f"], actions=["alpha"], tr_act=[act("a", "alpha", "b")])
        m2 = module(["x", "y", "z"], own=["g"], actions=["beta"])
        m = compose(m1, m2)
        alpha = [tr for tr in m.tr_act if tr.action == "alpha"]
        assert len(alpha) == 3
        assert {tr.source for tr in alpha} == {("a", "x"), ("a", "y"), ("a", "z")}
        for tr in alpha:
            assert tr.target == Distribution({("b", tr.source[1]): 1})

    def test_synchronization_conjoins_guards_and_adds_costs(self):
        m1 = module(["a", "b"], own=["f"], actions=["s"], tr_act=[act("a", "s", "b", guard=f, cost=Cost(energy=2))])
        m2 = module(
            ["x", "y"], own=["g"], actions=["s"],
            tr_act=[act("x", "s", {"x": Fraction(1, 2), "y": Fraction(1, 2)}, guard=Not(g), cost=Cost(energy=3))],
        )
        m = compose(m1, m2)
        assert len(m.tr_act) == 1
        tr = m.tr_act[0]
        assert tr.source == ("a", "x")
        assert tr.cost == Cost(energy=5)
        assert tr.guard == conj(f, Not(g))
        assert satisfies({"f"}, tr.guard) and not satisfies({"f", "g"}, tr.guard)
        assert tr.target.prob(("b", "y")) == Fraction(1, 2)

    def test_shared_action_without_partner_blocks(self):
        m1 = module(["a"], actions=["s"], tr_act=[act("a", "s", "a")])
        m2 = module(["x"], actions=["s"])
        assert compose(m1, m2).tr_act == ()

    def test_lone_switch_freezes_other_side(self):
        m1 = module(["a"], own=["f"], tr_sw=[sw("a", Atom("f", True), "a")])
        m2 = module(["x", "y"], own=["g"])
        m = compose(m1, m2)
        assert len(m.tr_sw) == 2
        rho = m.tr_sw[0].rho
        assert switch_holds(rho, set(), {"f"})
        assert switch_holds(rho, {"g"}, {"f", "g"})
        assert not switch_holds(rho, set(), {"f", "g"})
        assert not switch_holds(rho, {"g"}, {"f"})

    def test_joint_switch(self):
        m1 = module(["a"], own=["f"], tr_sw=[sw("a", Atom("f", True), "a", cost=Cost(money=1))])
        m2 = module(["x"], own=["g"], tr_sw=[sw("x", Not(Atom("g", True)), "x", cost=Cost(money=2))])
        m = compose(m1, m2)
        joint = [tr for tr in m.tr_sw if tr.cost == Cost(money=3)]
        assert len(joint) == 1
        assert switch_holds(joint[0].rho, {"g"}, {"f"})
        assert not switch_holds(joint[0].rho, {"g"}, {"f", "g"})

    def test_interface_of_composition(self):
        m1 = module(["a"], own=["f"], ext=["g", "h"])
        m2 = module(["x"], own=["g"])
        m = compose(m1, m2)
        assert m.own == {"f", "g"}
        assert m.ext == {"h"}

    def test_locations_and_initial(self):
        m1 = module(["a", "b"], initial=["a", "b"])
        m2 = module(["x", "y"], initial=["y"])
        m = compose(m1, m2)
        assert set(m.locations) == {("a", "x"), ("a", "y"), ("b", "x"), ("b", "y")}
        assert set(m.initial) == {("a", "y"), ("b", "y")}

    def test_compose_all_empty(self):
        with pytest.raises(CompositionError):
            compose_all([])

    def test_compose_all_names(self):
        m = compose_all([module(["a"], name="A"), module(["b"], name="B"), module(["c"], name="C")])
        assert m.name == "((A||B)||C)"


def _swap(l):
    return (l[1], l[0])


def _left_to_flat(l):
    (a, b), c = l
    return (a, b, c)


def _right_to_flat(l):
    a, (b, c) = l
    return (a, b, c)


class TestLaws:
    @given(st.integers(0, 10**6))
    def test_commutative(self, seed):
        rng = random.Random(seed)
        m1, m2 = random_composable(rng, 2)
        assert canonical_module(compose(m1, m2)) == canonical_module(compose(m2, m1), _swap)

    @given(st.integers(0, 10**6))
    def test_associative(self, seed):
        rng = random.Random(seed)
        m1, m2, m3 = random_composable(rng, 3)
        left = compose(compose(m1, m2), m3)
        right = compose(m1, compose(m2, m3))
        assert canonical_module(left, _left_to_flat) == canonical_module(right, _right_to_flat)

    @given(st.integers(0, 10**6))
    def test_composition_stays_wellformed(self, seed):
        rng = random.Random(seed)
        m1, m2 = random_composable(rng, 2)
        assert validate_module(m1) == [] and validate_module(m2) == []
        assert validate_module(compose(m1, m2)) == []

    @given(st.integers(0, 10**6))
    def test_interleaved_count(self, seed):
        rng = random.Random(seed)
        m1, m2 = random_composable(rng, 2)
        m = compose(m1, m2)
        shared = m1.actions & m2.actions
        local = sum(1 for tr in m1.tr_act if tr.action not in shared) * len(m2.locations)
        local += sum(1 for tr in m2.tr_act if tr.action not in shared) * len(m1.locations)
        synced = sum(1 for a in m1.tr_act for b in m2.tr_act if a.action == b.action and a.action in shared)
        assert len(m.tr_act) <= local + synced
        assert {tr.action for tr in m.tr_act} <= m1.actions | m2.actions

    def test_canonical_key_detects_difference(self):
        m1 = module(["a", "b"], own=["f"], actions=["go"], tr_act=[act("a", "go", "b", guard=f)])
        m2 = module(["a", "b"], own=["f"], actions=["go"], tr_act=[act("a", "go", "b", guard=Not(f))])
        m3 = module(["a", "b"], own=["f"], actions=["go"], tr_act=[act("a", "go", "b", guard=And((f, f)))])
        assert canonical_module(m1) != canonical_module(m2)
        assert canonical_module(m1) == canonical_module(m3)
