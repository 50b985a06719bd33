from fractions import Fraction

import pytest
from hypothesis import given
from hypothesis import strategies as st

from featcheck.casestudy import load_productivity
from featcheck.controller import (
    Controller,
    controller_to_module,
    de_controller,
    event,
    static_controller,
    validate_controller,
)
from featcheck.core import Atom, ContractError, Distribution, FeatureSignature, Not, all_combinations, combo
from featcheck.module_algebra import Cost, validate_module

AB = FeatureSignature.from_constraint(("a", "b"))


def signature_b_requires_a():
    return FeatureSignature(("a", "b"), frozenset({combo(), combo("a"), combo("a", "b")}))


class TestStatic:
    def test_no_events_all_initial(self):
        c = static_controller(AB)
        assert c.events == ()
        assert set(c.initial) == set(AB.valid)
        assert validate_controller(c) == []


class TestDynamicEnvironment:
    def test_single_dynamic_feature(self):
        c = de_controller(AB, {"b"}, ())
        assert len(c.events) == 4
        for e in c.events:
            (target,) = e.target.support
            assert e.source ^ target == {"b"}
        assert validate_controller(c) == []

    def test_two_free_features(self):
        c = de_controller(AB, {"a"}, {"b"})
        # every ordered pair of distinct combinations
        assert len(c.events) == 4 * 3

    def test_invalid_combinations_excluded(self):
        sig = signature_b_requires_a()
        c = de_controller(sig, {"a", "b"}, ())
        for e in c.events:
            assert e.source in sig.valid
            assert set(e.target.support) <= sig.valid
        assert len(c.events) == 3 * 2

    def test_overlap_rejected(self):
        with pytest.raises(ContractError):
            de_controller(AB, {"a"}, {"a"})

    def test_unknown_feature_rejected(self):
        with pytest.raises(ContractError):
            de_controller(AB, {"z"}, ())

    @given(st.sets(st.sampled_from("abc")), st.sets(st.sampled_from("abc")))
    def test_symmetric(self, d, e):
        e = e - d
        sig = FeatureSignature.from_constraint(("a", "b", "c"))
        c = de_controller(sig, d, e)
        pairs = {(ev.source, ev.target.support[0]) for ev in c.events}
        assert pairs == {(y, x) for x, y in pairs}
        assert all(x ^ y and x ^ y <= d | e for x, y in pairs)


class TestValidation:
    def test_invalid_target(self):
        sig = signature_b_requires_a()
        c = Controller(sig, (combo(),), (event(combo(), combo("b")),))
        assert any("invalid target combination" in p for p in validate_controller(c))

    def test_invalid_initial(self):
        sig = signature_b_requires_a()
        c = Controller(sig, (combo("b"),), ())
        assert any("invalid initial" in p for p in validate_controller(c))

    def test_cost_determinism(self):
        c = Controller(
            AB,
            (combo(),),
            (event(combo(), combo("a"), Cost(money=1)), event(combo(), combo("a"), Cost(money=2))),
        )
        assert any("cost determinism violated" in p for p in validate_controller(c))

    def test_same_source_different_targets_allowed(self):
        c = Controller(
            AB,
            (combo(),),
            (event(combo(), combo("a"), Cost(money=1)), event(combo(), combo("b"), Cost(money=2))),
        )
        assert validate_controller(c) == []

    def test_duplicate_events_merged(self):
        c = Controller(AB, (combo(),), (event(combo(), combo("a")), event(combo(), combo("a"))))
        assert len(c.events) == 1


class TestAsModule:
    def test_shape(self):
        c = de_controller(AB, {"b"}, ())
        m = controller_to_module(c)
        assert m.own == frozenset()
        assert m.ext == {"a", "b"}
        assert set(m.locations) == set(AB.valid)
        assert m.actions == {f"sw{i}" for i in range(4)}
        assert validate_module(m) == []
        for tr, e in zip(m.tr_act, c.events):
            assert tr.source == e.source and tr.target == e.target and tr.cost == e.cost

    def test_probabilistic_target_kept(self):
        d = Distribution({combo("a"): Fraction(1, 3), combo("b"): Fraction(2, 3)})
        c = Controller(AB, (combo(),), (event(combo(), d),))
        (tr,) = controller_to_module(c).tr_act
        assert tr.target == d


class TestProductivityController:
    def test_distributions_are_normalized(self):
        c = load_productivity().controller
        assert c.events
        for e in c.events:
            assert sum(p for _, p in e.target.items()) == 1
        assert validate_controller(c) == []

    def test_billing_event(self):
        c = load_productivity().controller
        (e,) = c.events_from(combo("s", "o", "r"))
        assert e.target.prob(combo("s", "o", "r", "f", "b")) == Fraction(15, 100)
        assert e.target.prob(combo("s", "o", "r")) == Fraction(85, 100)

    def test_signature_size(self):
        sig = load_productivity().signature
        assert len(sig.valid) == 20
        assert len(all_combinations(sig.features)) == 512
