"""Seeded random generators for small models used by property tests."""

from __future__ import annotations

import random
import typing as t
from fractions import Fraction

from featcheck.module_algebra import Cost
from featcheck.semantics import Mdp, Move

_DENOMS = (1, 2, 3, 4, 5, 6, 8, 10)


def random_dist(rng: random.Random, n: int, width: int) -> t.Tuple[t.Tuple[int, Fraction], ...]:
    k = rng.randint(1, min(width, n))
    targets = rng.sample(range(n), k)
    d = rng.choice(_DENOMS)
    while d < k:
        d *= 2
    # Split d units into k positive parts.
    cuts = sorted(rng.sample(range(1, d), k - 1)) if k > 1 else []
    parts = [b - a for a, b in zip([0] + cuts, cuts + [d])]
    return tuple(sorted((s, Fraction(p, d)) for s, p in zip(targets, parts)))


def random_mdp(
    rng: random.Random,
    max_states: int = 8,
    max_moves: int = 3,
    max_schedulers: int = 400,
    cost_types: t.Sequence[str] = ("energy",),
    zero_cost_bias: float = 0.3,
) -> Mdp:
    """A random MDP with rational probabilities and few memoryless schedulers."""
    n = rng.randint(1, max_states)
    budget = max_schedulers
    moves = []
    for s in range(n):
        roll = rng.random()
        if roll < 0.12:
            k = 0
        else:
            k = rng.randint(1, max_moves)
            while k > 1 and budget // k < 1:
                k -= 1
            budget //= max(k, 1)
        ms = []
        for _ in range(k):
            cost = {}
            for ct in cost_types:
                if rng.random() >= zero_cost_bias:
                    cost[ct] = rng.randint(0, 5)
            ms.append(Move(Cost(cost), random_dist(rng, n, 3)))
        moves.append(tuple(dict.fromkeys(ms)))
    return Mdp(tuple(range(n)), (0,), tuple(moves))


def random_target(rng: random.Random, n: int) -> t.FrozenSet[int]:
    return frozenset(s for s in range(n) if rng.random() < 0.3)


# ---------------------------------------------------------------------------
# Data-abstract feature modules

from featcheck.core import TRUE, And, Atom, BoolExpr, Distribution, Not, Or  # noqa: E402
from featcheck.module_algebra import ActTransition, FeatureInterface, FeatureModule, SwTransition  # noqa: E402


def random_expr(rng: random.Random, features: t.Sequence[str], primes: bool = False, depth: int = 2) -> BoolExpr:
    if not features:
        return TRUE
    if depth == 0 or rng.random() < 0.35:
        f = rng.choice(list(features))
        a = Atom(f, primes and rng.random() < 0.5)
        return Not(a) if rng.random() < 0.3 else a
    left = random_expr(rng, features, primes, depth - 1)
    right = random_expr(rng, features, primes, depth - 1)
    return And((left, right)) if rng.random() < 0.5 else Or((left, right))


def random_location_dist(rng: random.Random, locations: t.Sequence[t.Any]) -> Distribution:
    picks = random_dist(rng, len(locations), 2)
    return Distribution({locations[i]: p for i, p in picks})


def random_module(
    rng: random.Random,
    own: t.Sequence[str],
    ext: t.Sequence[str],
    actions: t.Sequence[str],
    prefix: str = "l",
    max_locations: int = 3,
    max_transitions: int = 3,
) -> FeatureModule:
    locations = [f"{prefix}{i}" for i in range(rng.randint(1, max_locations))]
    visible = list(own) + list(ext)
    tr_act = []
    for _ in range(rng.randint(0, max_transitions)):
        if not actions:
            break
        guard = random_expr(rng, visible) if rng.random() < 0.6 else TRUE
        cost = Cost({"energy": rng.randint(0, 3)}) if rng.random() < 0.6 else Cost()
        tr_act.append(
            ActTransition(rng.choice(locations), guard, rng.choice(list(actions)), cost, random_location_dist(rng, locations))
        )
    tr_sw = []
    for _ in range(rng.randint(0, 2)):
        if not own:
            break
        guard = random_expr(rng, visible) if rng.random() < 0.4 else TRUE
        rho = random_expr(rng, own, primes=True)
        cost = Cost({"money": rng.randint(0, 2)}) if rng.random() < 0.5 else Cost()
        tr_sw.append(SwTransition(rng.choice(locations), guard, rho, cost, random_location_dist(rng, locations)))
    initial = rng.sample(locations, rng.randint(1, len(locations)))
    return FeatureModule(
        tuple(locations),
        tuple(initial),
        FeatureInterface(frozenset(own), frozenset(ext)),
        frozenset(actions),
        tuple(tr_act),
        tuple(tr_sw),
    )


def random_composable(
    rng: random.Random, count: int, features: t.Sequence[str] = ("f", "g", "h", "k"), alphabet: str = "abc"
) -> t.List[FeatureModule]:
    """``count`` modules with pairwise disjoint own features."""
    feats = list(features)
    rng.shuffle(feats)
    owners = [feats[i::count] for i in range(count)]
    out = []
    for i in range(count):
        own = [f for f in owners[i] if rng.random() < 0.8]
        ext = [f for f in features if f not in own and rng.random() < 0.4]
        acts = sorted({rng.choice(alphabet) for _ in range(rng.randint(0, 2))})
        out.append(random_module(rng, own, ext, acts, prefix=f"m{i}_"))
    return out


def _table(expr: BoolExpr, features: t.Sequence[str], primes: bool) -> t.Tuple[bool, ...]:
    from featcheck.core import all_combinations, compile_expr

    fn = compile_expr(expr)
    combos = all_combinations(sorted(features))
    if not primes:
        return tuple(fn(c, frozenset()) for c in combos)
    return tuple(fn(c, d) for c in combos for d in combos)


def canonical_module(m: FeatureModule, relabel: t.Callable[[t.Any], t.Any] = lambda l: l) -> t.Tuple[t.Any, ...]:
    """A comparison key for ``m`` after renaming locations with ``relabel``.

    Guards and switch relations are replaced by their truth tables, so two
    modules get the same key iff they agree up to the location renaming and
    logical equivalence of the labels.
    """
    feats = sorted(m.interface.features)
    own = sorted(m.own)

    def dist(d: Distribution) -> t.FrozenSet[t.Tuple[t.Any, Fraction]]:
        return frozenset((relabel(x), p) for x, p in d.items())

    acts = frozenset(
        (relabel(tr.source), _table(tr.guard, feats, False), tr.action, tr.cost, dist(tr.target)) for tr in m.tr_act
    )
    sws = frozenset(
        (relabel(tr.source), _table(tr.guard, feats, False), _table(tr.rho, own, True), tr.cost, dist(tr.target))
        for tr in m.tr_sw
    )
    return (
        frozenset(relabel(l) for l in m.locations),
        frozenset(relabel(l) for l in m.initial),
        m.interface,
        m.actions,
        acts,
        sws,
    )


def mdp_key(m: Mdp, relabel: t.Callable[[t.Any], t.Any] = lambda s: s, rules: bool = True) -> t.Tuple[t.Any, ...]:
    """Comparison key for ``m`` with states renamed by ``relabel``; indices play no part."""
    names = [relabel(s) for s in m.states]
    moves = frozenset(
        (names[i], mv.cost, frozenset((names[s], p) for s, p in mv.dist), mv.rule if rules else "")
        for i, ms in enumerate(m.moves)
        for mv in ms
    )
    return (frozenset(names), frozenset(names[i] for i in m.initial), moves)


def erase_location(literals: t.Mapping[t.Any, str]) -> t.Callable[[t.Any], t.Any]:
    """Maps ``(location, combination)`` to the state of the encoded variable module."""
    single = len(literals) == 1

    def relabel(state: t.Any) -> t.Any:
        loc, comb = state
        return ((), comb) if single else ((literals[loc],), comb)

    return relabel
