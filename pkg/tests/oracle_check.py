"""Comparison of engine results against the brute-force scheduler oracle."""

from __future__ import annotations

import math
import random
import typing as t

from featcheck.analysis import Query, QueryKind, brute_force_oracle, check, induced_chain, solve_chain
from featcheck.semantics import Mdp
from generators import random_mdp, random_target

PROB_TOL = 1e-9
COST_REL_TOL = 1e-6
ALL_KINDS = tuple(QueryKind)


def close(kind: QueryKind, got: float, want: float) -> bool:
    if math.isinf(want) or math.isinf(got):
        return math.isinf(want) and math.isinf(got)
    if kind.is_cost:
        if want == 0:
            return abs(got) <= PROB_TOL
        return abs(got - want) <= COST_REL_TOL * abs(want)
    return abs(got - want) <= PROB_TOL


def random_query(rng: random.Random, mdp: Mdp, kind: QueryKind) -> Query:
    target = random_target(rng, mdp.num_states)
    if kind.is_cost:
        return Query(kind, target, cost_type="energy")
    if kind.is_until:
        return Query(kind, target, constraint=frozenset(s for s in range(mdp.num_states) if rng.random() < 0.7))
    return Query(kind, target)


def mismatches(mdp: Mdp, query: Query) -> t.List[str]:
    """Every state where the engine disagrees with the oracle, or where its
    own scheduler does not achieve the value it reports."""
    engine = check(mdp, query)
    oracle = brute_force_oracle(mdp, query)
    achieved = solve_chain(induced_chain(mdp, engine.scheduler), query)
    out = []
    for s in range(mdp.num_states):
        want = float(oracle.values[s])
        got = float(engine.values[s])
        if not close(query.kind, got, want):
            out.append(f"{query.kind.value} state {s}: engine {got!r}, oracle {want!r}")
        ach = math.inf if achieved[s] is None else float(achieved[s])
        if not close(query.kind, ach, want):
            out.append(f"{query.kind.value} state {s}: scheduler achieves {ach!r}, oracle {want!r}")
    return out


def run_batch(seeds: t.Iterable[int], kinds: t.Sequence[QueryKind] = ALL_KINDS) -> t.Tuple[int, t.List[str]]:
    """Check every kind on one random MDP per seed; returns (count, failures)."""
    count = 0
    failures: t.List[str] = []
    for seed in seeds:
        rng = random.Random(seed)
        mdp = random_mdp(rng)
        count += 1
        for kind in kinds:
            q = random_query(rng, mdp, kind)
            failures.extend(f"seed {seed}: {msg}" for msg in mismatches(mdp, q))
    return count, failures
