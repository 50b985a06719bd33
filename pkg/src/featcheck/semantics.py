"""Explicit MDPs, the module/controller join, and path bookkeeping."""

from __future__ import annotations

import typing as t
from collections import deque
from dataclasses import dataclass, field
from fractions import Fraction

from .controller import Controller, SwitchEvent
from .core import (
    Combination,
    ContractError,
    compile_expr,
    format_combination,
)
from .module_algebra import Cost, FeatureModule

State = t.Hashable


@dataclass(frozen=True)
class Move:
    """One nondeterministic alternative: a cost vector and a distribution.

    ``dist`` is a tuple of ``(target_index, probability)`` sorted by target.
    ``rule`` records where the move came from and takes no part in equality.
    """

    cost: Cost
    dist: t.Tuple[t.Tuple[int, Fraction], ...]
    rule: str = field(default="", compare=False)

    @property
    def targets(self) -> t.Tuple[int, ...]:
        return tuple(s for s, _ in self.dist)


@dataclass(frozen=True, eq=False)
class Mdp:
    states: t.Tuple[State, ...]
    initial: t.Tuple[int, ...]
    moves: t.Tuple[t.Tuple[Move, ...], ...]
    variables: t.Tuple[str, ...] = ()
    feature_order: t.Tuple[str, ...] = ()

    def __post_init__(self) -> None:
        if len(self.moves) != len(self.states):
            raise ContractError("one move list per state required")
        n = len(self.states)
        for i in self.initial:
            if not 0 <= i < n:
                raise ContractError(f"initial state {i} out of range")
        for src, ms in enumerate(self.moves):
            for mv in ms:
                for s, _ in mv.dist:
                    if not 0 <= s < n:
                        raise ContractError(f"move from {src} targets unknown state {s}")

    @property
    def num_states(self) -> int:
        return len(self.states)

    @property
    def num_moves(self) -> int:
        return sum(len(ms) for ms in self.moves)

    def index_of(self, state: State) -> int:
        idx = self.__dict__.get("_index")
        if idx is None:
            idx = {s: i for i, s in enumerate(self.states)}
            object.__setattr__(self, "_index", idx)
        return idx[state]

    def describe(self, i: int) -> str:
        s = self.states[i]
        if isinstance(s, tuple) and len(s) == 2 and isinstance(s[1], frozenset):
            loc, comb = s
            order = self.feature_order or None
            if self.variables and isinstance(loc, tuple):
                loc = ",".join(f"{v}={_fmt_value(x)}" for v, x in zip(self.variables, loc))
            return f"<{loc}|{format_combination(comb, order)}>"
        return str(s)

    def structurally_equal(self, other: Mdp) -> bool:
        return (
            self.states == other.states
            and self.initial == other.initial
            and all(set(a) == set(b) for a, b in zip(self.moves, other.moves))
        )


def _fmt_value(x: t.Any) -> str:
    if isinstance(x, bool):
        return "true" if x else "false"
    return str(x)


class MdpBuilder:
    """Interns states to dense indices and collects deduplicated moves."""

    def __init__(self) -> None:
        self.states: t.List[State] = []
        self.index: t.Dict[State, int] = {}
        self.moves: t.List[t.Dict[Move, None]] = []

    def intern(self, state: State) -> int:
        i = self.index.get(state)
        if i is None:
            i = len(self.states)
            self.index[state] = i
            self.states.append(state)
            self.moves.append({})
        return i

    def add_move(self, src: int, cost: Cost, dist: t.Mapping[State, Fraction], rule: str = "") -> None:
        encoded = tuple(sorted((self.intern(s), p) for s, p in dist.items()))
        mv = Move(cost, encoded, rule)
        if mv not in self.moves[src]:
            self.moves[src][mv] = None

    def build(self, initial: t.Iterable[int], **kw: t.Any) -> Mdp:
        return Mdp(tuple(self.states), tuple(initial), tuple(tuple(m) for m in self.moves), **kw)


def explore(
    initial: t.Sequence[State],
    successors: t.Callable[[State], t.Iterable[t.Tuple[Cost, t.Mapping[State, Fraction], str]]],
    all_states: t.Sequence[State] | None = None,
    **kw: t.Any,
) -> Mdp:
    """Breadth-first state-space construction.

    With ``all_states`` given, every listed state is materialized (in that
    order) instead of only those reachable from ``initial``.
    """
    b = MdpBuilder()
    if all_states is not None:
        for s in all_states:
            b.intern(s)
    init_idx = [b.intern(s) for s in initial]
    init_idx = list(dict.fromkeys(init_idx))
    if all_states is not None:
        frontier: t.Iterable[int] = range(len(b.states))
        order = list(frontier)
        for i in order:
            for cost, dist, rule in successors(b.states[i]):
                b.add_move(i, cost, dist, rule)
        if len(b.states) != len(order):
            raise ContractError("successor outside the declared state space")
        return b.build(init_idx, **kw)
    queue = deque(init_idx)
    seen = set(init_idx)
    while queue:
        i = queue.popleft()
        for cost, dist, rule in successors(b.states[i]):
            b.add_move(i, cost, dist, rule)
        for mv in b.moves[i]:
            for s, _ in mv.dist:
                if s not in seen:
                    seen.add(s)
                    queue.append(s)
    return b.build(init_idx, **kw)


def join(m: FeatureModule, c: Controller, reachable_only: bool = True) -> Mdp:
    """The MDP ``m ⋈ c`` over states ``(location, combination)``."""
    sig = c.signature
    outside = m.interface.features - set(sig.features)
    if outside:
        raise ContractError(f"module features {sorted(outside)} are not in the controller's signature")
    own = m.own

    acts: t.Dict[t.Hashable, list] = {}
    for tr in m.tr_act:
        acts.setdefault(tr.source, []).append((compile_expr(tr.guard), tr))
    sws: t.Dict[t.Hashable, list] = {}
    for tr in m.tr_sw:
        sws.setdefault(tr.source, []).append((compile_expr(tr.guard), compile_expr(tr.rho), tr))
    by_source: t.Dict[Combination, t.List[SwitchEvent]] = {}
    for e in c.events:
        by_source.setdefault(e.source, []).append(e)

    def successors(state: State):
        loc, comb = state
        for guard, tr in acts.get(loc, ()):
            if guard(comb, frozenset()):
                yield tr.cost, {(l2, comb): p for l2, p in tr.target.items()}, f"R1:{tr.action}"
        events = by_source.get(comb, ())
        mine = comb & own
        for e in events:
            if all(c2 & own == mine for c2 in e.target.support):
                yield e.cost, {(loc, c2): p for c2, p in e.target.items()}, "R2"
        for guard, rho, tr in sws.get(loc, ()):
            if not guard(comb, frozenset()):
                continue
            for e in events:
                targets = e.target.support
                if not any(c2 & own != mine for c2 in targets):
                    continue
                if not all(rho(comb, c2) for c2 in targets):
                    continue
                dist = {
                    (l2, c2): p * q for l2, p in tr.target.items() for c2, q in e.target.items()
                }
                yield tr.cost + e.cost, dist, "R3"

    initial = [(l, v) for l in m.initial for v in c.initial]
    everything = None
    if not reachable_only:
        everything = [(l, v) for l in m.locations for v in sig.combinations]
    return explore(initial, successors, everything, feature_order=sig.features)


def terminal_states(m: Mdp) -> t.FrozenSet[int]:
    return frozenset(i for i, ms in enumerate(m.moves) if not ms)


def reachable(m: Mdp, sources: t.Iterable[int] | None = None) -> t.Set[int]:
    seen = set(m.initial if sources is None else sources)
    stack = list(seen)
    while stack:
        s = stack.pop()
        for mv in m.moves[s]:
            for x, _ in mv.dist:
                if x not in seen:
                    seen.add(x)
                    stack.append(x)
    return seen


# ---------------------------------------------------------------------------
# Paths


@dataclass(frozen=True)
class Step:
    cost: Cost
    prob: Fraction
    state: State


@dataclass(frozen=True)
class Path:
    start: State
    steps: t.Tuple[Step, ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "steps", tuple(self.steps))
        for st in self.steps:
            if not 0 < st.prob <= 1:
                raise ContractError(f"step probability {st.prob} outside (0, 1]")

    def __len__(self) -> int:
        return len(self.steps)

    @property
    def last(self) -> State:
        return self.steps[-1].state if self.steps else self.start

    def prefix(self, k: int) -> Path:
        return Path(self.start, self.steps[:k])


def path_prob(p: Path) -> Fraction:
    result = Fraction(1)
    for st in p.steps:
        result *= st.prob
    return result


def path_cost(p: Path, cost_type: str) -> int:
    return sum(st.cost.get(cost_type, 0) for st in p.steps)


def is_path_of(p: Path, m: Mdp) -> bool:
    """Whether every step of ``p`` (over state indices) is backed by a move of ``m``."""
    cur = p.start
    for st in p.steps:
        if not any(mv.cost == st.cost and (st.state, st.prob) in mv.dist for mv in m.moves[cur]):
            return False
        cur = st.state
    return True


# ---------------------------------------------------------------------------
# Text exports


def _fmt_prob(p: Fraction) -> str:
    return str(p.numerator) if p.denominator == 1 else f"{p.numerator}/{p.denominator}"


def to_flat(m: Mdp) -> str:
    """One line per move: ``src cost p:target ...`` in state and move order."""
    lines = []
    for src, ms in enumerate(m.moves):
        for mv in ms:
            pairs = " ".join(f"{_fmt_prob(p)}:{s}" for s, p in mv.dist)
            lines.append(f"{src} {mv.cost.format()} {pairs}")
    return "".join(line + "\n" for line in lines)


def to_states_listing(m: Mdp) -> str:
    out = [f"states {m.num_states}", "init " + " ".join(map(str, m.initial))]
    out += [f"{i} {m.describe(i)}" for i in range(m.num_states)]
    return "\n".join(out) + "\n"


def parse_cost(text: str) -> Cost:
    if text == "-":
        return Cost()
    items = []
    for part in text.split(","):
        name, _, value = part.partition("=")
        items.append((name, int(value)))
    return Cost(items)


def from_flat(text: str, states_listing: str | None = None) -> Mdp:
    """Re-import :func:`to_flat` output; states become their indices."""
    rows: t.List[t.Tuple[int, Move]] = []
    n = 0
    for lineno, line in enumerate(text.splitlines(), 1):
        if not line.strip():
            continue
        parts = line.split()
        if len(parts) < 3:
            raise ValueError(f"line {lineno}: expected 'src cost p:target ...'")
        src = int(parts[0])
        dist = []
        for pair in parts[2:]:
            p, _, s = pair.partition(":")
            dist.append((int(s), Fraction(p)))
        if sum(p for _, p in dist) != 1:
            raise ValueError(f"line {lineno}: probabilities do not sum to 1")
        rows.append((src, Move(parse_cost(parts[1]), tuple(sorted(dist)))))
        n = max([n, src + 1] + [s + 1 for s, _ in dist])
    initial: t.Tuple[int, ...] = (0,) if n else ()
    if states_listing is not None:
        for line in states_listing.splitlines():
            if line.startswith("states "):
                n = max(n, int(line.split()[1]))
            elif line.startswith("init"):
                initial = tuple(int(x) for x in line.split()[1:])
    moves: t.List[t.List[Move]] = [[] for _ in range(n)]
    for src, mv in rows:
        moves[src].append(mv)
    return Mdp(tuple(range(n)), initial, tuple(tuple(ms) for ms in moves))


def to_dot(m: Mdp, scheduler: t.Mapping[int, int] | None = None, values: t.Sequence[float] | None = None) -> str:
    """GraphViz rendering; scheduled moves are drawn bold when a scheduler is given."""
    out = ["digraph mdp {", "  rankdir=LR;", '  node [shape=ellipse, fontname="Helvetica"];']
    init = set(m.initial)
    for i in range(m.num_states):
        label = m.describe(i).replace('"', r"\"")
        if values is not None:
            label += f"\\n{values[i]:.6g}"
        shape = ', peripheries=2' if i in init else ""
        out.append(f'  s{i} [label="{i}: {label}"{shape}];')
    for src, ms in enumerate(m.moves):
        for k, mv in enumerate(ms):
            chosen = scheduler is not None and scheduler.get(src) == k
            style = ", style=bold, color=blue" if chosen else ""
            node = f"m{src}_{k}"
            out.append(f'  {node} [shape=point, label=""];')
            out.append(f'  s{src} -> {node} [label="{mv.cost.format()}", arrowhead=none{style}];')
            for s, p in mv.dist:
                out.append(f'  {node} -> s{s} [label="{_fmt_prob(p)}"{style}];')
    out.append("}")
    return "\n".join(out) + "\n"
