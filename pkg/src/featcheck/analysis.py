"""Quantitative analysis of explicit MDPs.

Extremal reachability, constrained reachability and expected accumulated
cost, each with a memoryless deterministic scheduler attaining the optimum.

The engine works in three stages: a graph-based qualitative precomputation
fixes every state whose value is 0, 1 or infinite; value iteration brings
the remaining states close to the optimum; a short policy-iteration pass
then turns the near-optimal choice into an exactly evaluated scheduler.
"""

from __future__ import annotations

import enum
import itertools
import math
import typing as t
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
import scipy.sparse as sp
import scipy.sparse.csgraph as csgraph
import scipy.sparse.linalg as spla

from .core import ContractError
from .semantics import Mdp, Move

INF = math.inf


class QueryKind(str, enum.Enum):
    PMAX_REACH = "PmaxReach"
    PMIN_REACH = "PminReach"
    PMAX_UNTIL = "PmaxUntil"
    PMIN_UNTIL = "PminUntil"
    EMIN_REACH = "EminReach"
    EMAX_REACH = "EmaxReach"

    @property
    def is_cost(self) -> bool:
        return self in (QueryKind.EMIN_REACH, QueryKind.EMAX_REACH)

    @property
    def is_until(self) -> bool:
        return self in (QueryKind.PMAX_UNTIL, QueryKind.PMIN_UNTIL)

    @property
    def maximize(self) -> bool:
        return self in (QueryKind.PMAX_REACH, QueryKind.PMAX_UNTIL, QueryKind.EMAX_REACH)


StatePredicate = t.Union[t.AbstractSet[int], t.Sequence[bool], np.ndarray, t.Callable[[t.Any], bool]]

_COMPARE = {
    "<": lambda a, b: a < b,
    "<=": lambda a, b: a <= b,
    ">": lambda a, b: a > b,
    ">=": lambda a, b: a >= b,
}


@dataclass(frozen=True)
class Query:
    kind: QueryKind
    target: t.Any
    cost_type: str | None = None
    constraint: t.Any = None
    threshold: t.Tuple[str, float] | None = None
    name: str = ""

    def __post_init__(self) -> None:
        object.__setattr__(self, "kind", QueryKind(self.kind))
        if self.kind.is_cost and not self.cost_type:
            raise ContractError(f"{self.kind.value} needs a cost type")
        if self.kind.is_until and self.constraint is None:
            raise ContractError(f"{self.kind.value} needs a constraint")
        if self.threshold is not None and self.threshold[0] not in _COMPARE:
            raise ContractError(f"unknown comparison {self.threshold[0]!r}")


class ConvergenceError(RuntimeError):
    pass


class OracleRefusal(ContractError):
    pass


@dataclass(frozen=True)
class Scheduler:
    """Chosen move index per state; -1 marks terminal states."""

    choices: t.Tuple[int, ...]

    def __getitem__(self, state: int) -> int:
        return self.choices[state]

    def get(self, state: int, default: int | None = None) -> int | None:
        c = self.choices[state]
        return default if c < 0 else c

    def as_dict(self) -> t.Dict[int, int]:
        return {s: c for s, c in enumerate(self.choices) if c >= 0}


@dataclass
class AnalysisResult:
    values: np.ndarray
    scheduler: Scheduler | None = None
    iterations: int = 0
    residual: float = 0.0
    query: Query | None = field(default=None, repr=False)
    exact: t.Tuple[Fraction | None, ...] | None = field(default=None, repr=False)

    def value(self, state: int) -> float:
        return float(self.values[state])

    def holds(self, state: int) -> bool:
        if self.query is None or self.query.threshold is None:
            raise ContractError("query has no threshold")
        op, bound = self.query.threshold
        return _COMPARE[op](self.values[state], bound)


@dataclass(frozen=True)
class Options:
    epsilon_prob: float = 1e-9
    epsilon_cost: float = 1e-8
    max_iters: int = 10**6
    callback: t.Callable[[int, np.ndarray], None] | None = field(default=None, compare=False)

    @classmethod
    def with_epsilon(cls, epsilon: float | None, max_iters: int | None = None) -> Options:
        kw: t.Dict[str, t.Any] = {}
        if epsilon is not None:
            if epsilon <= 0:
                raise ContractError("epsilon must be positive")
            kw.update(epsilon_prob=epsilon, epsilon_cost=epsilon * 10)
        if max_iters is not None:
            if max_iters <= 0:
                raise ContractError("max_iters must be positive")
            kw["max_iters"] = max_iters
        return cls(**kw)


DEFAULT = Options()

# Improvement threshold for the policy-iteration polish. Values come from
# direct linear solves, so anything below this is rounding noise.
_PI_TOL = 1e-12


# ---------------------------------------------------------------------------
# Sparse view of an Mdp


class _Sparse:
    def __init__(self, m: Mdp):
        n = m.num_states
        counts = np.fromiter((len(ms) for ms in m.moves), dtype=np.int64, count=n)
        self.n = n
        self.ptr = np.zeros(n + 1, dtype=np.int64)
        np.cumsum(counts, out=self.ptr[1:])
        self.m = int(self.ptr[-1])
        self.owner = np.repeat(np.arange(n, dtype=np.int64), counts)
        rows, cols, vals = [], [], []
        k = 0
        cost_types: t.Set[str] = set()
        for ms in m.moves:
            for mv in ms:
                for s, p in mv.dist:
                    rows.append(k)
                    cols.append(s)
                    vals.append(float(p))
                cost_types.update(mv.cost)
                k += 1
        self.P = sp.csr_matrix(
            (np.asarray(vals, dtype=float), (np.asarray(rows, dtype=np.int64), np.asarray(cols, dtype=np.int64))),
            shape=(self.m, n),
        )
        self.P.sum_duplicates()
        self.B = self.P.copy()
        self.B.data[:] = 1.0
        coo = self.B.tocoo()
        self.edge_move = coo.row.astype(np.int64)
        self.edge_dst = coo.col.astype(np.int64)
        self._moves = m.moves
        self._costs: t.Dict[str, np.ndarray] = {}

    def cost(self, name: str) -> np.ndarray:
        c = self._costs.get(name)
        if c is None:
            c = np.fromiter((mv.cost.get(name, 0) for ms in self._moves for mv in ms), dtype=float, count=self.m)
            self._costs[name] = c
        return c

    def moves_into(self, mask: np.ndarray) -> np.ndarray:
        """Per move: does some successor lie in ``mask``?"""
        return (self.B @ mask.astype(float)) > 0

    def moves_within(self, mask: np.ndarray) -> np.ndarray:
        """Per move: do all successors lie in ``mask``?"""
        return (self.B @ (~mask).astype(float)) == 0

    def states_with(self, move_mask: np.ndarray) -> np.ndarray:
        out = np.zeros(self.n, dtype=bool)
        out[self.owner[move_mask]] = True
        return out

    def first_move(self, move_mask: np.ndarray) -> np.ndarray:
        """Lowest-index move per state among ``move_mask`` (-1 if none)."""
        out = np.full(self.n, -1, dtype=np.int64)
        idx = np.flatnonzero(move_mask)
        if idx.size:
            owners = self.owner[idx]
            first = np.flatnonzero(np.r_[True, owners[1:] != owners[:-1]])
            out[owners[first]] = idx[first]
        return out


def sparse_view(m: Mdp) -> _Sparse:
    cached = m.__dict__.get("_sparse")
    if cached is None:
        cached = _Sparse(m)
        object.__setattr__(m, "_sparse", cached)
    return cached


def resolve_states(m: Mdp, pred: t.Any) -> np.ndarray:
    """Turn a state predicate into a boolean mask over state indices."""
    n = m.num_states
    if pred is None:
        return np.ones(n, dtype=bool)
    if isinstance(pred, np.ndarray) and pred.dtype == bool:
        if pred.shape != (n,):
            raise ContractError("state mask has the wrong length")
        return pred.copy()
    if callable(pred):
        return np.fromiter((bool(pred(s)) for s in m.states), dtype=bool, count=n)
    if isinstance(pred, (set, frozenset, range)):
        mask = np.zeros(n, dtype=bool)
        idx = [i for i in pred]
        if any(not 0 <= i < n for i in idx):
            raise ContractError("state index out of range in predicate")
        mask[idx] = True
        return mask
    seq = list(pred)
    if len(seq) == n and all(isinstance(x, (bool, np.bool_)) for x in seq):
        return np.asarray(seq, dtype=bool)
    return resolve_states(m, set(seq))


# ---------------------------------------------------------------------------
# Qualitative precomputation


def _can_reach(g: _Sparse, enabled: np.ndarray, target: np.ndarray) -> np.ndarray:
    """States from which ``target`` is reachable using enabled moves."""
    n = g.n
    keep = enabled[g.edge_move]
    tgt = np.flatnonzero(target)
    # Reverse edges plus a virtual source (index n) pointing at every target.
    rows = np.concatenate([g.edge_dst[keep], np.full(tgt.size, n)])
    cols = np.concatenate([g.owner[g.edge_move[keep]], tgt])
    graph = sp.csr_matrix((np.ones(rows.size), (rows, cols)), shape=(n + 1, n + 1))
    order = csgraph.breadth_first_order(graph, n, directed=True, return_predecessors=False)
    out = np.zeros(n, dtype=bool)
    out[order[order < n]] = True
    return out


def _avoid(g: _Sparse, enabled: np.ndarray, target: np.ndarray) -> t.Tuple[np.ndarray, np.ndarray]:
    """States where some scheduler never reaches ``target`` (value Pmin = 0).

    Also returns, per state of that set, a move keeping the path inside it.
    """
    terminal = ~g.states_with(enabled)
    z = ~target
    while True:
        good = enabled & g.moves_within(z)
        nz = z & (terminal | g.states_with(good))
        if np.array_equal(nz, z):
            return z, g.first_move(good)
        z = nz


def _attract(
    g: _Sparse, candidates: np.ndarray, base: np.ndarray, region: np.ndarray
) -> t.Tuple[np.ndarray, np.ndarray]:
    """Layered backward attractor.

    A region state joins once it has a candidate move with a successor in
    the current set; the lowest such move at the earliest layer is recorded.
    """
    reached = base.copy()
    choice = np.full(g.n, -1, dtype=np.int64)
    while True:
        fresh = candidates & g.moves_into(reached) & ~reached[g.owner] & region[g.owner]
        if not fresh.any():
            return reached, choice
        first = g.first_move(fresh)
        new = first >= 0
        choice[new] = first[new]
        reached |= new


def _prob1e(g: _Sparse, enabled: np.ndarray, target: np.ndarray) -> t.Tuple[np.ndarray, np.ndarray]:
    """States with Pmax = 1, plus a scheduler attaining it there."""
    u = _can_reach(g, enabled, target)
    while True:
        cand = enabled & g.moves_within(u)
        r, choice = _attract(g, cand, target & u, u)
        if np.array_equal(r, u):
            return u, choice
        u = r


def _prob1a(g: _Sparse, enabled: np.ndarray, target: np.ndarray, avoid: np.ndarray) -> np.ndarray:
    """States with Pmin = 1: they cannot reach the avoid set through non-target states."""
    bad = _can_reach(g, enabled & ~target[g.owner], avoid)
    return ~bad


# ---------------------------------------------------------------------------
# Quantitative core


class _Region:
    """Moves of the undecided states, grouped for segmented reductions."""

    def __init__(self, g: _Sparse, states: np.ndarray, moves: np.ndarray, cost: np.ndarray | None):
        self.g = g
        self.states = np.flatnonzero(states)
        self.mask = states
        sel = np.flatnonzero(moves & states[g.owner])
        self.sel = sel
        owners = g.owner[sel]
        if sel.size:
            self.starts = np.flatnonzero(np.r_[True, owners[1:] != owners[:-1]])
        else:
            self.starts = np.zeros(0, dtype=np.int64)
        seen = owners[self.starts] if sel.size else np.zeros(0, dtype=np.int64)
        if not np.array_equal(seen, self.states):
            raise ContractError("internal: undecided state without an admissible move")
        self.P = g.P[sel]
        self.b = cost[sel] if cost is not None else np.zeros(sel.size)
        self.pos = np.full(g.n, -1, dtype=np.int64)
        self.pos[self.states] = np.arange(self.states.size)

    def q(self, x: np.ndarray) -> np.ndarray:
        return self.b + self.P @ x

    def best(self, qv: np.ndarray, maximize: bool) -> np.ndarray:
        red = np.maximum if maximize else np.minimum
        return red.reduceat(qv, self.starts)

    def near_optimal(self, qv: np.ndarray, best: np.ndarray, tol: np.ndarray) -> np.ndarray:
        seg = np.repeat(np.arange(self.starts.size), np.diff(np.r_[self.starts, self.sel.size]))
        return np.abs(qv - best[seg]) <= tol[seg]

    def lowest(self, local_mask: np.ndarray) -> np.ndarray:
        full = np.zeros(self.g.m, dtype=bool)
        full[self.sel[local_mask]] = True
        return self.g.first_move(full)[self.states]

    def evaluate(self, policy: np.ndarray, x_fixed: np.ndarray, cost: np.ndarray | None) -> np.ndarray:
        """Exact value of a memoryless policy (global move indices per region state)."""
        g = self.g
        k = self.states.size
        rows = g.P[policy]
        b = (cost[policy] if cost is not None else np.zeros(k)) + rows @ np.where(self.mask, 0.0, x_fixed)
        inner = rows[:, self.states]
        if k <= 300:
            a = np.eye(k) - inner.toarray()
            try:
                sol = np.linalg.solve(a, b)
            except np.linalg.LinAlgError as exc:
                raise ContractError("internal: policy evaluation on an improper policy") from exc
        else:
            a = (sp.identity(k, format="csc") - inner.tocsc()).tocsc()
            sol = spla.spsolve(a, b)
            if not np.all(np.isfinite(sol)):
                raise ContractError("internal: policy evaluation on an improper policy")
        x = x_fixed.copy()
        x[self.states] = sol
        return x


def _optimize(
    region: _Region,
    x: np.ndarray,
    maximize: bool,
    is_cost: bool,
    opts: Options,
    attractor_base: np.ndarray | None,
    candidates_all: np.ndarray | None,
    cost: np.ndarray | None,
) -> t.Tuple[np.ndarray, np.ndarray, int, float]:
    x = x.copy()
    if region.states.size == 0:
        return x, np.zeros(0, dtype=np.int64), 0, 0.0
    eps = opts.epsilon_cost if is_cost else opts.epsilon_prob
    it = 0
    residual = INF
    while True:
        it += 1
        qv = region.q(x)
        new = region.best(qv, maximize)
        old = x[region.states]
        diff = np.abs(new - old)
        if is_cost:
            residual = float(np.max(diff / np.maximum(np.abs(new), 1.0)))
        else:
            residual = float(np.max(diff))
        x[region.states] = new
        if opts.callback is not None:
            opts.callback(it, x.copy())
        if residual < eps:
            break
        if it >= opts.max_iters:
            raise ConvergenceError(
                f"value iteration did not converge within {opts.max_iters} iterations (residual {residual:.3e})"
            )

    def choose(xv: np.ndarray, tol_scale: float) -> np.ndarray:
        qv = region.q(xv)
        best = region.best(qv, maximize)
        tol = tol_scale * np.maximum(np.abs(best), 1.0)
        near = region.near_optimal(qv, best, tol)
        pol = region.lowest(near)
        if attractor_base is not None:
            cand = np.zeros(region.g.m, dtype=bool)
            cand[region.sel[near]] = True
            if candidates_all is not None:
                cand &= candidates_all
            _, ch = _attract(region.g, cand, attractor_base, region.mask)
            picked = ch[region.states]
            pol = np.where(picked >= 0, picked, pol)
        return pol

    policy = choose(x, max(eps, 1e-9) * 10)
    xv = region.evaluate(policy, x, cost)
    for _ in range(1000):
        qv = region.q(xv)
        best = region.best(qv, maximize)
        cur = xv[region.states]
        tol = _PI_TOL * np.maximum(np.abs(cur), 1.0)
        better = (best > cur + 2 * tol) if maximize else (best < cur - 2 * tol)
        if not better.any():
            break
        near = region.near_optimal(qv, best, tol)
        upd = region.lowest(near)
        policy = np.where(better, upd, policy)
        xv = region.evaluate(policy, x, cost)
        it += 1
    # Canonical tie-breaking: keep it only when it reproduces the optimum.
    canon = choose(xv, 1e-10)
    if not np.array_equal(canon, policy):
        try:
            xc = region.evaluate(canon, x, cost)
        except ContractError:
            xc = None
        if xc is not None and np.all(np.abs(xc - xv) <= 1e-12 * np.maximum(np.abs(xv), 1.0)):
            policy, xv = canon, xc
    qv = region.q(xv)
    final_res = float(np.max(np.abs(region.best(qv, maximize) - xv[region.states])))
    return xv, policy, it, min(residual, final_res)


def _scheduler(g: _Sparse, m: Mdp, per_state: np.ndarray) -> Scheduler:
    """Convert global move indices (or -1) into local indices; fill gaps with 0."""
    out = []
    for s in range(g.n):
        nm = len(m.moves[s])
        if nm == 0:
            out.append(-1)
        elif per_state[s] >= 0:
            out.append(int(per_state[s] - g.ptr[s]))
        else:
            out.append(0)
    return Scheduler(tuple(out))


def _masks(m: Mdp, query: Query) -> t.Tuple[_Sparse, np.ndarray, np.ndarray]:
    g = sparse_view(m)
    target = resolve_states(m, query.target)
    if query.kind.is_until:
        keep = resolve_states(m, query.constraint) & ~target
    else:
        keep = ~target
    # Target states are absorbing; states outside V ∪ T lose their moves.
    enabled = keep[g.owner]
    return g, target, enabled


def reach_opt(m: Mdp, target: t.Any, mode: str = "max", options: Options = DEFAULT) -> AnalysisResult:
    kind = QueryKind.PMAX_REACH if mode == "max" else QueryKind.PMIN_REACH
    return check(m, Query(kind, target), options)


def until_opt(m: Mdp, constraint: t.Any, target: t.Any, mode: str = "max", options: Options = DEFAULT) -> AnalysisResult:
    kind = QueryKind.PMAX_UNTIL if mode == "max" else QueryKind.PMIN_UNTIL
    return check(m, Query(kind, target, constraint=constraint), options)


def expected_cost_opt(
    m: Mdp, cost_type: str, target: t.Any, mode: str = "min", options: Options = DEFAULT
) -> AnalysisResult:
    kind = QueryKind.EMIN_REACH if mode == "min" else QueryKind.EMAX_REACH
    return check(m, Query(kind, target, cost_type=cost_type), options)


def check(m: Mdp, query: Query, options: Options = DEFAULT) -> AnalysisResult:
    """Answer ``query`` for every state of ``m``."""
    if m.num_states == 0:
        return AnalysisResult(np.zeros(0), Scheduler(()), 0, 0.0, query)
    g, target, enabled = _masks(m, query)
    kind = query.kind
    choice = np.full(g.n, -1, dtype=np.int64)
    x = np.zeros(g.n)
    it, res = 0, 0.0

    if kind.is_cost:
        cost = g.cost(query.cost_type)
        if kind.maximize:
            avoid, keep_move = _avoid(g, enabled, target)
            finite = _prob1a(g, enabled, target, avoid)
            region = _Region(g, finite & ~target, enabled, cost)
            x, pol, it, res = _optimize(region, x, True, True, options, None, None, cost)
            choice[region.states] = pol
            # Infinite states: head for the avoid set and stay there.
            inf = ~finite
            choice[avoid] = keep_move[avoid]
            _, toward = _attract(g, enabled, avoid, inf & ~avoid)
            choice[inf & ~avoid] = toward[inf & ~avoid]
            x[inf] = INF
        else:
            finite, proper = _prob1e(g, enabled, target)
            allowed = enabled & g.moves_within(finite)
            region = _Region(g, finite & ~target, allowed, cost)
            if region.states.size:
                x = region.evaluate(proper[region.states], x, cost)
            x, pol, it, res = _optimize(region, x, False, True, options, target, allowed, cost)
            choice[region.states] = pol
            x[~finite] = INF
        x[target] = 0.0
    elif kind.maximize:
        reach = _can_reach(g, enabled, target)
        yes, yes_choice = _prob1e(g, enabled, target)
        x[yes] = 1.0
        choice[yes] = yes_choice[yes]
        maybe = reach & ~yes
        region = _Region(g, maybe, enabled, None)
        x, pol, it, res = _optimize(region, x, True, False, options, yes, None, None)
        choice[region.states] = pol
    else:
        avoid, keep_move = _avoid(g, enabled, target)
        one = _prob1a(g, enabled, target, avoid)
        x[one] = 1.0
        maybe = ~avoid & ~one
        x[maybe] = 1.0
        choice[avoid] = keep_move[avoid]
        region = _Region(g, maybe, enabled, None)
        x, pol, it, res = _optimize(region, x, False, False, options, None, None, None)
        choice[region.states] = pol
    if not kind.is_cost:
        np.clip(x, 0.0, 1.0, out=x)
    x[target & ~np.isinf(x)] = 0.0 if kind.is_cost else 1.0
    return AnalysisResult(x, _scheduler(g, m, choice), it, res, query)


# ---------------------------------------------------------------------------
# Markov chains and the brute-force oracle


def induced_chain(m: Mdp, scheduler: Scheduler | t.Mapping[int, int]) -> Mdp:
    """Keep only the scheduled move of every state."""
    choices = scheduler.as_dict() if isinstance(scheduler, Scheduler) else dict(scheduler)
    moves: t.List[t.Tuple[Move, ...]] = []
    for s, ms in enumerate(m.moves):
        if s in choices:
            k = choices[s]
            if not 0 <= k < len(ms):
                raise ContractError(f"scheduler selects disabled move {k} at state {s}")
            moves.append((ms[k],))
        elif ms:
            raise ContractError(f"scheduler undefined at nonterminal state {s}")
        else:
            moves.append(())
    return Mdp(m.states, m.initial, tuple(moves), m.variables, m.feature_order)


def _solve_exact(a: t.List[t.List[Fraction]], b: t.List[Fraction]) -> t.List[Fraction]:
    n = len(b)
    rows = [list(r) + [v] for r, v in zip(a, b)]
    for col in range(n):
        piv = next((r for r in range(col, n) if rows[r][col] != 0), None)
        if piv is None:
            raise ContractError("singular system")
        rows[col], rows[piv] = rows[piv], rows[col]
        pv = rows[col][col]
        rows[col] = [v / pv for v in rows[col]]
        for r in range(n):
            if r != col and rows[r][col] != 0:
                f = rows[r][col]
                rows[r] = [x - f * y for x, y in zip(rows[r], rows[col])]
    return [rows[i][n] for i in range(n)]


def _chain_values(
    succ: t.Sequence[t.Sequence[t.Tuple[int, Fraction]] | None],
    costs: t.Sequence[int],
    target: t.Sequence[bool],
) -> t.Tuple[t.List[Fraction], t.List[Fraction | None]]:
    """Exact reachability probabilities and expected costs of a Markov chain.

    ``succ[s]`` is the distribution of the single move at ``s`` or ``None``.
    """
    n = len(succ)
    # Graph reachability to the target decides the zero-probability states.
    can = [bool(target[s]) for s in range(n)]
    changed = True
    while changed:
        changed = False
        for s in range(n):
            if not can[s] and succ[s] and any(can[x] for x, _ in succ[s]):
                can[s] = changed = True
    unknown = [s for s in range(n) if can[s] and not target[s]]
    prob = [Fraction(1) if target[s] else Fraction(0) for s in range(n)]
    if unknown:
        pos = {s: i for i, s in enumerate(unknown)}
        a = [[Fraction(0)] * len(unknown) for _ in unknown]
        b = [Fraction(0)] * len(unknown)
        for s in unknown:
            i = pos[s]
            a[i][i] += 1
            for x, p in succ[s] or ():
                if x in pos:
                    a[i][pos[x]] -= p
                elif target[x]:
                    b[i] += p
        for s, v in zip(unknown, _solve_exact(a, b)):
            prob[s] = v
    cost: t.List[Fraction | None] = [None if prob[s] != 1 else Fraction(0) for s in range(n)]
    fin = [s for s in range(n) if prob[s] == 1 and not target[s]]
    if fin:
        pos = {s: i for i, s in enumerate(fin)}
        a = [[Fraction(0)] * len(fin) for _ in fin]
        b = [Fraction(costs[s]) for s in fin]
        for s in fin:
            i = pos[s]
            a[i][i] += 1
            for x, p in succ[s] or ():
                if x in pos:
                    a[i][pos[x]] -= p
        for s, v in zip(fin, _solve_exact(a, b)):
            cost[s] = v
    return prob, cost


def solve_chain(m: Mdp, query: Query) -> t.List[Fraction | None]:
    """Exact value of ``query`` on a Markov chain (at most one move per state)."""
    if any(len(ms) > 1 for ms in m.moves):
        raise ContractError("solve_chain needs at most one move per state")
    target = resolve_states(m, query.target)
    keep = resolve_states(m, query.constraint) if query.kind.is_until else np.ones(m.num_states, dtype=bool)
    succ = [
        (ms[0].dist if ms and keep[s] and not target[s] else None) for s, ms in enumerate(m.moves)
    ]
    costs = [
        (ms[0].cost.get(query.cost_type, 0) if ms and query.cost_type else 0) for ms in m.moves
    ]
    prob, cost = _chain_values(succ, costs, list(target))
    return list(cost) if query.kind.is_cost else list(prob)


@dataclass
class OracleValues:
    """Per-state extremal values over all memoryless deterministic schedulers."""

    pmax: t.List[Fraction]
    pmin: t.List[Fraction]
    emin: t.List[Fraction | None]
    emax: t.List[Fraction | None]
    schedulers: int


def _cmp_cost(a: Fraction | None, b: Fraction | None) -> int:
    if a is None and b is None:
        return 0
    if a is None:
        return 1
    if b is None:
        return -1
    return (a > b) - (a < b)


def oracle_values(
    m: Mdp,
    target: t.Any,
    cost_type: str | None = None,
    constraint: t.Any = None,
    max_states: int = 8,
    max_schedulers: int = 10**5,
) -> OracleValues:
    """Enumerate every memoryless deterministic scheduler and solve exactly."""
    n = m.num_states
    if n > max_states:
        raise OracleRefusal(f"oracle refuses MDPs with more than {max_states} states (got {n})")
    tmask = resolve_states(m, target)
    keep = resolve_states(m, constraint) if constraint is not None else np.ones(n, dtype=bool)
    free = [s for s in range(n) if m.moves[s] and keep[s] and not tmask[s]]
    total = 1
    for s in free:
        total *= len(m.moves[s])
    if total > max_schedulers:
        raise OracleRefusal(f"oracle refuses {total} schedulers (bound {max_schedulers})")
    tl = [bool(x) for x in tmask]
    best: OracleValues | None = None
    for pick in itertools.product(*(range(len(m.moves[s])) for s in free)):
        succ: t.List[t.Any] = [None] * n
        costs = [0] * n
        for s, k in zip(free, pick):
            mv = m.moves[s][k]
            succ[s] = mv.dist
            costs[s] = mv.cost.get(cost_type, 0) if cost_type else 0
        prob, cost = _chain_values(succ, costs, tl)
        if best is None:
            best = OracleValues(list(prob), list(prob), list(cost), list(cost), total)
            continue
        for s in range(n):
            best.pmax[s] = max(best.pmax[s], prob[s])
            best.pmin[s] = min(best.pmin[s], prob[s])
            if _cmp_cost(cost[s], best.emin[s]) < 0:
                best.emin[s] = cost[s]
            if _cmp_cost(cost[s], best.emax[s]) > 0:
                best.emax[s] = cost[s]
    assert best is not None
    return best


def brute_force_oracle(m: Mdp, query: Query, max_states: int = 8, max_schedulers: int = 10**5) -> AnalysisResult:
    ov = oracle_values(m, query.target, query.cost_type, query.constraint, max_states, max_schedulers)
    pick = {
        QueryKind.PMAX_REACH: ov.pmax,
        QueryKind.PMAX_UNTIL: ov.pmax,
        QueryKind.PMIN_REACH: ov.pmin,
        QueryKind.PMIN_UNTIL: ov.pmin,
        QueryKind.EMIN_REACH: ov.emin,
        QueryKind.EMAX_REACH: ov.emax,
    }[query.kind]
    values = np.array([INF if v is None else float(v) for v in pick])
    return AnalysisResult(values, None, ov.schedulers, 0.0, query, tuple(pick))


# ---------------------------------------------------------------------------
# Export


def format_value(v: float) -> str:
    if math.isinf(v):
        return "inf"
    return repr(float(v))


def values_csv(result: AnalysisResult, states: t.Iterable[int]) -> str:
    lines = ["state,value"]
    lines += [f"{s},{format_value(result.values[s])}" for s in states]
    return "\n".join(lines) + "\n"


def scheduler_csv(scheduler: Scheduler) -> str:
    lines = ["state,move"]
    lines += [f"{s},{c}" for s, c in enumerate(scheduler.choices) if c >= 0]
    return "\n".join(lines) + "\n"
