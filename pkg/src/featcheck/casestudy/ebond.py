"""Generator for the eBond+ dynamic product line of bonded network cards.

The device bonds up to three NICs (one fast, two slow). Which NICs are
plugged is a runtime feature combination managed by the controller; which
plugged NICs are awake is decided each round by one of three coordination
algorithms. An environment module drives the requested bandwidth as a
random walk and flags SLA violations.

Every round runs through the phases

    dem  the environment draws the new bandwidth request
    ctl  the controller may plug or unplug one NIC
    rec  coordination decides which working plugged NICs are awake
    op   NICs serve the request for one operating phase

and the clock, which counts operating phases, advances in ``op``. The
model starts in a one-off ``buy`` phase that charges the purchase price of
the initial configuration.

Coordination sees the current request and the link state of each NIC, and
every algorithm falls back to all working NICs when no candidate set has
enough capacity. A round therefore violates the SLA exactly when the
request exceeds the capacity of the working plugged NICs, and the algorithms
differ in energy only.
"""

from __future__ import annotations

import typing as t
from dataclasses import dataclass, field
from fractions import Fraction

from ..core import Combination, ContractError, FeatureSignature
from ..vardsl.elaborate import System, load_system

FEATURES = ("Fast", "Slow1", "Slow2", "Std", "Pro", "Aggr", "High", "Bal", "Env")
NICS = ("Fast", "Slow1", "Slow2")
ALGORITHMS = {"A": "Aggr", "H": "High", "B": "Bal"}
BUNDLES = {"S": "Std", "P": "Pro"}
QUERY_NAMES = ("phi_p", "phi_e", "phi_m", "phi_s")

# Candidate sets of awake NICs, cheapest first. A lone Slow2 is needed
# once Slow1 has failed.
_CANDIDATES: t.Tuple[t.Tuple[str, ...], ...] = (
    ("Slow1",),
    ("Slow2",),
    ("Slow1", "Slow2"),
    ("Fast",),
    ("Fast", "Slow1"),
    ("Fast", "Slow2"),
    ("Fast", "Slow1", "Slow2"),
)
_SHORT = {"Fast": "F", "Slow1": "S1", "Slow2": "S2"}
_ALGO_PREFIX = {"Aggr": "a", "High": "h", "Bal": "b"}


def _default_power() -> t.Dict[str, t.Tuple[int, int]]:
    # (idle, load) in milliwatts. The slow figures are the 1 GBit card's;
    # the fast ones are placeholders that tests set explicitly.
    return {"fast": (5200, 8600), "slow": (1780, 1920)}


def _default_prices() -> t.Dict[str, int]:
    # Placeholder prices in money units.
    return {"Fast": 500, "Slow": 30, "Std": 100, "Pro": 200}


@dataclass(frozen=True)
class EbondParams:
    max_bandwidth_mbit: int = 2000
    horizon_minutes: int = 60
    reconfig_delay_min: int = 20
    operating_phase_min: int = 5
    cooldown_min: int = 30
    hysteresis_pct: int = 10
    nic_fail_prob: Fraction = Fraction(1, 1000)
    bandwidth_step_mbit: int = 100
    sla_cost_money: int = 200
    p_floor: Fraction = Fraction(1, 20)
    fast_capacity_mbit: int = 10000
    slow_capacity_mbit: int = 1000
    nic_power_mw: t.Mapping[str, t.Tuple[int, int]] = field(default_factory=_default_power)
    prices: t.Mapping[str, int] = field(default_factory=_default_prices)

    def __post_init__(self) -> None:
        object.__setattr__(self, "nic_fail_prob", Fraction(self.nic_fail_prob))
        object.__setattr__(self, "p_floor", Fraction(self.p_floor))
        object.__setattr__(self, "nic_power_mw", dict(self.nic_power_mw))
        object.__setattr__(self, "prices", dict(self.prices))
        self.validate()

    def validate(self) -> None:
        naturals = {
            "max_bandwidth_mbit": self.max_bandwidth_mbit,
            "horizon_minutes": self.horizon_minutes,
            "reconfig_delay_min": self.reconfig_delay_min,
            "operating_phase_min": self.operating_phase_min,
            "cooldown_min": self.cooldown_min,
            "hysteresis_pct": self.hysteresis_pct,
            "bandwidth_step_mbit": self.bandwidth_step_mbit,
            "sla_cost_money": self.sla_cost_money,
            "fast_capacity_mbit": self.fast_capacity_mbit,
            "slow_capacity_mbit": self.slow_capacity_mbit,
        }
        for name, v in naturals.items():
            if isinstance(v, bool) or not isinstance(v, int) or v < 0:
                raise ContractError(f"{name} must be a natural number, got {v!r}")
        if self.bandwidth_step_mbit == 0 or self.max_bandwidth_mbit == 0:
            raise ContractError("bandwidth bound and step must be positive")
        if self.max_bandwidth_mbit % self.bandwidth_step_mbit:
            raise ContractError(
                f"bandwidth step {self.bandwidth_step_mbit} does not divide bound {self.max_bandwidth_mbit}"
            )
        if self.operating_phase_min == 0 or self.horizon_minutes % self.operating_phase_min:
            raise ContractError(
                f"horizon {self.horizon_minutes} is not a multiple of the operating phase {self.operating_phase_min}"
            )
        if self.hysteresis_pct >= 100:
            raise ContractError("hysteresis must be below 100%")
        if not 0 <= self.nic_fail_prob < 1:
            raise ContractError(f"NIC failure probability must lie in [0, 1), got {self.nic_fail_prob}")
        if not 0 < self.p_floor <= Fraction(1, 2):
            raise ContractError(f"random-walk floor must lie in (0, 1/2], got {self.p_floor}")
        for kind in ("fast", "slow"):
            idle, load = self.nic_power_mw[kind]
            if not 0 <= idle <= load:
                raise ContractError(f"{kind} NIC power must satisfy 0 <= idle <= load")
        for key in ("Fast", "Slow", "Std", "Pro"):
            if self.prices.get(key, -1) < 0:
                raise ContractError(f"missing or negative price for {key}")

    @property
    def levels(self) -> int:
        """Largest bandwidth level; the request is ``level * step`` MBit/s."""
        return self.max_bandwidth_mbit // self.bandwidth_step_mbit

    @property
    def phases(self) -> int:
        return self.horizon_minutes // self.operating_phase_min

    def capacity(self, nic: str) -> int:
        return self.fast_capacity_mbit if nic == "Fast" else self.slow_capacity_mbit

    def power(self, nic: str) -> t.Tuple[int, int]:
        return self.nic_power_mw["fast" if nic == "Fast" else "slow"]

    def price(self, nic: str) -> int:
        return self.prices["Fast" if nic == "Fast" else "Slow"]

    def p_up(self, level: int) -> Fraction:
        p = 1 - Fraction(level, self.levels)
        return min(max(p, self.p_floor), 1 - self.p_floor)


@dataclass(frozen=True, order=True)
class EbondConfig:
    """An initial configuration in ``XY_B_A`` notation."""

    fast: int
    slow: int
    bundle: str
    algorithm: str

    def __post_init__(self) -> None:
        if self.fast not in (0, 1) or self.slow not in (0, 1, 2):
            raise ContractError(f"invalid NIC counts {self.fast}{self.slow}")
        if self.fast + self.slow < 1:
            raise ContractError("a configuration needs at least one NIC")
        if self.bundle not in BUNDLES or self.algorithm not in ALGORITHMS:
            raise ContractError(f"invalid bundle/algorithm {self.bundle}/{self.algorithm}")
        if self.bundle == "S" and self.fast + self.slow > 2:
            raise ContractError("the standard bundle holds at most two NICs")

    @property
    def code(self) -> str:
        return f"{self.fast}{self.slow}_{self.bundle}_{self.algorithm}"

    @classmethod
    def parse(cls, code: str) -> EbondConfig:
        try:
            nics, bundle, algo = code.strip().split("_")
            return cls(int(nics[0]), int(nics[1]), bundle, algo)
        except (ValueError, IndexError):
            raise ContractError(f"config {code!r} is not of the form XY_B_A") from None

    @property
    def combination(self) -> Combination:
        names = {"Env", BUNDLES[self.bundle], ALGORITHMS[self.algorithm]}
        if self.fast:
            names.add("Fast")
        names.update(("Slow1", "Slow2")[: self.slow])
        return frozenset(names)

    @classmethod
    def from_combination(cls, c: t.AbstractSet[str]) -> EbondConfig:
        bundle = next(k for k, f in BUNDLES.items() if f in c)
        algo = next(k for k, f in ALGORITHMS.items() if f in c)
        return cls(int("Fast" in c), int("Slow1" in c) + int("Slow2" in c), bundle, algo)


def all_configs() -> t.List[EbondConfig]:
    out = []
    for bundle in "SP":
        for algo in "AHB":
            for fast in (0, 1):
                for slow in (0, 1, 2):
                    try:
                        out.append(EbondConfig(fast, slow, bundle, algo))
                    except ContractError:
                        pass
    return sorted(out, key=lambda c: c.code)


VALIDITY = (
    "Env & (Std <=> !Pro) & (Aggr | High | Bal) & !(Aggr & High) & !(Aggr & Bal) & !(High & Bal)"
    " & (Fast | Slow1) & (Slow2 => Slow1) & (Std => !(Fast & Slow1 & Slow2))"
)


def signature() -> FeatureSignature:
    from ..vardsl.parser import parse_feature_expr

    return FeatureSignature.from_constraint(FEATURES, parse_feature_expr(VALIDITY))


# ---------------------------------------------------------------------------
# Expression snippets


def _sum(parts: t.Sequence[str]) -> str:
    return " + ".join(parts) if parts else "0"


def _any(parts: t.Sequence[str]) -> str:
    return "(" + " | ".join(parts) + ")" if parts else "false"


def _all(parts: t.Sequence[str]) -> str:
    return "(" + " & ".join(parts) + ")" if parts else "true"


class _Snippets:
    def __init__(self, p: EbondParams):
        self.p = p
        self.demand = f"bw * {p.bandwidth_step_mbit}"

    def awake(self, nic: str) -> str:
        s = _SHORT[nic]
        return _any([f"feat({algo}) & {pre}_{s}" for algo, pre in _ALGO_PREFIX.items()])

    def working(self, nic: str) -> str:
        return f"feat({nic}) & !fail_{_SHORT[nic]}"

    def serving(self, nic: str) -> str:
        return f"{self.working(nic)} & {self.awake(nic)}"

    def serving_capacity(self, nics: t.Sequence[str] = NICS) -> str:
        return _sum([f"({self.serving(n)} ? {self.p.capacity(n)} : 0)" for n in nics])

    def plugged_capacity(self, skip: str | None = None) -> str:
        return _sum([f"({self.working(n)} ? {self.p.capacity(n)} : 0)" for n in NICS if n != skip])

    def suffices(self, cap: str, margin: bool) -> str:
        if margin:
            return f"100 * {self.demand} <= {100 - self.p.hysteresis_pct} * ({cap})"
        return f"{self.demand} <= {cap}"

    def wanted(self, margin: bool) -> t.Dict[str, str]:
        """Per NIC, whether the algorithm wants it awake for the observed request."""
        ok = []
        for cand in _CANDIDATES:
            plugged = _all([f"{self.working(n)}" for n in cand])
            cap = sum(self.p.capacity(n) for n in cand)
            ok.append(f"{plugged} & {self.suffices(str(cap), margin)}")
        none = _all([f"!({o})" for o in ok])
        out = {}
        for nic in NICS:
            picks = []
            for i, cand in enumerate(_CANDIDATES):
                if nic in cand:
                    earlier = [f"!({ok[j]})" for j in range(i)]
                    picks.append(_all([f"({ok[i]})"] + earlier))
            picks.append(f"{none} & {self.working(nic)}")
            out[nic] = _any(picks)
        return out

    def set_capacity(self, flags: t.Mapping[str, str]) -> str:
        return _sum([f"(({flags[n]}) ? {self.p.capacity(n)} : 0)" for n in NICS])


# ---------------------------------------------------------------------------
# Model text


def _prob(p: Fraction) -> str:
    return str(p.numerator) if p.denominator == 1 else f"{p.numerator}/{p.denominator}"


def _env_module(p: EbondParams, sn: _Snippets) -> t.List[str]:
    out = [
        "module Environment owns(Env) uses(Fast, Slow1, Slow2, Std, Pro, Aggr, High, Bal) {",
        "  var phase : {buy, dem, ctl, rec, op} init buy;",
        "  var clock : [0..PHASES] init 0;",
        f"  var bw : [0..{p.levels}] init {p.levels // 2};",
        "  var sla : bool init false;",
        f"  [buy] phase = buy & feat(Std) -> (phase' = dem) cost money {p.prices['Std']};",
        f"  [buy] phase = buy & feat(Pro) -> (phase' = dem) cost money {p.prices['Pro']};",
        "  [next] phase = ctl -> (phase' = rec);",
        f"  [rec] phase = rec -> (phase' = op) & (sla' = {sn.demand} > {sn.plugged_capacity()});",
    ]
    for level in range(p.levels + 1):
        up = p.p_up(level)
        moves: t.Dict[int, Fraction] = {}
        moves[min(level + 1, p.levels)] = moves.get(min(level + 1, p.levels), Fraction(0)) + up
        moves[max(level - 1, 0)] = moves.get(max(level - 1, 0), Fraction(0)) + (1 - up)
        branches = []
        for nxt in sorted(moves):
            branches.append(f"{_prob(moves[nxt])}: (phase' = ctl) & (bw' = {nxt})")
        out.append(f"  [dem] phase = dem & clock < PHASES & bw = {level} -> " + " + ".join(branches) + ";")
    out.append("  [op] phase = op & !sla -> (phase' = dem) & (clock' = clock + 1);")
    out.append(
        "  [op] phase = op & sla -> (phase' = dem) & (clock' = clock + 1) & (sla' = false)"
        f" cost slavio 1, money {p.sla_cost_money};"
    )
    out.append("}")
    return out


def _nic_module(p: EbondParams, sn: _Snippets, nic: str) -> t.List[str]:
    s = _SHORT[nic]
    others = [n for n in NICS if n != nic]
    uses = ", ".join(others + ["Aggr", "High", "Bal"])
    idle, load = (x * p.operating_phase_min for x in p.power(nic))
    out = [
        f"module Nic{nic} owns({nic}) uses({uses}) {{",
        f"  var fail_{s} : bool init false;",
        f"  var since_{s} : [0..DELAY] init 0;",
        f"  [buy] feat({nic}) -> true cost money {p.price(nic)};",
        f"  [buy] !feat({nic}) -> true;",
    ]
    tick = f"(since_{s}' = min(since_{s} + PHASE, DELAY))"
    fail = p.nic_fail_prob
    if fail > 0:
        healthy = f"{_prob(fail)}: (fail_{s}' = true) & {tick} + {_prob(1 - fail)}: {tick}"
    else:
        healthy = tick
    # Traffic fills the slow cards first.
    order = ("Slow1", "Slow2", "Fast")
    before = order[: order.index(nic)]
    loaded = f"{sn.demand} > {sn.serving_capacity(before)}"
    awake = sn.awake(nic)
    base = f"phase = op & feat({nic})"
    out += [
        f"  [op] {base} & !fail_{s} & {awake} & {loaded} -> {healthy} cost energy {load};",
        f"  [op] {base} & !fail_{s} & {awake} & !({loaded}) -> {healthy} cost energy {idle};",
        f"  [op] {base} & !fail_{s} & !{awake} -> {healthy};",
        f"  [op] {base} & fail_{s} & {awake} -> {tick} cost energy {idle};",
        f"  [op] {base} & fail_{s} & !{awake} -> {tick};",
        f"  [op] phase = op & !feat({nic}) -> {tick};",
    ]
    ready = _all([f"since_{_SHORT[n]} >= DELAY" for n in NICS])
    h = 100 - p.hysteresis_pct
    more = f"100 * {sn.demand} > {h} * ({sn.plugged_capacity()})"
    less = f"(fail_{s} | 100 * {sn.demand} <= {h} * ({sn.plugged_capacity(skip=nic)}))"
    reset = f"(fail_{s}' = false) & (since_{s}' = 0)"
    out += [
        f"  [switch \"{nic}' & !{nic}\"] phase = ctl & {ready} & {more} -> {reset};",
        f"  [switch \"!{nic}' & {nic}\"] phase = ctl & {ready} & {less} -> {reset};",
        "}",
    ]
    return out


def _coordination_module(p: EbondParams, sn: _Snippets, algo: str) -> t.List[str]:
    pre = _ALGO_PREFIX[algo]
    names = {n: f"{pre}_{_SHORT[n]}" for n in NICS}
    out = [f"module Coord{algo} owns({algo}) uses(Fast, Slow1, Slow2) {{"]
    out += [f"  var {v} : bool init false;" for v in names.values()]
    want = sn.wanted(margin=algo != "Aggr")
    adopt = " & ".join(f"({names[n]}' = {want[n]})" for n in NICS)
    if algo != "Bal":
        out.append(f"  [rec] feat({algo}) -> {adopt};")
    else:
        out.insert(1, "  var calm : [0..COOLDOWN] init 0;")
        current = sn.set_capacity({n: f"{sn.working(n)} & {names[n]}" for n in NICS})
        target = sn.set_capacity(want)
        out += [
            f"  [rec] feat(Bal) & {target} >= {current} -> {adopt} & (calm' = 0);",
            f"  [rec] feat(Bal) & {target} < {current} & calm + PHASE >= COOLDOWN -> {adopt} & (calm' = 0);",
            f"  [rec] feat(Bal) & {target} < {current} & calm + PHASE < COOLDOWN -> (calm' = calm + PHASE);",
        ]
    out.append(f"  [rec] !feat({algo}) -> true;")
    out.append("}")
    return out


def _controller(p: EbondParams, sig: FeatureSignature, initial: t.Sequence[Combination] | None) -> t.List[str]:
    def fmt(c: t.AbstractSet[str]) -> str:
        return "{" + ", ".join(f for f in FEATURES if f in c) + "}"

    out = ["controller {"]
    if initial is None:
        out.append("  init all;")
    else:
        out.append("  init " + ", ".join(fmt(c) for c in initial) + ";")
    for c in sig.combinations:
        for nic in NICS:
            c2 = c ^ {nic}
            if c2 not in sig.valid:
                continue
            if nic in c2:
                out.append(f"  event {fmt(c)} -> cost money {p.price(nic)} : {fmt(c2)};")
            else:
                out.append(f"  event {fmt(c)} -> {fmt(c2)};")
    out.append("}")
    return out


def build_ebond_text(p: EbondParams, configs: t.Sequence[EbondConfig] | None = None) -> str:
    """The eBond+ model as ``.fdsl`` text; ``configs=None`` starts from every valid configuration."""
    sig = signature()
    sn = _Snippets(p)
    lines = [
        "// eBond+ bonded network device",
        f"// bandwidth bound {p.max_bandwidth_mbit} MBit/s in steps of {p.bandwidth_step_mbit},"
        f" NIC failure probability {p.nic_fail_prob} per phase",
        "",
        f"const HORIZON = {p.horizon_minutes};",
        f"const PHASES = {p.phases};",
        f"const PHASE = {p.operating_phase_min};",
        f"const DELAY = {p.reconfig_delay_min};",
        f"const COOLDOWN = {p.cooldown_min};",
        "",
        "signature {",
        "  features " + ", ".join(FEATURES) + ";",
        f"  valid where {VALIDITY};",
        "}",
        "",
    ]
    for nic in NICS:
        lines += _nic_module(p, sn, nic) + [""]
    for algo in ("Aggr", "High", "Bal"):
        lines += _coordination_module(p, sn, algo) + [""]
    lines += _env_module(p, sn) + [""]
    initial = None if configs is None else [c.combination for c in configs]
    lines += _controller(p, sig, initial) + [""]
    lines += [
        "label T = clock = PHASES;",
        "label Sla = sla;",
        "",
        "query phi_p : Pmax [ !Sla U T ];",
        'query phi_e : Emin{"energy"} [ F T ];',
        'query phi_m : Emin{"money"} [ F T ];',
        'query phi_s : Emin{"slavio"} [ F T ];',
    ]
    return "\n".join(lines) + "\n"


def build_ebond(p: EbondParams, configs: t.Sequence[EbondConfig] | None = None) -> System:
    return load_system(build_ebond_text(p, configs))


def ebond_queries(system: System | None = None) -> t.List[t.Any]:
    """The four query specifications, in the order phi_p, phi_e, phi_m, phi_s."""
    if system is None:
        system = build_ebond(EbondParams(max_bandwidth_mbit=200, horizon_minutes=10))
    return [system.query_spec(name) for name in QUERY_NAMES]


def initial_configs(system: System, mdp: t.Any) -> t.List[t.Tuple[int, EbondConfig]]:
    """Initial states of a built model with their configuration, sorted by code."""
    out = []
    for i in mdp.initial:
        _, C = mdp.states[i]
        out.append((i, EbondConfig.from_combination(C)))
    return sorted(out, key=lambda x: x[1].code)
