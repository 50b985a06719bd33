"""Bandwidth sweeps over the eBond+ model, family-based or one by one."""

from __future__ import annotations

import csv
import io
import logging
import os
import time
import typing as t
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path

from ..analysis import Options, check, format_value
from .ebond import QUERY_NAMES, EbondConfig, EbondParams, all_configs, build_ebond_text, initial_configs

log = logging.getLogger(__name__)

HEADER = ("bandwidth_mbit", "config", "query", "value", "states", "moves", "build_ms", "solve_ms")
STATS_HEADER = (
    "bandwidth_mbit",
    "family_states",
    "family_moves",
    "one_by_one_states",
    "one_by_one_moves",
    "family_build_ms",
    "family_solve_ms",
    "one_by_one_build_ms",
    "one_by_one_solve_ms",
)
MODES = ("family", "one-by-one", "both")


class SweepError(RuntimeError):
    """An engine or model failure, tagged with the sweep point it came from."""

    def __init__(self, context: str, cause: BaseException):
        super().__init__(f"{context}: {cause}")
        self.context = context
        self.cause = cause


@dataclass(frozen=True)
class Row:
    bandwidth_mbit: int
    config: str
    query: str
    value: float
    states: int
    moves: int
    build_ms: int = 0
    solve_ms: int = 0

    @property
    def key(self) -> t.Tuple[int, str, str]:
        return (self.bandwidth_mbit, self.config, self.query)

    def cells(self) -> t.List[str]:
        return [
            str(self.bandwidth_mbit),
            self.config,
            self.query,
            format_value(self.value),
            str(self.states),
            str(self.moves),
            str(self.build_ms),
            str(self.solve_ms),
        ]


@dataclass(frozen=True)
class Job:
    params: EbondParams
    configs: t.Tuple[str, ...]
    epsilon: float | None = None
    max_iters: int | None = None
    record_timings: bool = False


@dataclass(frozen=True)
class JobResult:
    rows: t.Tuple[Row, ...]
    model_text: str
    states: int
    moves: int
    build_ms: int
    solve_ms: int


def _ms(seconds: float) -> int:
    return int(round(seconds * 1000))


def run_job(job: Job) -> JobResult:
    """Build one model (whose initial set is ``job.configs``) and answer all four queries."""
    from ..vardsl.elaborate import load_system

    b = job.params.max_bandwidth_mbit
    context = f"bandwidth {b}, configs {','.join(job.configs)}"
    try:
        configs = [EbondConfig.parse(c) for c in job.configs]
        text = build_ebond_text(job.params, configs)
        t0 = time.perf_counter()
        system = load_system(text)
        mdp = system.build()
        build = time.perf_counter() - t0
        options = Options.with_epsilon(job.epsilon, job.max_iters)
        starts = initial_configs(system, mdp)
        rows = []
        solve_total = 0.0
        for name in QUERY_NAMES:
            t1 = time.perf_counter()
            result = check(mdp, system.query(name, mdp), options)
            solve = time.perf_counter() - t1
            solve_total += solve
            for idx, cfg in starts:
                rows.append(
                    Row(
                        b,
                        cfg.code,
                        name,
                        float(result.values[idx]),
                        mdp.num_states,
                        mdp.num_moves,
                        _ms(build) if job.record_timings else 0,
                        _ms(solve) if job.record_timings else 0,
                    )
                )
    except Exception as exc:  # noqa: BLE001 - re-raised with context
        raise SweepError(context, exc) from exc
    timed = job.record_timings
    return JobResult(
        tuple(rows),
        text,
        mdp.num_states,
        mdp.num_moves,
        _ms(build) if timed else 0,
        _ms(solve_total) if timed else 0,
    )


def default_workers() -> int:
    env = os.environ.get("FEATCHECK_WORKERS")
    if env:
        try:
            n = int(env)
        except ValueError:
            raise ValueError(f"FEATCHECK_WORKERS must be an integer, got {env!r}") from None
        if n < 1:
            raise ValueError("FEATCHECK_WORKERS must be at least 1")
        return n
    return 1


def run_jobs(jobs: t.Sequence[Job], workers: int = 1) -> t.List[JobResult]:
    if workers <= 1 or len(jobs) <= 1:
        return [run_job(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=min(workers, len(jobs))) as pool:
        return list(pool.map(run_job, jobs))


@dataclass
class SweepResult:
    family: t.List[Row]
    one_by_one: t.List[Row]
    stats: t.List[t.Tuple[int, ...]]
    models: t.Dict[str, str]

    @property
    def rows(self) -> t.List[Row]:
        return self.family if self.family else self.one_by_one


def sweep(
    base: EbondParams,
    bandwidths: t.Sequence[int],
    configs: t.Sequence[EbondConfig] | None = None,
    mode: str = "family",
    workers: int = 1,
    epsilon: float | None = None,
    max_iters: int | None = None,
    record_timings: bool = False,
) -> SweepResult:
    if mode not in MODES:
        raise ValueError(f"unknown mode {mode!r}; expected one of {', '.join(MODES)}")
    if not bandwidths:
        raise ValueError("empty bandwidth list")
    chosen = sorted(configs if configs else all_configs(), key=lambda c: c.code)
    if not chosen:
        raise ValueError("empty configuration list")
    codes = tuple(dict.fromkeys(c.code for c in chosen))
    points = [replace(base, max_bandwidth_mbit=b) for b in sorted(set(bandwidths))]

    jobs: t.List[Job] = []
    kinds: t.List[t.Tuple[str, int]] = []
    for p in points:
        if mode in ("family", "both"):
            jobs.append(Job(p, codes, epsilon, max_iters, record_timings))
            kinds.append(("family", p.max_bandwidth_mbit))
        if mode in ("one-by-one", "both"):
            for code in codes:
                jobs.append(Job(p, (code,), epsilon, max_iters, record_timings))
                kinds.append(("one", p.max_bandwidth_mbit))
    log.info("running %d model builds on %d worker(s)", len(jobs), workers)
    results = run_jobs(jobs, workers)

    family: t.List[Row] = []
    single: t.List[Row] = []
    models: t.Dict[str, str] = {}
    per_b: t.Dict[int, t.Dict[str, t.List[int]]] = {}
    for (kind, b), res in zip(kinds, results):
        acc = per_b.setdefault(b, {"family": [0, 0, 0, 0], "one": [0, 0, 0, 0]})[kind]
        acc[0] += res.states
        acc[1] += res.moves
        acc[2] += res.build_ms
        acc[3] += res.solve_ms
        if kind == "family":
            family.extend(res.rows)
            models[f"model_b{b}_family.fdsl"] = res.model_text
        else:
            single.extend(res.rows)
            if mode == "one-by-one":
                models.setdefault(f"model_b{b}.fdsl", build_ebond_text(replace(base, max_bandwidth_mbit=b), chosen))
    family.sort(key=lambda r: r.key)
    single.sort(key=lambda r: r.key)
    stats = []
    if mode == "both":
        for b in sorted(per_b):
            f, o = per_b[b]["family"], per_b[b]["one"]
            stats.append((b, f[0], f[1], o[0], o[1], f[2], f[3], o[2], o[3]))
    return SweepResult(family, single, stats, models)


def rows_csv(rows: t.Iterable[Row]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(HEADER)
    for r in rows:
        w.writerow(r.cells())
    return buf.getvalue()


def stats_csv(stats: t.Iterable[t.Sequence[int]]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(STATS_HEADER)
    for s in stats:
        w.writerow([str(x) for x in s])
    return buf.getvalue()


def read_rows(path: str | Path) -> t.List[Row]:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != HEADER:
            raise ValueError(f"{path}: unexpected header {reader.fieldnames}")
        return [
            Row(
                int(r["bandwidth_mbit"]),
                r["config"],
                r["query"],
                float(r["value"]),
                int(r["states"]),
                int(r["moves"]),
                int(r["build_ms"]),
                int(r["solve_ms"]),
            )
            for r in reader
        ]


def write_sweep(result: SweepResult, out: str | Path, mode: str) -> t.List[Path]:
    """Write CSVs and model files; returns the paths written, in order."""
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    primary = result.family if mode in ("family", "both") else result.one_by_one
    files = [("results.csv", rows_csv(primary))]
    if mode == "both":
        files.append(("results_one_by_one.csv", rows_csv(result.one_by_one)))
        files.append(("stats.csv", stats_csv(result.stats)))
    for name, text in sorted(result.models.items()):
        files.append((name, text))
    for name, text in files:
        path = out / name
        with open(path, "w", newline="") as fh:
            fh.write(text)
        written.append(path)
    return written
