"""Command-line front end.

Subcommands::

    featcheck check MODEL [--query NAME|ALL] [--synth] [--out DIR]
    featcheck export MODEL --format fdsl|dot|prism|flat [--out DIR]
    featcheck ebond [--bandwidth LIST] [--configs LIST] [--mode MODE] [--out DIR]

Exit codes: 0 success, 1 usage error, 2 model error, 3 engine
non-convergence. Diagnostics go to stderr, results to files.
"""

from __future__ import annotations

import argparse
import csv
import io
import logging
import sys
import typing as t
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

from .analysis import ConvergenceError, Options, check, format_value
from .core import ContractError
from .semantics import to_dot, to_flat, to_states_listing
from .vardsl.ast import ModelError
from .vardsl.elaborate import System, load_system, parse_override

log = logging.getLogger("featcheck")

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_MODEL = 2
EXIT_ENGINE = 3

EXPORT_FORMATS = {"fdsl": ".fdsl", "dot": ".dot", "prism": ".prism", "flat": ".flat"}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on bad usage, which is the model-error code here.
    def error(self, message: str) -> t.NoReturn:
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


@dataclass
class CliConfig:
    subcommand: str
    model: Path | None = None
    consts: t.Dict[str, t.Any] = field(default_factory=dict)
    query: str = "ALL"
    out: Path | None = None
    epsilon: float | None = None
    max_iters: int | None = None
    workers: int = 1

    def options(self) -> Options:
        return Options.with_epsilon(self.epsilon, self.max_iters)


def _positive_float(text: str) -> float:
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if not v > 0:
        raise argparse.ArgumentTypeError("must be positive")
    return v


def _positive_int(text: str) -> int:
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if v < 1:
        raise argparse.ArgumentTypeError("must be at least 1")
    return v


def _int_list(text: str) -> t.List[int]:
    try:
        out = [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a comma-separated list of integers, got {text!r}") from None
    if not out:
        raise argparse.ArgumentTypeError("empty list")
    return out


def _str_list(text: str) -> t.List[str]:
    out = [x.strip() for x in text.split(",") if x.strip()]
    if not out:
        raise argparse.ArgumentTypeError("empty list")
    return out


def _fraction(text: str) -> Fraction:
    try:
        return Fraction(text)
    except (ValueError, ZeroDivisionError):
        raise argparse.ArgumentTypeError(f"not a rational number: {text!r}") from None


def _power_pair(text: str) -> t.Tuple[int, int]:
    parts = _int_list(text)
    if len(parts) != 2:
        raise argparse.ArgumentTypeError("expected IDLE,LOAD in milliwatts")
    return parts[0], parts[1]


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="featcheck", description="Probabilistic model checking of dynamic product lines.")
    p.add_argument("-v", "--verbose", action="count", default=0, help="more log output on stderr")
    sub = p.add_subparsers(dest="subcommand", required=True, parser_class=_Parser)

    def engine(sp: argparse.ArgumentParser) -> None:
        sp.add_argument("--epsilon", type=_positive_float, help="value-iteration residual bound")
        sp.add_argument("--max-iters", type=_positive_int, help="value-iteration iteration cap")

    def model(sp: argparse.ArgumentParser) -> None:
        sp.add_argument("model", type=Path, help=".fdsl model file")
        sp.add_argument("--const", action="append", default=[], metavar="NAME=VAL", help="override a constant")

    c = sub.add_parser("check", help="answer the queries of a model")
    model(c)
    c.add_argument("--query", default="ALL", metavar="NAME|ALL")
    c.add_argument("--synth", action="store_true", help="also write the optimal scheduler")
    c.add_argument("--out", type=Path, default=Path("."), metavar="DIR")
    engine(c)

    e = sub.add_parser("export", help="translate a model")
    model(e)
    e.add_argument("--format", required=True, choices=sorted(EXPORT_FORMATS))
    e.add_argument("--out", type=Path, metavar="DIR", help="output directory (default: stdout)")

    b = sub.add_parser("ebond", help="sweep the eBond+ case study over bandwidth bounds")
    b.add_argument("--bandwidth", type=_int_list, default=[200, 1000, 2000, 4000], metavar="LIST")
    b.add_argument("--configs", type=_str_list, metavar="LIST", help="config codes such as 01_S_A (default: all)")
    b.add_argument("--mode", choices=("family", "one-by-one", "both"), default="family")
    b.add_argument("--horizon", type=_positive_int, default=60, metavar="MIN")
    b.add_argument("--step", type=_positive_int, metavar="MBIT", help="bandwidth step per phase")
    b.add_argument("--fail-prob", type=_fraction, metavar="P", help="NIC failure probability per phase")
    b.add_argument("--fast-power", type=_power_pair, metavar="IDLE,LOAD", help="fast NIC power in mW")
    b.add_argument("--workers", type=_positive_int, metavar="N", help="parallel model builds")
    b.add_argument("--record-timings", action="store_true", help="fill build_ms and solve_ms")
    b.add_argument("--no-figures", action="store_true", help="skip the PNG figures")
    b.add_argument("--out", type=Path, default=Path("ebond_out"), metavar="DIR")
    engine(b)
    return p


def _overrides(items: t.Sequence[str]) -> t.Dict[str, t.Any]:
    out = {}
    for item in items:
        try:
            name, value = parse_override(item)
        except ModelError as exc:
            raise UsageError(str(exc)) from None
        out[name] = value
    return out


def _load(cfg: CliConfig) -> System:
    assert cfg.model is not None
    if not cfg.model.is_file():
        raise UsageError(f"model file {cfg.model} does not exist")
    text = cfg.model.read_text(encoding="utf-8")
    return load_system(text, cfg.consts)


def _write_all(out: Path, files: t.Sequence[t.Tuple[str, str]]) -> None:
    out.mkdir(parents=True, exist_ok=True)
    for name, text in files:
        with open(out / name, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        log.info("wrote %s", out / name)


def cmd_check(cfg: CliConfig, synth: bool = False) -> int:
    system = _load(cfg)
    names = [q.name for q in system.queries] if cfg.query == "ALL" else [cfg.query]
    if not names:
        raise UsageError("the model declares no queries")
    known = {q.name for q in system.queries}
    for n in names:
        if n not in known:
            raise UsageError(f"no query named {n!r}; the model declares {', '.join(sorted(known)) or 'none'}")
    mdp = system.build()
    log.info("%d states, %d moves", mdp.num_states, mdp.num_moves)
    options = cfg.options()
    results = []
    for n in names:
        q = system.query(n, mdp)
        r = check(mdp, q, options)
        log.info("query %s: %d iterations", n, r.iterations)
        results.append((n, q, r))

    initial = sorted(mdp.initial)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    header = ["state", "description"]
    for n, q, _ in results:
        header.append(n)
        if q.threshold is not None:
            header.append(f"{n}_holds")
    w.writerow(header)
    for s in initial:
        row = [str(s), mdp.describe(s)]
        for _, q, r in results:
            row.append(format_value(r.values[s]))
            if q.threshold is not None:
                row.append("true" if r.holds(s) else "false")
        w.writerow(row)
    files = [("values.csv", buf.getvalue())]

    if synth:
        sbuf = io.StringIO()
        sw = csv.writer(sbuf, lineterminator="\n")
        sw.writerow(["query", "state", "move", "rule"])
        for n, _, r in results:
            assert r.scheduler is not None
            for s, k in sorted(r.scheduler.as_dict().items()):
                sw.writerow([n, s, k, mdp.moves[s][k].rule])
            files.append((f"scheduler_{n}.dot", to_dot(mdp, r.scheduler.as_dict(), list(r.values))))
        files.insert(1, ("scheduler.csv", sbuf.getvalue()))
    assert cfg.out is not None
    _write_all(cfg.out, files)
    return EXIT_OK


def cmd_export(cfg: CliConfig, fmt: str) -> int:
    from .vardsl.parser import parse_syntax
    from .vardsl.printer import format_model

    system = _load(cfg)
    assert cfg.model is not None
    stem = cfg.model.stem
    if fmt == "fdsl":
        files = [(stem + ".fdsl", format_model(parse_syntax(cfg.model.read_text(encoding="utf-8"))))]
    elif fmt == "prism":
        from .vardsl.prism import to_prism

        files = [(stem + ".prism", to_prism(system))]
    else:
        mdp = system.build()
        if fmt == "dot":
            files = [(stem + ".dot", to_dot(mdp))]
        else:
            files = [(stem + ".flat", to_flat(mdp)), (stem + ".states", to_states_listing(mdp))]
    if cfg.out is None:
        sys.stdout.write(files[0][1])
    else:
        _write_all(cfg.out, files)
    return EXIT_OK


def cmd_ebond(args: argparse.Namespace, cfg: CliConfig) -> int:
    from dataclasses import replace

    from .casestudy.ebond import EbondConfig, EbondParams
    from .casestudy.report import render_report
    from .casestudy.sweep import sweep, write_sweep

    try:
        params = EbondParams(horizon_minutes=args.horizon)
        if args.step is not None:
            params = replace(params, bandwidth_step_mbit=args.step)
        if args.fail_prob is not None:
            params = replace(params, nic_fail_prob=args.fail_prob)
        if args.fast_power is not None:
            power = dict(params.nic_power_mw)
            power["fast"] = args.fast_power
            params = replace(params, nic_power_mw=power)
        for b in args.bandwidth:
            replace(params, max_bandwidth_mbit=b)
        configs = [EbondConfig.parse(c) for c in args.configs] if args.configs else None
    except ContractError as exc:
        raise UsageError(str(exc)) from None
    result = sweep(
        params,
        args.bandwidth,
        configs,
        mode=args.mode,
        workers=cfg.workers,
        epsilon=cfg.epsilon,
        max_iters=cfg.max_iters,
        record_timings=args.record_timings,
    )
    assert cfg.out is not None
    write_sweep(result, cfg.out, args.mode)
    if not args.no_figures:
        render_report(result.rows, cfg.out, params.phases)
    log.info("wrote results to %s", cfg.out)
    return EXIT_OK


def _unwrap(exc: BaseException) -> BaseException:
    from .casestudy.sweep import SweepError

    while isinstance(exc, SweepError):
        exc = exc.cause
    return exc


def main(argv: t.Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.WARNING - 10 * min(args.verbose, 2),
        format="%(levelname)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        cfg = CliConfig(args.subcommand)
        cfg.out = args.out
        if args.subcommand in ("check", "export"):
            cfg.model = args.model
            cfg.consts = _overrides(args.const)
        if args.subcommand in ("check", "ebond"):
            cfg.epsilon = args.epsilon
            cfg.max_iters = args.max_iters
        if args.subcommand == "check":
            cfg.query = args.query
            return cmd_check(cfg, synth=args.synth)
        if args.subcommand == "export":
            return cmd_export(cfg, args.format)
        from .casestudy.sweep import default_workers

        try:
            cfg.workers = args.workers if args.workers is not None else default_workers()
        except ValueError as exc:
            raise UsageError(str(exc)) from None
        return cmd_ebond(args, cfg)
    except UsageError as exc:
        print(f"featcheck: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except Exception as exc:  # noqa: BLE001 - mapped to exit codes
        cause = _unwrap(exc)
        prefix = f"{exc.context}: " if cause is not exc else ""  # type: ignore[attr-defined]
        if isinstance(cause, ConvergenceError):
            print(f"featcheck: no convergence: {prefix}{cause}", file=sys.stderr)
            return EXIT_ENGINE
        if isinstance(cause, ContractError):
            print(f"featcheck: model error: {prefix}{cause}", file=sys.stderr)
            return EXIT_MODEL
        raise


def run() -> None:
    sys.exit(main())


if __name__ == "__main__":
    run()
