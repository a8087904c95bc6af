"""Command-line interface and deterministic text emitters.

Commands:

    gen       write a corpus file from a generator profile or shipped fixture
    ingest    parse and validate a corpus file, print the record count
    count     count one query against a corpus
    plan      synthesize a partition strategy, print it as a numbered script
    run       plan and execute a strategy, print the reconciliation report
    validate  run and additionally compare both totals to the direct count

Exit statuses: 0 success (verdict Exact), 1 verdict failure, 2 usage error,
3 data error, 4 infeasible plan or cap exceeded.

The strategy script and the key=value report are byte-deterministic so
they can be diffed and parsed; report integers never carry digit grouping.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass, replace

from .corpus import (
    DEFAULT_ADDRESS_POOLS,
    FIXTURE_NAMES,
    CorpusError,
    CorpusProfile,
    build_fixture,
    generate,
    load_corpus,
    serialize,
)
from .engine import CapExceededError, CappedEngine, EngineConfig, EngineError
from .planner import (
    WITH_PIVOT,
    WITHOUT_PIVOT,
    GroupSpecError,
    PlanInfeasibleError,
    Split,
    Strategy,
    parse_group_spec,
    plan_auto,
    plan_censored,
    plan_prescribed,
)
from .query import FieldKind, Pattern, Query, QueryError, parse, print_normalized
from .reconcile import RunReport, Verdict, run_strategy, validate_direct

EXIT_OK = 0
EXIT_VERDICT = 1
EXIT_USAGE = 2
EXIT_DATA = 3
EXIT_INFEASIBLE = 4

OVERLAP_HEADING = "Statement to find overlapping"
EXCLUSION_HEADING = "New Search Strategy (Excluding overlapping)"

UNAVAILABLE = "unavailable"


# ---------------------------------------------------------------------------
# Emitters
# ---------------------------------------------------------------------------


def emit_strategy_script(strategy: Strategy) -> str:
    """Render a strategy as the numbered session script."""
    n = len(strategy.statements)
    lines = [f"{i}. {print_normalized(stmt)}" for i, stmt in enumerate(strategy.statements, 1)]
    lines.append(OVERLAP_HEADING)
    lines.append(f"{n + 1}. {print_normalized(strategy.overlap_stmt)}")
    lines.append(EXCLUSION_HEADING)
    for i, stmt in enumerate(strategy.exclusion_stmts, 1):
        lines.append(f"{n + 1 + i}. {print_normalized(stmt)}")
    return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class ParsedScript:
    statements: tuple[Query, ...]
    overlap: Query | None
    exclusions: tuple[Query, ...]


def parse_strategy_script(text: str) -> ParsedScript:
    """Re-read an emitted strategy script into its query trees."""
    statements: list[Query] = []
    exclusions: list[Query] = []
    overlap: Query | None = None
    section = "statements"
    for raw in text.splitlines():
        line = raw.strip()
        if not line:
            continue
        if line == OVERLAP_HEADING:
            section = "overlap"
            continue
        if line == EXCLUSION_HEADING:
            section = "exclusions"
            continue
        number, dot, rest = line.partition(". ")
        if not dot or not number.isdigit():
            raise ValueError(f"script line is not numbered: {line!r}")
        node = parse(rest)
        if section == "statements":
            statements.append(node)
        elif section == "overlap":
            overlap = node
        else:
            exclusions.append(node)
    return ParsedScript(tuple(statements), overlap, tuple(exclusions))


def _fmt(value: int | None) -> str:
    return UNAVAILABLE if value is None else str(value)


def emit_report(report: RunReport) -> str:
    """Render the machine-readable key=value run report, fixed key order."""
    lines: list[str] = []
    for s in report.per_statement:
        lines.append(f"statement.{s.number}.count={_fmt(s.count)}")
        lines.append(f"statement.{s.number}.sum={_fmt(s.running_sum)}")
    lines.append(f"overlap.count={_fmt(report.overlap_count)}")
    for e in report.per_exclusion:
        lines.append(f"exclusion.{e.number}.count={e.count}")
        lines.append(f"exclusion.{e.number}.sum={e.running_sum}")
    lines.append(f"method_a.total={_fmt(report.method_a_total)}")
    lines.append(f"method_b.total={_fmt(report.method_b_total)}")
    lines.append(f"union.cardinality={_fmt(report.union_cardinality)}")
    lines.append(f"direct.count={_fmt(report.direct_count)}")
    if report.direct_source is not None:
        lines.append(f"direct.source={report.direct_source}")
    lines.append(f"max.multiplicity={_fmt(report.max_multiplicity)}")
    lines.append(f"verdict={report.verdict.value}")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# Argument parsing
# ---------------------------------------------------------------------------


def _positive_int(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"{text!r} is not an integer") from None
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {value}")
    return value


def _add_engine_args(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--corpus", required=True, help="corpus file to load")
    sub.add_argument("--cap", type=_positive_int, default=100_000, help="result-set cap")
    sub.add_argument("--mode", choices=("visible", "censored"), default="visible")


def _add_strategy_args(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--base", required=True, help="base query to partition")
    sub.add_argument("--field", choices=("SO", "CU", "AD"), default="SO")
    sub.add_argument("--groups", help="prescribed groups, e.g. 'AB,CDEFG,...,J/AD=CA'")
    sub.add_argument("--auto", action="store_true", help="greedy alphabetical packing")
    sub.add_argument("--split-field", choices=("SO", "CU", "AD", "PY"))
    sub.add_argument("--split-pivot", help="split the whole base on FIELD=PIVOT")
    sub.add_argument("--out", help="write output to this file instead of stdout")


def build_arg_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="capsplit",
        description="Partitioned Boolean retrieval under a result-set cap.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("gen", help="write a corpus file")
    gen.add_argument("--out", help="output path (default: stdout)")
    gen.add_argument("--profile", help="JSON generator profile")
    gen.add_argument("--fixture", choices=FIXTURE_NAMES, help="write a shipped fixture instead")
    gen.add_argument("--seed", type=int)
    gen.add_argument("--n", type=int)
    gen.add_argument("--multi-title-prob", type=float, dest="multi_title_prob")
    gen.add_argument("--countries", help="comma list of NAME[:WEIGHT]")

    ingest_p = sub.add_parser("ingest", help="validate a corpus file")
    ingest_p.add_argument("--corpus", required=True)

    count_p = sub.add_parser("count", help="count a query")
    _add_engine_args(count_p)
    count_p.add_argument("query", help="query string")

    for name, help_text in (
        ("plan", "synthesize a strategy and print the script"),
        ("run", "plan, execute and print the reconciliation report"),
        ("validate", "run and compare totals against the direct count"),
    ):
        cmd = sub.add_parser(name, help=help_text)
        _add_engine_args(cmd)
        _add_strategy_args(cmd)
    return parser


# ---------------------------------------------------------------------------
# Command implementations
# ---------------------------------------------------------------------------


def _write_out(text: str, out: str | None) -> None:
    if out:
        with open(out, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _parse_countries(text: str) -> dict[str, float]:
    weights: dict[str, float] = {}
    for part in text.split(","):
        name, _, weight = part.partition(":")
        name = name.strip().upper()
        if not name:
            raise CorpusError(f"bad --countries entry in {text!r}")
        try:
            weights[name] = float(weight) if weight else 1.0
        except ValueError:
            raise CorpusError(f"bad country weight {weight!r}") from None
    return weights


def _cmd_gen(args: argparse.Namespace) -> int:
    if args.fixture:
        corpus = build_fixture(args.fixture)
    else:
        if args.profile:
            with open(args.profile, "r", encoding="utf-8") as fh:
                try:
                    profile = CorpusProfile.from_dict(json.load(fh))
                except (TypeError, ValueError) as exc:
                    raise CorpusError(f"invalid profile {args.profile}: {exc}") from None
        else:
            profile = CorpusProfile(seed=0, n_records=1000)
        overrides = {}
        if args.seed is not None:
            overrides["seed"] = args.seed
        if args.n is not None:
            overrides["n_records"] = args.n
        if args.multi_title_prob is not None:
            overrides["multi_title_prob"] = args.multi_title_prob
        if args.countries:
            weights = _parse_countries(args.countries)
            overrides["country_weights"] = weights
            overrides["address_pools"] = {
                c: DEFAULT_ADDRESS_POOLS[c] for c in weights if c in DEFAULT_ADDRESS_POOLS
            }
        if overrides:
            profile = replace(profile, **overrides)
        corpus = generate(profile)
    _write_out(serialize(corpus), args.out)
    return EXIT_OK


def _cmd_ingest(args: argparse.Namespace) -> int:
    corpus = load_corpus(args.corpus)
    print(f"{len(corpus)} records")
    return EXIT_OK


def _load_engine(args: argparse.Namespace) -> CappedEngine:
    corpus = load_corpus(args.corpus)
    return CappedEngine(corpus, EngineConfig(cap=args.cap, count_mode=args.mode))


def _cmd_count(args: argparse.Namespace) -> int:
    engine = _load_engine(args)
    result = engine.count(parse(args.query))
    print(result.value if result.is_exact else f">={args.cap}")
    return EXIT_OK


def _make_strategy(args: argparse.Namespace, engine: CappedEngine) -> Strategy:
    chosen = [bool(args.groups), bool(args.auto), bool(args.split_pivot)]
    if sum(chosen) != 1:
        raise GroupSpecError("choose exactly one of --groups, --auto or --split-pivot")
    base = parse(args.base)
    field = FieldKind(args.field)
    if args.groups:
        return plan_prescribed(engine, base, field, parse_group_spec(args.groups))
    if args.split_pivot:
        if not args.split_field:
            raise GroupSpecError("--split-pivot needs --split-field")
        pivot_field = FieldKind(args.split_field)
        value = args.split_pivot.strip()
        truncated = value.endswith("*")
        pivot = Pattern(value[:-1] if truncated else value, truncated)
        groups = (
            Split("", pivot_field, pivot, WITH_PIVOT),
            Split("", pivot_field, pivot, WITHOUT_PIVOT),
        )
        return plan_prescribed(engine, base, field, groups)
    if engine.config.count_mode == "censored":
        return plan_censored(engine, base, field)
    return plan_auto(engine, base, field)


def _print_warnings(strategy: Strategy) -> None:
    for warning in strategy.warnings:
        print(f"warning: {warning}", file=sys.stderr)


def _cmd_plan(args: argparse.Namespace) -> int:
    strategy = _make_strategy(args, _load_engine(args))
    _print_warnings(strategy)
    _write_out(emit_strategy_script(strategy), args.out)
    return EXIT_OK


def _cmd_run(args: argparse.Namespace) -> int:
    engine = _load_engine(args)
    strategy = _make_strategy(args, engine)
    _print_warnings(strategy)
    report = run_strategy(strategy, engine)
    _write_out(emit_report(report), args.out)
    return EXIT_OK if report.verdict is Verdict.EXACT else EXIT_VERDICT


def _cmd_validate(args: argparse.Namespace) -> int:
    engine = _load_engine(args)
    strategy = _make_strategy(args, engine)
    _print_warnings(strategy)
    report = validate_direct(strategy, engine)
    _write_out(emit_report(report), args.out)
    return EXIT_OK if report.verdict is Verdict.EXACT else EXIT_VERDICT


_COMMANDS = {
    "gen": _cmd_gen,
    "ingest": _cmd_ingest,
    "count": _cmd_count,
    "plan": _cmd_plan,
    "run": _cmd_run,
    "validate": _cmd_validate,
}


def main(argv: list[str] | None = None) -> int:
    parser = build_arg_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse exits 2 on usage errors, 0 on --help
        return int(exc.code or 0)
    try:
        return _COMMANDS[args.command](args)
    except (CapExceededError, PlanInfeasibleError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except (QueryError, GroupSpecError, EngineError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except CorpusError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
