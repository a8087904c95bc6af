"""Partition planning for capped retrieval.

A strategy splits a base query into numbered statements whose individual
result sets all stay strictly below the cap, by bucketing a token field
(normally the source title) on its first symbol:

    base AND (SO=A* OR SO=B*)
    base AND (SO=C* OR SO=D* OR ...)
    ...

Three planners build the statement list:

- ``plan_prescribed`` realizes caller-supplied groups verbatim, including
  pivot splits (``base AND SO=J* AND AD=CA`` / ``base AND SO=J* NOT AD=CA``)
  for buckets known to be oversized.
- ``plan_auto`` packs symbols greedily in canonical order (A..Z then 0..9),
  extending a group while its realized count stays below the cap. A single
  symbol whose bucket alone reaches the cap is replaced by packed
  longer-prefix buckets via the engine's next-symbol introspection, with
  exact-title residues covered by untruncated terms; deepening recurses
  until everything fits or a single full-title class reaches the cap,
  which is irreducible.
- ``plan_censored`` runs the same greedy scheme against an engine that
  only ever answers "at least the cap" for oversized probes.

Every strategy also carries the overlap statement (the OR of all pairwise
ANDs of the numbered statements) and one exclusion statement per numbered
statement, which a runner registers right after the partition statements.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Union

from .corpus import SYMBOLS, symbol_sort_key
from .engine import CENSORED, VISIBLE, CappedEngine, CountResult
from .query import And, Diff, FieldKind, Pattern, Query, SetRef, Term, or_chain, print_normalized


class GroupSpecError(ValueError):
    """Invalid partition-group specification or planner parameters."""


class PlanInfeasibleError(Exception):
    """No valid sub-cap partition exists for the given corpus and cap."""


WITH_PIVOT = "with"
WITHOUT_PIVOT = "without"


@dataclass(frozen=True)
class Letters:
    """A bucket of first symbols, realized as ``SO=x1* OR SO=x2* OR ...``."""

    symbols: tuple[str, ...]

    def __post_init__(self) -> None:
        if not self.symbols:
            raise GroupSpecError("empty letter group")
        for sym in self.symbols:
            if sym not in SYMBOLS:
                raise GroupSpecError(f"letter group symbol {sym!r} not in A..Z, 0..9")
        ordered = tuple(sorted(set(self.symbols), key=symbol_sort_key))
        object.__setattr__(self, "symbols", ordered)


@dataclass(frozen=True)
class Prefixes:
    """A bucket of explicit patterns (deepened prefixes or exact residues)."""

    patterns: tuple[Pattern, ...]

    def __post_init__(self) -> None:
        if not self.patterns:
            raise GroupSpecError("empty prefix group")


@dataclass(frozen=True)
class Split:
    """One side of a pivot split of a prefix bucket on a second field.

    An empty prefix splits the whole base query (the two-statement
    include/exclude pattern used for mid-sized domains).
    """

    prefix: str
    pivot_field: FieldKind
    pivot: Pattern
    side: str

    def __post_init__(self) -> None:
        if self.side not in (WITH_PIVOT, WITHOUT_PIVOT):
            raise GroupSpecError(f"split side must be 'with' or 'without', got {self.side!r}")


Group = Union[Letters, Prefixes, Split]


@dataclass(frozen=True)
class Strategy:
    """A realized partition: ordered statements plus overlap and exclusions."""

    base: Query
    cap: int
    partition_field: FieldKind
    groups: tuple[Group, ...]
    statements: tuple[Query, ...]
    overlap_stmt: Query
    exclusion_stmts: tuple[Query, ...]
    warnings: tuple[str, ...] = ()

    @property
    def overlap_number(self) -> int:
        return len(self.statements) + 1


def realize_group(base: Query, field: FieldKind, group: Group) -> Query:
    """Build the executable statement for one partition group."""
    if isinstance(group, Letters):
        patterns = [Pattern(sym, truncated=True) for sym in group.symbols]
        return And(base, or_chain([Term(field, p) for p in patterns]))
    if isinstance(group, Prefixes):
        return And(base, or_chain([Term(field, p) for p in group.patterns]))
    scoped = base if not group.prefix else And(base, Term(field, Pattern(group.prefix, True)))
    pivot_term = Term(group.pivot_field, group.pivot)
    if group.side == WITH_PIVOT:
        return And(scoped, pivot_term)
    return Diff(scoped, pivot_term)


def build_overlap_statement(n: int) -> Query:
    """OR of all pairwise ANDs of statements 1..n, pairs in (i, j) order.

    With a single statement there are no pairs; the canonical empty-set
    query ``#1 NOT #1`` keeps the statement numbering scheme intact.
    """
    if n < 1:
        raise GroupSpecError(f"need at least one statement, got {n}")
    if n == 1:
        return Diff(SetRef(1), SetRef(1))
    pairs = [And(SetRef(i), SetRef(j)) for i in range(1, n + 1) for j in range(i + 1, n + 1)]
    return or_chain(pairs)


def build_exclusions(n: int, overlap_number: int) -> list[Query]:
    """One ``#i NOT #overlap`` statement per numbered statement."""
    if overlap_number <= n:
        raise GroupSpecError(
            f"overlap statement number {overlap_number} must exceed the statement count {n}"
        )
    return [Diff(SetRef(i), SetRef(overlap_number)) for i in range(1, n + 1)]


# ---------------------------------------------------------------------------
# Group specifications
# ---------------------------------------------------------------------------


def parse_group_spec(text: str) -> tuple[Group, ...]:
    """Parse the textual group form, e.g. ``AB,CDEFG,...,J/AD=CA``.

    Comma-separated chunks; a plain chunk lists the first symbols of one
    letter group, while ``PREFIX/FIELD=value`` expands to the with/without
    pivot-split pair. An empty prefix (``/AD=LONDON``) splits the whole
    base query.
    """
    groups: list[Group] = []
    for chunk in text.split(","):
        chunk = chunk.strip()
        if not chunk:
            raise GroupSpecError("empty group in group specification")
        if "/" in chunk:
            prefix, _, pivot_text = chunk.partition("/")
            field_name, eq, value = pivot_text.partition("=")
            if not eq or not value.strip():
                raise GroupSpecError(f"split group {chunk!r} must look like PREFIX/FIELD=value")
            try:
                pivot_field = FieldKind(field_name.strip().upper())
            except ValueError:
                raise GroupSpecError(f"unknown pivot field {field_name!r}") from None
            value = value.strip()
            truncated = value.endswith("*")
            pivot = Pattern(value[:-1] if truncated else value, truncated)
            prefix = prefix.strip().upper()
            groups.append(Split(prefix, pivot_field, pivot, WITH_PIVOT))
            groups.append(Split(prefix, pivot_field, pivot, WITHOUT_PIVOT))
        else:
            groups.append(Letters(tuple(chunk.upper())))
    return tuple(groups)


def validate_groups(groups: tuple[Group, ...]) -> None:
    """Check the structural group invariants (disjointness, paired splits)."""
    seen_letters: set[str] = set()
    for group in groups:
        if isinstance(group, Letters):
            clash = seen_letters.intersection(group.symbols)
            if clash:
                raise GroupSpecError(f"symbol {sorted(clash)[0]!r} appears in two letter groups")
            seen_letters.update(group.symbols)
    sides: dict[tuple, set[str]] = {}
    for group in groups:
        if isinstance(group, Split):
            key = (group.prefix, group.pivot_field, group.pivot)
            sides.setdefault(key, set()).add(group.side)
            if group.prefix and group.prefix[0] in seen_letters:
                raise GroupSpecError(
                    f"split prefix {group.prefix!r} collides with a letter group symbol"
                )
    for key, present in sides.items():
        if present != {WITH_PIVOT, WITHOUT_PIVOT}:
            raise GroupSpecError(
                f"pivot split on prefix {key[0]!r} needs both the with and without sides"
            )


def _coverage_warnings(
    groups: tuple[Group, ...],
    engine: CappedEngine,
    field: FieldKind,
    check_canonical: bool = True,
) -> tuple[str, ...]:
    if any(isinstance(g, Split) and not g.prefix for g in groups):
        return ()  # an empty-prefix split covers the whole base
    covered: set[str] = set()
    for group in groups:
        if isinstance(group, Letters):
            covered.update(group.symbols)
        elif isinstance(group, Prefixes):
            covered.update(p.text[0] for p in group.patterns)
        elif group.prefix:
            covered.add(group.prefix[0])
    warnings = []
    missing = [s for s in SYMBOLS if s not in covered]
    if missing and check_canonical:
        warnings.append(
            "groups leave first symbols uncovered: " + "".join(missing)
        )
    present = engine.prefix_children(field, "")
    stray = sorted(present - covered - set(SYMBOLS))
    if stray:
        warnings.append(
            "stored values start with symbols outside A..Z, 0..9 that no group covers: "
            + "".join(stray)
        )
    return tuple(warnings)


# ---------------------------------------------------------------------------
# Planners
# ---------------------------------------------------------------------------


def _effective_cap(engine: CappedEngine, cap: int | None) -> int:
    if cap is None:
        return engine.config.cap
    if cap < 1:
        raise GroupSpecError(f"cap must be >= 1, got {cap}")
    if engine.config.count_mode == CENSORED and cap != engine.config.cap:
        raise GroupSpecError(
            "a censored engine only answers probes at its own cap; "
            f"cannot plan for cap {cap} against engine cap {engine.config.cap}"
        )
    return cap


def _fits(count: CountResult, cap: int) -> bool:
    # Strict: a statement counting exactly the cap is not retrievable.
    return count.is_exact and count.value < cap


def plan_prescribed(
    engine: CappedEngine,
    base: Query,
    field: FieldKind,
    groups: tuple[Group, ...],
    cap: int | None = None,
) -> Strategy:
    """Realize caller-fixed groups, verifying every statement stays sub-cap."""
    cap = _effective_cap(engine, cap)
    validate_groups(groups)
    statements = []
    for i, group in enumerate(groups, start=1):
        stmt = realize_group(base, field, group)
        count = engine.count(stmt)
        if not _fits(count, cap):
            size = "at least the cap" if not count.is_exact else str(count.value)
            raise PlanInfeasibleError(
                f"statement {i} ({print_normalized(stmt)}) has {size} records; cap is {cap}"
            )
        statements.append(stmt)
    return _assemble(engine, base, field, cap, tuple(groups), tuple(statements), True)


def plan_auto(
    engine: CappedEngine, base: Query, field: FieldKind, cap: int | None = None
) -> Strategy:
    """Greedy alphabetical packing against a visible-count engine."""
    if engine.config.count_mode != VISIBLE:
        raise GroupSpecError("plan_auto needs a visible-count engine; use plan_censored")
    return _plan_greedy(engine, base, field, _effective_cap(engine, cap))


def plan_censored(
    engine: CappedEngine, base: Query, field: FieldKind, cap: int | None = None
) -> Strategy:
    """Greedy packing driven purely by censored probes."""
    if engine.config.count_mode != CENSORED:
        raise GroupSpecError("plan_censored needs a censored-count engine; use plan_auto")
    return _plan_greedy(engine, base, field, _effective_cap(engine, cap))


def _plan_greedy(engine: CappedEngine, base: Query, field: FieldKind, cap: int) -> Strategy:
    def probe(patterns: list[Pattern]) -> CountResult:
        return engine.count(And(base, or_chain([Term(field, p) for p in patterns])))

    def child_prefixes(prefix: str) -> list[Pattern]:
        items: list[Pattern] = []
        for ch in sorted(engine.prefix_children(field, prefix), key=symbol_sort_key):
            if ch == " ":
                # No pattern may end with a space (normalization strips it)
                # and no stored value does either, so hop over the word
                # boundary to the next symbols directly.
                items.extend(child_prefixes(prefix + ch))
            else:
                items.append(Pattern(prefix + ch, truncated=True))
        return items

    def expand(item: Pattern) -> list[Pattern]:
        # Replace an oversized prefix bucket by its exact-value residue
        # plus all minimally-longer representable prefixes.
        exact = Pattern(item.text, truncated=False)
        exact_count = probe([exact])
        if not _fits(exact_count, cap):
            raise PlanInfeasibleError(
                f"single value class {field.value}={item.text} reaches the cap {cap}; "
                "no finer partition exists"
            )
        items = child_prefixes(item.text)
        if exact_count.value > 0:
            items.insert(0, exact)
        if not items:
            raise PlanInfeasibleError(
                f"prefix bucket {field.value}={item.text}* reaches the cap {cap} "
                "but has no values to split on"
            )
        return items

    def pack(items: list[Pattern]) -> list[tuple[list[Pattern], int]]:
        packed: list[tuple[list[Pattern], int]] = []
        current: list[Pattern] = []
        current_count = 0
        for item in items:
            result = probe(current + [item])
            if _fits(result, cap):
                current.append(item)
                current_count = result.value
                continue
            if current:
                packed.append((current, current_count))
                current = []
                current_count = 0
            alone = probe([item])
            if _fits(alone, cap):
                current = [item]
                current_count = alone.value
                continue
            if not item.truncated:
                raise PlanInfeasibleError(
                    f"single value class {field.value}={item.text} reaches the cap {cap}; "
                    "no finer partition exists"
                )
            packed.extend(pack(expand(item)))
        if current:
            packed.append((current, current_count))
        return packed

    packed = [(patterns, n) for patterns, n in pack([Pattern(s, True) for s in SYMBOLS]) if n > 0]
    if not packed:
        # Degenerate base (matches nothing): keep one full-coverage statement.
        packed = [([Pattern(s, True) for s in SYMBOLS], 0)]
    groups: list[Group] = []
    for patterns, _ in packed:
        if all(p.truncated and len(p.text) == 1 for p in patterns):
            groups.append(Letters(tuple(p.text for p in patterns)))
        else:
            groups.append(Prefixes(tuple(patterns)))
    statements = tuple(realize_group(base, field, g) for g in groups)
    # Greedy plans only drop provably empty symbols, so canonical-coverage
    # warnings would be noise; stray-symbol warnings still apply.
    return _assemble(engine, base, field, cap, tuple(groups), statements, False)


def _assemble(
    engine: CappedEngine,
    base: Query,
    field: FieldKind,
    cap: int,
    groups: tuple[Group, ...],
    statements: tuple[Query, ...],
    check_canonical_coverage: bool,
) -> Strategy:
    n = len(statements)
    return Strategy(
        base=base,
        cap=cap,
        partition_field=field,
        groups=groups,
        statements=statements,
        overlap_stmt=build_overlap_statement(n),
        exclusion_stmts=tuple(build_exclusions(n, n + 1)),
        warnings=_coverage_warnings(groups, engine, field, check_canonical_coverage),
    )
