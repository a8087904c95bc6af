"""Record corpora for capped-retrieval experiments.

A corpus is an ordered collection of bibliographic-style records, each
carrying a publication year, one or more source titles (a journal title,
sometimes plus the title of the series it belongs to), affiliation
countries, and author addresses. Multi-valued source titles are the one
mechanism by which a record can fall into two initial-letter buckets at
once, which is exactly what the strategy runner has to reconcile.

This module owns:

- the ``Record``/``Corpus`` types and their normalization rules,
- the tab-separated on-disk format (``ingest``/``serialize``),
- a fully seeded synthetic generator (``generate``),
- three reference fixtures (``build_fixture``) whose statement counts
  under the shipped seven-statement grouping are known exactly and are
  asserted by the regression suite.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from typing import Iterable, Iterator

# Canonical symbol order for title initials: letters first, then digits.
SYMBOLS = "ABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789"

_SYMBOL_RANK = {c: i for i, c in enumerate(SYMBOLS)}

FILE_HEADER = "# id\tpub_year\tsource_titles\tcountries\taddresses"


def symbol_sort_key(ch: str) -> tuple[int, int]:
    """Sort key placing A..Z before 0..9, anything else after by codepoint."""
    rank = _SYMBOL_RANK.get(ch)
    if rank is not None:
        return (0, rank)
    return (1, ord(ch))


def normalize_text(value: str) -> str:
    """Uppercase and collapse all whitespace runs to single spaces."""
    return " ".join(value.upper().split())


class CorpusError(ValueError):
    """Malformed corpus data: bad lines, duplicate ids, invalid profiles."""


# '|' is the multi-value separator; '()=#*' can never appear in a query
# pattern, so a stored value containing them would be unreachable by any
# statement and silently escape every export strategy.
_VALUE_RESERVED = set("|()=#*")


def _check_value(value: str, what: str) -> str:
    if not value:
        raise CorpusError(f"empty {what}")
    bad = _VALUE_RESERVED.intersection(value)
    if bad:
        raise CorpusError(f"{what} {value!r} contains reserved character {sorted(bad)[0]!r}")
    return value


@dataclass(frozen=True, slots=True)
class Record:
    """One bibliographic item, stored fully normalized.

    ``source_titles`` keeps ingestion order (it is a list-like field);
    ``countries`` and ``addresses`` are sets and serialize sorted.
    """

    id: str
    pub_year: int
    source_titles: tuple[str, ...]
    countries: frozenset[str]
    addresses: frozenset[str]

    def __post_init__(self) -> None:
        rid = normalize_text(self.id)
        if not rid or " " in rid:
            raise CorpusError(f"record id must be a non-empty token, got {self.id!r}")
        if rid.startswith("#") or "|" in rid:
            raise CorpusError(f"record id {rid!r} uses a reserved character")
        titles = tuple(_check_value(normalize_text(t), "source title") for t in self.source_titles)
        if not titles:
            raise CorpusError(f"record {rid!r} has no source titles")
        countries = frozenset(_check_value(normalize_text(c), "country") for c in self.countries)
        if not countries:
            raise CorpusError(f"record {rid!r} has no countries")
        addresses = frozenset(_check_value(normalize_text(a), "address") for a in self.addresses)
        object.__setattr__(self, "id", rid)
        object.__setattr__(self, "source_titles", titles)
        object.__setattr__(self, "countries", countries)
        object.__setattr__(self, "addresses", addresses)


@dataclass(frozen=True)
class Corpus:
    """Immutable ordered record collection; iteration order is ingestion order."""

    records: tuple[Record, ...]

    def __post_init__(self) -> None:
        seen: dict[str, int] = {}
        for pos, rec in enumerate(self.records):
            if rec.id in seen:
                raise CorpusError(
                    f"duplicate record id {rec.id!r} at position {pos + 1} "
                    f"(first seen at position {seen[rec.id] + 1})"
                )
            seen[rec.id] = pos

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self) -> Iterator[Record]:
        return iter(self.records)


# ---------------------------------------------------------------------------
# On-disk format
#
# UTF-8, LF line endings. Lines starting with '#' are comments. A data line
# has exactly 5 tab-separated fields:
#
#   id <TAB> pub_year <TAB> so1|so2|... <TAB> cu1|cu2|... <TAB> ad1|ad2|...
#
# The address field may be empty; all others are mandatory.
# ---------------------------------------------------------------------------


def ingest(source: str | Iterable[str]) -> Corpus:
    """Parse line-oriented corpus text into a Corpus.

    ``source`` is either the whole text or an iterable of lines (an open
    text file works). Errors carry the 1-based line number; duplicate ids
    name both offending lines.
    """
    if isinstance(source, str):
        lines: Iterable[str] = source.splitlines()
    else:
        lines = source
    records: list[Record] = []
    seen_lines: dict[str, int] = {}
    for lineno, raw in enumerate(lines, start=1):
        line = raw.rstrip("\n")
        if line.startswith("#"):
            continue
        if not line.strip():
            raise CorpusError(f"line {lineno}: blank line is not valid corpus data")
        fields = line.split("\t")
        if len(fields) != 5:
            raise CorpusError(
                f"line {lineno}: expected 5 tab-separated fields, got {len(fields)}"
            )
        rid, year_text, so_field, cu_field, ad_field = fields
        try:
            year = int(year_text)
        except ValueError:
            raise CorpusError(f"line {lineno}: unparsable year {year_text!r}") from None
        try:
            record = Record(
                id=rid,
                pub_year=year,
                source_titles=tuple(_split_values(so_field, lineno, "SO")),
                countries=frozenset(_split_values(cu_field, lineno, "CU")),
                addresses=frozenset(_split_values(ad_field, lineno, "AD", allow_empty=True)),
            )
        except CorpusError as exc:
            raise CorpusError(f"line {lineno}: {exc}") from None
        if record.id in seen_lines:
            raise CorpusError(
                f"line {lineno}: duplicate id {record.id!r} "
                f"(first defined on line {seen_lines[record.id]})"
            )
        seen_lines[record.id] = lineno
        records.append(record)
    return Corpus(tuple(records))


def _split_values(text: str, lineno: int, tag: str, allow_empty: bool = False) -> list[str]:
    if not text:
        if allow_empty:
            return []
        raise CorpusError(f"line {lineno}: empty {tag} field")
    parts = text.split("|")
    if any(not p.strip() for p in parts):
        raise CorpusError(f"line {lineno}: {tag} field has an empty value")
    return parts


def serialize(corpus: Corpus) -> str:
    """Render a corpus in the on-disk format; byte-deterministic."""
    out = [FILE_HEADER]
    for rec in corpus.records:
        out.append(
            "\t".join(
                (
                    rec.id,
                    str(rec.pub_year),
                    "|".join(rec.source_titles),
                    "|".join(sorted(rec.countries)),
                    "|".join(sorted(rec.addresses)),
                )
            )
        )
    return "\n".join(out) + "\n"


def load_corpus(path: str) -> Corpus:
    with open(path, "r", encoding="utf-8") as fh:
        return ingest(fh)


def save_corpus(corpus: Corpus, path: str) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(serialize(corpus))


# ---------------------------------------------------------------------------
# Seeded generator
# ---------------------------------------------------------------------------

_TITLE_WORDS = (
    "JOURNAL",
    "REVIEW",
    "ACTA",
    "ANNALS",
    "BULLETIN",
    "LETTERS",
    "PROCEEDINGS",
    "STUDIES",
    "REPORTS",
    "TRANSACTIONS",
)

DEFAULT_COUNTRY_WEIGHTS = {"USA": 5.0, "ENGLAND": 2.0, "GERMANY": 2.0, "CUBA": 1.0}

# Journal initials are heavily skewed toward J in the wild (JOURNAL OF ...).
DEFAULT_LETTER_WEIGHTS = {
    **{c: 1.0 for c in SYMBOLS[:26]},
    "J": 6.0,
    **{d: 0.2 for d in SYMBOLS[26:]},
}

DEFAULT_ADDRESS_POOLS = {
    "USA": (
        "STANFORD UNIV STANFORD CA",
        "MIT CAMBRIDGE MA",
        "HARVARD UNIV BOSTON MA",
        "UNIV TEXAS AUSTIN TX",
        "COLUMBIA UNIV NEW YORK NY",
    ),
    "ENGLAND": ("UCL LONDON", "UNIV MANCHESTER", "UNIV OXFORD"),
    "GERMANY": ("MAX PLANCK INST BERLIN", "UNIV HEIDELBERG"),
    "CUBA": ("CNIC AVE 25 HAVANA", "UNIV ORIENTE SANTIAGO DE CUBA"),
}


@dataclass(frozen=True)
class CorpusProfile:
    """Parameters for the seeded generator; equal profiles give equal corpora."""

    seed: int
    n_records: int
    year_range: tuple[int, int] = (2005, 2009)
    country_weights: dict[str, float] = field(
        default_factory=lambda: dict(DEFAULT_COUNTRY_WEIGHTS)
    )
    initial_letter_weights: dict[str, float] = field(
        default_factory=lambda: dict(DEFAULT_LETTER_WEIGHTS)
    )
    multi_title_prob: float = 0.1
    address_pools: dict[str, tuple[str, ...]] = field(
        default_factory=lambda: dict(DEFAULT_ADDRESS_POOLS)
    )

    def validate(self) -> None:
        if self.seed < 0:
            raise CorpusError("profile seed must be a non-negative integer")
        if self.n_records < 0:
            raise CorpusError("profile n_records must be non-negative")
        lo, hi = self.year_range
        if lo > hi:
            raise CorpusError(f"profile year_range {self.year_range} is not ordered")
        _check_weights(self.country_weights, "country_weights")
        _check_weights(self.initial_letter_weights, "initial_letter_weights")
        for sym in self.initial_letter_weights:
            if sym not in _SYMBOL_RANK:
                raise CorpusError(f"initial_letter_weights key {sym!r} not in A..Z, 0..9")
        if not 0.0 <= self.multi_title_prob <= 1.0:
            raise CorpusError(f"multi_title_prob {self.multi_title_prob} outside [0, 1]")

    @classmethod
    def from_dict(cls, data: dict) -> "CorpusProfile":
        """Build a profile from parsed JSON, tolerating list-typed fields."""
        kwargs = dict(data)
        if "year_range" in kwargs:
            lo, hi = kwargs["year_range"]
            kwargs["year_range"] = (int(lo), int(hi))
        if "address_pools" in kwargs:
            kwargs["address_pools"] = {
                country: tuple(pool) for country, pool in kwargs["address_pools"].items()
            }
        return cls(**kwargs)


def _check_weights(weights: dict[str, float], what: str) -> None:
    if not weights:
        raise CorpusError(f"profile {what} is empty")
    if any(w < 0 for w in weights.values()):
        raise CorpusError(f"profile {what} has a negative weight")
    if not any(w > 0 for w in weights.values()):
        raise CorpusError(f"profile {what} has no positive weight")


def _weighted_items(weights: dict[str, float]) -> tuple[list[str], list[float]]:
    # Sorted for determinism regardless of dict insertion order.
    items = sorted((k, w) for k, w in weights.items() if w > 0)
    return [k for k, _ in items], [w for _, w in items]


def _random_title(rng: random.Random, initial: str) -> str:
    body = "".join(rng.choice(SYMBOLS[:26]) for _ in range(rng.randint(3, 7)))
    return f"{initial}{body} {rng.choice(_TITLE_WORDS)}"


def generate(profile: CorpusProfile) -> Corpus:
    """Generate a corpus fully determined by the profile."""
    profile.validate()
    rng = random.Random(profile.seed)
    countries, country_w = _weighted_items(profile.country_weights)
    letters, letter_w = _weighted_items(profile.initial_letter_weights)
    lo, hi = profile.year_range
    width = max(7, len(str(profile.n_records)))
    records = []
    for i in range(profile.n_records):
        country = rng.choices(countries, country_w)[0]
        titles = [_random_title(rng, rng.choices(letters, letter_w)[0])]
        if rng.random() < profile.multi_title_prob:
            second = _random_title(rng, rng.choices(letters, letter_w)[0])
            while second == titles[0]:
                second = _random_title(rng, rng.choices(letters, letter_w)[0])
            titles.append(second)
        pool = profile.address_pools.get(country, ())
        addresses = (rng.choice(pool),) if pool else ()
        records.append(
            Record(
                id=f"R{i + 1:0{width}d}",
                pub_year=rng.randint(lo, hi),
                source_titles=tuple(titles),
                countries=frozenset((country,)),
                addresses=frozenset(addresses),
            )
        )
    return Corpus(tuple(records))


# ---------------------------------------------------------------------------
# Reference fixtures
#
# Each fixture reproduces exact per-statement counts under the shipped
# seven-statement grouping (five initial-letter buckets plus a J bucket
# divided by an address pivot). The construction works backwards from the
# target numbers: e[i] records belong to statement i alone, and overlap
# records carry exactly two source titles spanning two different statement
# groups, allocated by greedy largest-degree-first pairing over the per-
# statement overlap degrees d[i]. Statements 6 and 7 are complementary on
# the address pivot, so the pair (6, 7) can never share a record.
# ---------------------------------------------------------------------------

FIXTURE_LETTER_GROUPS: tuple[tuple[str, ...], ...] = (
    ("A", "B"),
    ("C", "D", "E", "F", "G"),
    ("H", "I", "K", "L", "M"),
    ("N", "O", "P", "Q", "R"),
    ("S", "T", "U", "V", "W", "X", "Y", "Z", "1", "2", "3", "4", "5", "6", "7", "8", "9"),
)

FIXTURE_SPLIT_PREFIX = "J"

FIXTURE_NAMES = ("cuba_t3", "usa_t1", "uk_s1")


@dataclass(frozen=True)
class _SplitFixtureSpec:
    seed: int
    country: str
    pivot: str
    exclusive: tuple[int, ...]  # records in exactly one statement
    overlap_degree: tuple[int, ...]  # per-statement count of two-section records
    with_pivot_pool: tuple[str, ...]
    without_pivot_pool: tuple[str, ...]
    titles_per_symbol: int


_CUBA_SPEC = _SplitFixtureSpec(
    seed=1003,
    country="CUBA",
    pivot="HAVANA",
    exclusive=(127, 205, 139, 177, 86, 108, 34),
    overlap_degree=(13, 11, 22, 16, 5, 0, 1),
    with_pivot_pool=(
        "CNIC AVE 25 HAVANA",
        "UNIV HAVANA VEDADO HAVANA",
        "INST SUPER TECNOL HAVANA",
    ),
    without_pivot_pool=(
        "UNIV ORIENTE SANTIAGO DE CUBA",
        "UNIV CENT MARTA ABREU VILLA CLARA",
        "CTR INVEST ENERGIA MATANZAS",
    ),
    titles_per_symbol=24,
)

_USA_SPEC = _SplitFixtureSpec(
    seed=1001,
    country="USA",
    pivot="CA",
    exclusive=(85586, 87535, 69457, 75516, 45551, 17008, 92808),
    overlap_degree=(5536, 4385, 13440, 9267, 13200, 56, 168),
    with_pivot_pool=(
        "STANFORD UNIV STANFORD CA",
        "UNIV CALIF BERKELEY CA",
        "CALTECH PASADENA CA",
        "UNIV CALIF LOS ANGELES CA",
    ),
    without_pivot_pool=(
        "MIT CAMBRIDGE MA",
        "HARVARD UNIV BOSTON MA",
        "UNIV TEXAS AUSTIN TX",
        "UNIV MICHIGAN ANN ARBOR MI",
        "COLUMBIA UNIV NEW YORK NY",
    ),
    titles_per_symbol=400,
)

_COLLABORATOR_COUNTRIES = ("SPAIN", "NETHERLANDS", "BELGIUM", "MEXICO", "CANADA", "JAPAN")

_UK_NATIONS = ("ENGLAND", "SCOTLAND", "WALES", "NORTH IRELAND")
_UK_NATION_WEIGHTS = (70, 15, 10, 5)
_UK_LONDON_POOL = (
    "IMPERIAL COLL LONDON",
    "UCL LONDON",
    "KINGS COLL LONDON",
    "LONDON SCH ECON",
    "QUEEN MARY UNIV LONDON",
)
_UK_OTHER_POOL = (
    "UNIV MANCHESTER",
    "UNIV EDINBURGH",
    "UNIV OXFORD",
    "UNIV CAMBRIDGE",
    "CARDIFF UNIV",
    "QUEENS UNIV BELFAST",
    "UNIV GLASGOW",
    "UNIV LEEDS",
)

_FIXTURE_YEAR = 2007


def build_fixture(name: str) -> Corpus:
    """Build one of the shipped reference corpora: cuba_t3, usa_t1 or uk_s1."""
    if name == "cuba_t3":
        return _build_split_fixture(_CUBA_SPEC)
    if name == "usa_t1":
        return _build_split_fixture(_USA_SPEC)
    if name == "uk_s1":
        return _build_uk_fixture()
    raise CorpusError(f"unknown fixture {name!r}; expected one of {', '.join(FIXTURE_NAMES)}")


def pair_overlap_degrees(
    degrees: list[int] | tuple[int, ...], forbidden: frozenset[tuple[int, int]] = frozenset()
) -> list[tuple[int, int]]:
    """Realize a symmetric degree sequence as a list of index pairs.

    Greedy largest-degree-first, with one refinement: statements that have
    forbidden partners are matched first (largest such degree first, each
    edge going to the largest compatible partner), otherwise the big
    unconstrained degrees would consume each other and leave only a
    forbidden pair at the end. ``forbidden`` holds unordered index pairs
    that may never share a record. Deterministic; raises CorpusError when
    the sequence cannot be realized.
    """
    remaining = list(degrees)
    if any(d < 0 for d in remaining):
        raise CorpusError("overlap degrees must be non-negative")
    if sum(remaining) % 2 != 0:
        raise CorpusError("overlap degree sequence has odd sum; cannot pair")
    blocked = {tuple(sorted(p)) for p in forbidden}
    constrained = sorted(
        {k for pair in blocked for k in pair},
        key=lambda k: (-remaining[k], k),
    )
    pairs: list[tuple[int, int]] = []

    def take_edge(i: int) -> None:
        candidates = [
            k
            for k in range(len(remaining))
            if k != i and remaining[k] > 0 and tuple(sorted((i, k))) not in blocked
        ]
        if not candidates:
            raise CorpusError("overlap degree sequence infeasible under pair constraints")
        j = max(candidates, key=lambda k: (remaining[k], -k))
        remaining[i] -= 1
        remaining[j] -= 1
        pairs.append((min(i, j), max(i, j)))

    for i in constrained:
        while remaining[i] > 0:
            take_edge(i)
    while True:
        i = max(range(len(remaining)), key=lambda k: (remaining[k], -k))
        if remaining[i] == 0:
            break
        take_edge(i)
    return pairs


def _title_pools(rng: random.Random, symbols: Iterable[str], per_symbol: int) -> dict[str, list[str]]:
    pools: dict[str, list[str]] = {}
    for sym in symbols:
        seen: set[str] = set()
        pool: list[str] = []
        while len(pool) < per_symbol:
            title = _random_title(rng, sym)
            if title not in seen:
                seen.add(title)
                pool.append(title)
        pools[sym] = pool
    return pools


def _build_split_fixture(spec: _SplitFixtureSpec) -> Corpus:
    rng = random.Random(spec.seed)
    symbols = [s for group in FIXTURE_LETTER_GROUPS for s in group] + [FIXTURE_SPLIT_PREFIX]
    pools = _title_pools(rng, symbols, spec.titles_per_symbol)
    any_pool = spec.with_pivot_pool + spec.without_pivot_pool

    def pick_title(stmt: int) -> str:
        if stmt >= 5:  # both pivot-split statements draw from the J bucket
            return rng.choice(pools[FIXTURE_SPLIT_PREFIX])
        return rng.choice(pools[rng.choice(FIXTURE_LETTER_GROUPS[stmt])])

    def addresses_for(stmts: tuple[int, ...]) -> tuple[str, ...]:
        if 5 in stmts:
            addrs = [rng.choice(spec.with_pivot_pool)]
            if rng.random() < 0.15:
                addrs.append(rng.choice(spec.without_pivot_pool))
            return tuple(addrs)
        if 6 in stmts:
            # complement side: no address may carry the pivot token
            return (rng.choice(spec.without_pivot_pool),) if rng.random() > 0.05 else ()
        roll = rng.random()
        if roll < 0.08:
            return ()
        if roll < 0.16:
            return (rng.choice(any_pool), rng.choice(any_pool))
        return (rng.choice(any_pool),)

    def countries_for() -> frozenset[str]:
        if rng.random() < 0.08:
            return frozenset((spec.country, rng.choice(_COLLABORATOR_COUNTRIES)))
        return frozenset((spec.country,))

    rows: list[tuple[tuple[str, ...], frozenset[str], tuple[str, ...]]] = []
    for stmt, count in enumerate(spec.exclusive):
        for _ in range(count):
            rows.append(((pick_title(stmt),), countries_for(), addresses_for((stmt,))))
    pairs = pair_overlap_degrees(spec.overlap_degree, forbidden=frozenset({(5, 6)}))
    for i, j in pairs:
        rows.append(((pick_title(i), pick_title(j)), countries_for(), addresses_for((i, j))))

    rng.shuffle(rows)
    width = max(7, len(str(len(rows))))
    records = tuple(
        Record(
            id=f"R{pos + 1:0{width}d}",
            pub_year=_FIXTURE_YEAR,
            source_titles=titles,
            countries=countries,
            addresses=frozenset(addrs),
        )
        for pos, (titles, countries, addrs) in enumerate(rows)
    )
    return Corpus(records)


def _build_uk_fixture(n_with_london: int = 33043, n_without: int = 98802) -> Corpus:
    rng = random.Random(1002)
    pools = _title_pools(rng, SYMBOLS, 60)

    def titles_for() -> tuple[str, ...]:
        first = rng.choice(pools[rng.choice(SYMBOLS[:26])])
        if rng.random() < 0.1:
            second = rng.choice(pools[rng.choice(SYMBOLS[:26])])
            if second != first:
                return (first, second)
        return (first,)

    def nation() -> frozenset[str]:
        base = rng.choices(_UK_NATIONS, _UK_NATION_WEIGHTS)[0]
        if rng.random() < 0.06:
            return frozenset((base, rng.choice(_COLLABORATOR_COUNTRIES)))
        return frozenset((base,))

    rows: list[tuple[tuple[str, ...], frozenset[str], tuple[str, ...]]] = []
    for _ in range(n_with_london):
        addrs = [rng.choice(_UK_LONDON_POOL)]
        if rng.random() < 0.2:
            addrs.append(rng.choice(_UK_OTHER_POOL))
        rows.append((titles_for(), nation(), tuple(addrs)))
    for _ in range(n_without):
        addrs = (rng.choice(_UK_OTHER_POOL),) if rng.random() > 0.05 else ()
        rows.append((titles_for(), nation(), addrs))

    rng.shuffle(rows)
    width = max(7, len(str(len(rows))))
    records = tuple(
        Record(
            id=f"R{pos + 1:0{width}d}",
            pub_year=_FIXTURE_YEAR,
            source_titles=titles,
            countries=countries,
            addresses=frozenset(addrs),
        )
        for pos, (titles, countries, addrs) in enumerate(rows)
    )
    return Corpus(records)
