"""Capped query engine: cheap counts, materialization refused at the cap.

The engine models the retrieval interface that motivates strategy
partitioning in the first place. Counting a query is always allowed;
``retrieve`` hands back the full id set only when its cardinality is
strictly below the configured cap and raises ``CapExceededError``
otherwise. Numbered statements registered on the engine can be referenced
by later queries as ``#n``, mirroring an interactive search session.

Two count modes exist. ``visible`` reports every count exactly, however
large. ``censored`` reports counts at or above the cap only as
"at least the cap", which is the harder interface an automatic planner
may have to probe.

Indexing is a per-field sorted term dictionary with postings, so term
lookups, prefix ranges and next-symbol introspection are all cheap.
"""

from __future__ import annotations

from bisect import bisect_left
from collections import defaultdict
from dataclasses import dataclass
from typing import AbstractSet

from .corpus import Corpus
from .query import (
    And,
    FieldKind,
    Or,
    Query,
    SetRef,
    Term,
    has_set_references,
    set_references,
    tree_size,
)

VISIBLE = "visible"
CENSORED = "censored"

# Only small reference-free subtrees are memoized: registry changes cannot
# stale them, and bounding the size keeps the (recursive) dataclass hashing
# of memo keys shallow no matter how long a statement chain grows.
_MEMO_MAX_NODES = 200


class EngineError(Exception):
    """Engine configuration or registry misuse."""


class CapExceededError(EngineError):
    """Raised when retrieving a result set whose cardinality reaches the cap."""

    def __init__(self, count: "CountResult", cap: int):
        self.count = count
        self.cap = cap
        size = "at least the cap" if count.value is None else str(count.value)
        super().__init__(f"result set has {size} records; cap is {cap}")


@dataclass(frozen=True)
class EngineConfig:
    cap: int = 100_000
    count_mode: str = VISIBLE

    def __post_init__(self) -> None:
        if self.cap < 1:
            raise EngineError(f"cap must be >= 1, got {self.cap}")
        if self.count_mode not in (VISIBLE, CENSORED):
            raise EngineError(f"count_mode must be {VISIBLE!r} or {CENSORED!r}")


@dataclass(frozen=True)
class CountResult:
    """An exact count, or the censored answer "at least the cap" (value None)."""

    value: int | None

    @classmethod
    def exact(cls, n: int) -> "CountResult":
        return cls(n)

    @classmethod
    def at_least_cap(cls) -> "CountResult":
        return cls(None)

    @property
    def is_exact(self) -> bool:
        return self.value is not None

    def expect_exact(self) -> int:
        if self.value is None:
            raise EngineError("count was censored at the cap")
        return self.value


class CappedEngine:
    """Queries over one immutable corpus through a capped interface."""

    def __init__(self, corpus: Corpus, config: EngineConfig | None = None):
        self.corpus = corpus
        self.config = config or EngineConfig()
        self._ids = [rec.id for rec in corpus]
        index: dict[FieldKind, dict[str, set[int]]] = {
            field: defaultdict(set) for field in FieldKind
        }
        for pos, rec in enumerate(corpus):
            index[FieldKind.PY][str(rec.pub_year)].add(pos)
            for country in rec.countries:
                index[FieldKind.CU][country].add(pos)
            for title in rec.source_titles:
                index[FieldKind.SO][title].add(pos)
            for address in rec.addresses:
                for token in address.split():
                    index[FieldKind.AD][token].add(pos)
        self._postings: dict[FieldKind, dict[str, set[int]]] = {
            field: dict(terms) for field, terms in index.items()
        }
        self._terms: dict[FieldKind, list[str]] = {
            field: sorted(terms) for field, terms in index.items()
        }
        self._registry: dict[int, frozenset[int]] = {}
        # memo for SetRef-free subtrees; registry changes cannot stale these
        self._memo: dict[Query, AbstractSet[int]] = {}

    # -- public interface ---------------------------------------------------

    def count(self, query: Query) -> CountResult:
        return self._to_count(len(self._eval(query)))

    def retrieve(self, query: Query) -> set[str]:
        """Materialize the result iff its cardinality is strictly below the cap."""
        hits = self._eval(query)
        if len(hits) >= self.config.cap:
            raise CapExceededError(self._to_count(len(hits)), self.config.cap)
        return {self._ids[pos] for pos in hits}

    def register(self, number: int, query: Query, overwrite: bool = False) -> CountResult:
        """Evaluate and store a numbered statement; returns its count.

        The stored set stays countable via ``#number`` even when it is at or
        above the cap; only materialization is capped. Statements may only
        reference strictly smaller numbers.
        """
        if number < 1:
            raise EngineError(f"statement number must be positive, got {number}")
        if number in self._registry and not overwrite:
            raise EngineError(f"statement #{number} is already registered")
        refs = set_references(query)
        forward = sorted(r for r in refs if r >= number)
        if forward:
            raise EngineError(
                f"statement #{number} may not reference #{forward[0]} (forward reference)"
            )
        hits = self._eval(query)
        self._registry[number] = frozenset(hits)
        return self._to_count(len(hits))

    def prefix_children(self, field: FieldKind, prefix: str) -> set[str]:
        """Distinct characters that follow ``prefix`` among stored values.

        The prefix is a raw character position into the normalized values
        (only case-folded here), so positions ending on a word boundary,
        like ``"JOURNAL "``, stay addressable. Values exactly equal to the
        prefix contribute nothing; they form the exact-match residue a
        planner must cover separately.
        """
        if field is FieldKind.PY:
            raise EngineError("prefix introspection is not supported for PY")
        prefix = prefix.upper()
        terms = self._terms[field]
        children: set[str] = set()
        i = bisect_left(terms, prefix)
        while i < len(terms) and terms[i].startswith(prefix):
            if len(terms[i]) > len(prefix):
                children.add(terms[i][len(prefix)])
            i += 1
        return children

    # -- evaluation ---------------------------------------------------------

    def _to_count(self, n: int) -> CountResult:
        if self.config.count_mode == CENSORED and n >= self.config.cap:
            return CountResult.at_least_cap()
        return CountResult.exact(n)

    def _eval(self, node: Query) -> AbstractSet[int]:
        # Results are shared objects (postings, registry entries, memo hits)
        # and must never be mutated; set operators always build new sets.
        # Iterative, so statement chains of any length evaluate fine.
        results: list[AbstractSet[int]] = []
        stack: list[tuple[Query, bool]] = [(node, False)]
        while stack:
            current, ready = stack.pop()
            if ready:
                right = results.pop()
                left = results.pop()
                if isinstance(current, And):
                    combined = left & right
                elif isinstance(current, Or):
                    combined = left | right
                else:
                    combined = left - right
                if self._memoable(current):
                    self._memo[current] = combined
                results.append(combined)
                continue
            if self._memoable(current):
                cached = self._memo.get(current)
                if cached is not None:
                    results.append(cached)
                    continue
            if isinstance(current, Term):
                result = self._eval_term(current)
                if self._memoable(current):
                    self._memo[current] = result
                results.append(result)
            elif isinstance(current, SetRef):
                try:
                    results.append(self._registry[current.number])
                except KeyError:
                    raise EngineError(
                        f"unbound set reference #{current.number}"
                    ) from None
            else:
                stack.append((current, True))
                stack.append((current.right, False))
                stack.append((current.left, False))
        return results[0]

    @staticmethod
    def _memoable(node: Query) -> bool:
        return not has_set_references(node) and tree_size(node) <= _MEMO_MAX_NODES

    def _eval_term(self, term: Term) -> AbstractSet[int]:
        postings = self._postings[term.field]
        pattern = term.pattern
        if not pattern.truncated:
            return postings.get(pattern.text, frozenset())
        terms = self._terms[term.field]
        matches = []
        i = bisect_left(terms, pattern.text)
        while i < len(terms) and terms[i].startswith(pattern.text):
            matches.append(postings[terms[i]])
            i += 1
        if not matches:
            return frozenset()
        if len(matches) == 1:
            return matches[0]
        return set().union(*matches)
