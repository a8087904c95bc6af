"""Boolean field-query language: syntax tree, parser, printer, evaluator.

The surface syntax is the classic bibliographic search-statement style::

    PY=2007 AND CU=USA AND (SO=A* OR SO=B*)
    PY=2007 AND CU=USA AND SO=J* NOT AD=CA
    (#1 AND #2) OR (#1 AND #3)

Grammar (parentheses bind tightest, then AND/NOT at equal precedence and
left-associative, then OR)::

    expr    := and (OR and)*
    and     := primary ((AND | NOT) primary)*
    primary := '(' expr ')' | FIELD '=' value-or-group | '#' digits

``NOT`` is binary set difference, not unary negation. ``FIELD=(a OR b)``
is sugar for ``FIELD=a OR FIELD=b`` and is expanded during parsing.
Values may span several words (``CU=NORTH IRELAND``) and may end in a
``*`` truncation marker that turns equality into prefix matching.

Field semantics over a corpus: PY matches the decimal publication year,
CU any affiliation country, SO any source title (a record with two titles
is found through either one), AD any whitespace-separated token of any
address. Evaluation here is a direct per-field scan of the corpus and
serves as the reference semantics; the indexed engine must agree with it.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Mapping, Set, Union

from .corpus import Corpus, normalize_text


class QueryError(ValueError):
    """Query syntax or binding error; carries the character offset when known."""

    def __init__(self, message: str, position: int | None = None):
        self.position = position
        if position is not None:
            message = f"{message} (offset {position})"
        super().__init__(message)


class FieldKind(Enum):
    PY = "PY"
    CU = "CU"
    SO = "SO"
    AD = "AD"


_PATTERN_FORBIDDEN = set("()=#*")


@dataclass(frozen=True)
class Pattern:
    """A normalized match value; ``truncated`` means trailing-``*`` prefix match."""

    text: str
    truncated: bool = False

    def __post_init__(self) -> None:
        text = normalize_text(self.text)
        if not text:
            raise QueryError("empty pattern")
        bad = _PATTERN_FORBIDDEN.intersection(text)
        if bad:
            raise QueryError(f"pattern {text!r} contains reserved character {sorted(bad)[0]!r}")
        object.__setattr__(self, "text", text)

    def matches(self, value: str) -> bool:
        if self.truncated:
            return value.startswith(self.text)
        return value == self.text


# An overlap statement over n sections is a chain of n*(n-1)/2 pairwise
# terms, so trees get long. Binary nodes therefore cache their subtree
# size, reference flag and structural hash at construction (O(1), built
# bottom-up) and compare iteratively, keeping every tree operation clear
# of the interpreter's recursion limit regardless of chain length.


@dataclass(frozen=True)
class Term:
    field: FieldKind
    pattern: Pattern

    def __post_init__(self) -> None:
        object.__setattr__(self, "_size", 1)
        object.__setattr__(self, "_refs", False)


class _Binary:
    def __post_init__(self) -> None:
        object.__setattr__(self, "_size", self.left._size + self.right._size + 1)
        object.__setattr__(self, "_refs", self.left._refs or self.right._refs)
        object.__setattr__(
            self, "_hash", hash((type(self).__name__, hash(self.left), hash(self.right)))
        )

    def __hash__(self) -> int:
        return self._hash

    def __eq__(self, other: object) -> bool:
        if self is other:
            return True
        if type(other) is not type(self):
            return NotImplemented
        stack = [(self, other)]
        while stack:
            a, b = stack.pop()
            if a is b:
                continue
            if type(a) is not type(b):
                return False
            if isinstance(a, _Binary):
                if a._hash != b._hash or a._size != b._size:
                    return False
                stack.append((a.right, b.right))
                stack.append((a.left, b.left))
            elif a != b:  # Term/SetRef: shallow dataclass equality
                return False
        return True


@dataclass(frozen=True, eq=False)
class And(_Binary):
    left: "Query"
    right: "Query"


@dataclass(frozen=True, eq=False)
class Or(_Binary):
    left: "Query"
    right: "Query"


@dataclass(frozen=True, eq=False)
class Diff(_Binary):
    """Set difference; surface syntax ``left NOT right``."""

    left: "Query"
    right: "Query"


@dataclass(frozen=True)
class SetRef:
    """Reference to a previously numbered statement, ``#n``."""

    number: int

    def __post_init__(self) -> None:
        if self.number < 1:
            raise QueryError(f"statement number must be positive, got #{self.number}")
        object.__setattr__(self, "_size", 1)
        object.__setattr__(self, "_refs", True)


Query = Union[Term, And, Or, Diff, SetRef]


def tree_size(query: Query) -> int:
    """Number of nodes in the query tree."""
    return query._size


def has_set_references(query: Query) -> bool:
    """Whether any ``#n`` reference occurs anywhere in the query."""
    return query._refs


def or_chain(parts: list[Query]) -> Query:
    """Fold queries into a left-associative OR chain."""
    if not parts:
        raise QueryError("cannot build an OR chain from nothing")
    node = parts[0]
    for part in parts[1:]:
        node = Or(node, part)
    return node


def set_references(query: Query) -> frozenset[int]:
    """All statement numbers referenced anywhere in the query."""
    if not query._refs:
        return frozenset()
    refs: set[int] = set()
    stack = [query]
    while stack:
        node = stack.pop()
        if isinstance(node, SetRef):
            refs.add(node.number)
        elif not isinstance(node, Term):
            if node.right._refs:
                stack.append(node.right)
            if node.left._refs:
                stack.append(node.left)
    return frozenset(refs)


# ---------------------------------------------------------------------------
# Tokenizer / parser
# ---------------------------------------------------------------------------

_WORD_BREAK = set(" \t\r\n()=#")
_KEYWORDS = {"AND", "OR", "NOT"}
_FIELDS = {f.value: f for f in FieldKind}


@dataclass(frozen=True)
class _Token:
    kind: str  # ( ) = word kw ref eof
    text: str
    pos: int
    number: int = 0


def _tokenize(text: str) -> list[_Token]:
    tokens: list[_Token] = []
    i, n = 0, len(text)
    while i < n:
        ch = text[i]
        if ch.isspace():
            i += 1
            continue
        if ch in "()=":
            tokens.append(_Token(ch, ch, i))
            i += 1
            continue
        if ch == "#":
            j = i + 1
            while j < n and text[j].isdigit():
                j += 1
            if j == i + 1:
                raise QueryError("expected a statement number after '#'", i)
            tokens.append(_Token("ref", text[i:j], i, number=int(text[i + 1 : j])))
            i = j
            continue
        j = i
        while j < n and text[j] not in _WORD_BREAK and not text[j].isspace():
            j += 1
        word = text[i:j]
        upper = word.upper()
        if upper in _KEYWORDS:
            tokens.append(_Token("kw", upper, i))
        else:
            tokens.append(_Token("word", word, i))
        i = j
    tokens.append(_Token("eof", "", n))
    return tokens


class _Parser:
    def __init__(self, text: str):
        self.tokens = _tokenize(text)
        self.pos = 0

    def peek(self) -> _Token:
        return self.tokens[self.pos]

    def take(self) -> _Token:
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def expect(self, kind: str, message: str) -> _Token:
        tok = self.peek()
        if tok.kind != kind:
            raise QueryError(message, tok.pos)
        return self.take()

    def parse(self) -> Query:
        node = self.expr()
        tok = self.peek()
        if tok.kind != "eof":
            raise QueryError(f"unexpected trailing input {tok.text!r}", tok.pos)
        return node

    def expr(self) -> Query:
        node = self.and_expr()
        while self.peek().kind == "kw" and self.peek().text == "OR":
            self.take()
            node = Or(node, self.and_expr())
        return node

    def and_expr(self) -> Query:
        node = self.primary()
        while self.peek().kind == "kw" and self.peek().text in ("AND", "NOT"):
            op = self.take()
            right = self.primary()
            node = And(node, right) if op.text == "AND" else Diff(node, right)
        return node

    def primary(self) -> Query:
        tok = self.peek()
        if tok.kind == "(":
            self.take()
            node = self.expr()
            self.expect(")", "unbalanced parentheses: expected ')'")
            return node
        if tok.kind == "ref":
            self.take()
            if tok.number < 1:
                raise QueryError("statement number must be positive", tok.pos)
            return SetRef(tok.number)
        if tok.kind == "word":
            field = _FIELDS.get(tok.text.upper())
            if self.tokens[self.pos + 1].kind == "=":
                if field is None:
                    raise QueryError(f"unknown field {tok.text!r}", tok.pos)
                self.take()  # field
                self.take()  # '='
                return self.field_value(field)
            raise QueryError(f"expected '=' after field name {tok.text!r}", tok.pos)
        if tok.kind == "eof":
            raise QueryError("unexpected end of query; expected a term, '(' or '#N'", tok.pos)
        raise QueryError(f"unexpected {tok.text!r}; expected a term, '(' or '#N'", tok.pos)

    def field_value(self, field: FieldKind) -> Query:
        if self.peek().kind == "(":
            # FIELD=(a OR b OR ...) expands to FIELD=a OR FIELD=b OR ...
            self.take()
            terms = [Term(field, self.value())]
            while self.peek().kind == "kw" and self.peek().text == "OR":
                self.take()
                terms.append(Term(field, self.value()))
            self.expect(")", "unbalanced parentheses in value group: expected ')' or OR")
            return or_chain(terms)
        return Term(field, self.value())

    def value(self) -> Pattern:
        start = self.peek()
        words: list[str] = []
        while self.peek().kind == "word":
            words.append(self.take().text)
        if not words:
            raise QueryError("empty value", start.pos)
        joined = " ".join(words)
        truncated = joined.endswith("*")
        if truncated:
            joined = joined[:-1]
        if not joined.strip():
            raise QueryError("lone '*' is not a valid value", start.pos)
        if "*" in joined:
            raise QueryError("'*' is only allowed as a trailing truncation marker", start.pos)
        return Pattern(joined, truncated)


def parse(text: str) -> Query:
    """Parse a query string into its syntax tree."""
    return _Parser(text).parse()


# ---------------------------------------------------------------------------
# Canonical printer
# ---------------------------------------------------------------------------


def print_normalized(query: Query) -> str:
    """Render the canonical text form; reparsing yields an identical tree.

    AND/NOT chains print flat; OR operands that are AND/NOT expressions are
    always parenthesized (``(#1 AND #2) OR (#1 AND #3)``), as are any
    right-nested same-precedence operands, so the printed structure is
    unambiguous under the left-associative grammar.

    Iterative so that statement chains of any length render without
    hitting the interpreter's recursion limit.
    """
    rendered: list[str] = []
    stack: list[tuple[Query, bool]] = [(query, False)]
    while stack:
        node, ready = stack.pop()
        if isinstance(node, Term):
            star = "*" if node.pattern.truncated else ""
            rendered.append(f"{node.field.value}={node.pattern.text}{star}")
        elif isinstance(node, SetRef):
            rendered.append(f"#{node.number}")
        elif not ready:
            stack.append((node, True))
            stack.append((node.right, False))
            stack.append((node.left, False))
        else:
            right = rendered.pop()
            left = rendered.pop()
            if isinstance(node, Or):
                left = _wrap_or(node.left, left, right_side=False)
                right = _wrap_or(node.right, right, right_side=True)
                rendered.append(f"{left} OR {right}")
            else:
                op = "AND" if isinstance(node, And) else "NOT"
                left = _wrap_and(node.left, left, right_side=False)
                right = _wrap_and(node.right, right, right_side=True)
                rendered.append(f"{left} {op} {right}")
    return rendered[0]


def _wrap_or(node: Query, text: str, right_side: bool) -> str:
    if isinstance(node, (And, Diff)) or (right_side and isinstance(node, Or)):
        return f"({text})"
    return text


def _wrap_and(node: Query, text: str, right_side: bool) -> str:
    if isinstance(node, Or) or (right_side and isinstance(node, (And, Diff))):
        return f"({text})"
    return text


# ---------------------------------------------------------------------------
# Reference evaluator (direct corpus scan)
# ---------------------------------------------------------------------------


def evaluate(
    query: Query, corpus: Corpus, registry: Mapping[int, Set[str]] | None = None
) -> set[str]:
    """Evaluate a query to the set of matching record ids.

    ``registry`` resolves ``#n`` references to previously computed id sets.
    This evaluator scans the corpus term by term; it is deliberately
    index-free so it can serve as an oracle for faster implementations.
    Iterative, so arbitrarily long statement chains evaluate fine.
    """
    reg: Mapping[int, Set[str]] = registry if registry is not None else {}
    results: list[set[str]] = []
    stack: list[tuple[Query, bool]] = [(query, False)]
    while stack:
        node, ready = stack.pop()
        if isinstance(node, Term):
            results.append(_scan_term(corpus, node))
        elif isinstance(node, SetRef):
            try:
                results.append(set(reg[node.number]))
            except KeyError:
                raise QueryError(f"unbound set reference #{node.number}") from None
        elif not ready:
            stack.append((node, True))
            stack.append((node.right, False))
            stack.append((node.left, False))
        else:
            right = results.pop()
            left = results.pop()
            if isinstance(node, And):
                results.append(left & right)
            elif isinstance(node, Or):
                results.append(left | right)
            else:
                results.append(left - right)
    return results[0]


def _scan_term(corpus: Corpus, term: Term) -> set[str]:
    pattern = term.pattern
    field = term.field
    found: set[str] = set()
    if field is FieldKind.PY:
        for rec in corpus:
            if pattern.matches(str(rec.pub_year)):
                found.add(rec.id)
    elif field is FieldKind.CU:
        for rec in corpus:
            if any(pattern.matches(c) for c in rec.countries):
                found.add(rec.id)
    elif field is FieldKind.SO:
        for rec in corpus:
            if any(pattern.matches(t) for t in rec.source_titles):
                found.add(rec.id)
    else:  # AD: match whole whitespace-separated address tokens
        for rec in corpus:
            if any(pattern.matches(tok) for addr in rec.addresses for tok in addr.split()):
                found.add(rec.id)
    return found
