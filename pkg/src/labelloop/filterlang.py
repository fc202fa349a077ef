"""Boolean keyword query language.

Queries look like ``(measles OR mumps) AND vaccine`` and are evaluated
against tokenized document text.  A bare word matches a single token, a
double-quoted phrase matches a contiguous token run, and AND binds tighter
than OR.  NOT is supported as an exclusion extension.

Parsed queries are immutable trees; ``matches`` is pure, so one parsed
query may be shared by any number of pipeline workers.
"""
from __future__ import annotations

import unicodedata
from dataclasses import dataclass, field
from typing import Union

_RESERVED = {"and", "or", "not"}
_SPECIAL = set('()"')


# ---------------------------------------------------------------------------
# tokenization of document text

@dataclass(frozen=True)
class TokenizedText:
    """Lowercased whitespace-split tokens of one document."""

    tokens: tuple[str, ...]

    def __len__(self) -> int:
        return len(self.tokens)


def _strip_edges(token: str) -> str:
    start, end = 0, len(token)
    while start < end and not (token[start].isalnum() or token[start] in "#@"):
        start += 1
    while end > start and not (token[end - 1].isalnum() or token[end - 1] in "#@"):
        end -= 1
    return token[start:end]


def tokenize(text: str) -> TokenizedText:
    """Lowercase, split on unicode whitespace, strip edge punctuation.

    Characters other than letters, digits, '#' and '@' are stripped from
    token edges only, so URLs and hashtags survive intact.  Expects
    NFC-normalized input (see ingest.parse_document).
    """
    out = []
    for raw in text.lower().split():
        tok = _strip_edges(raw)
        if tok:
            out.append(tok)
    return TokenizedText(tuple(out))


# ---------------------------------------------------------------------------
# query AST

@dataclass(frozen=True)
class Keyword:
    """Contiguous token phrase; single-token in the common case."""

    phrase: tuple[str, ...]

    def __post_init__(self):
        if not self.phrase:
            raise ValueError("keyword phrase must have at least one token")
        norm = []
        for tok in self.phrase:
            tok = tok.lower()
            if not tok:
                raise ValueError("keyword tokens must be non-empty")
            if any(ch.isspace() or ch == '"' for ch in tok):
                raise ValueError(f"keyword token not representable: {tok!r}")
            norm.append(tok)
        object.__setattr__(self, "phrase", tuple(norm))


@dataclass(frozen=True)
class And:
    children: tuple["FilterQuery", ...]

    def __post_init__(self):
        if len(self.children) < 2:
            raise ValueError("And requires at least 2 children")


@dataclass(frozen=True)
class Or:
    children: tuple["FilterQuery", ...]

    def __post_init__(self):
        if len(self.children) < 2:
            raise ValueError("Or requires at least 2 children")


@dataclass(frozen=True)
class Not:
    child: "FilterQuery"


FilterQuery = Union[Keyword, And, Or, Not]


def keyword(text: str) -> Keyword:
    """Build a Keyword from raw text using document tokenization rules."""
    toks = tokenize(unicodedata.normalize("NFC", text)).tokens
    if not toks:
        raise ValueError(f"no tokens in keyword text: {text!r}")
    return Keyword(toks)


# ---------------------------------------------------------------------------
# parser

class ParseError(ValueError):
    """Syntax error with the byte offset where parsing failed."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (at offset {offset})")
        self.message = message
        self.offset = offset


@dataclass
class _Token:
    kind: str  # 'lparen' | 'rparen' | 'word' | 'quoted' | 'eof'
    text: str
    offset: int


def _lex(source: str) -> list[_Token]:
    tokens = []
    i, n = 0, len(source)
    while i < n:
        ch = source[i]
        if ch.isspace():
            i += 1
        elif ch == "(":
            tokens.append(_Token("lparen", ch, i))
            i += 1
        elif ch == ")":
            tokens.append(_Token("rparen", ch, i))
            i += 1
        elif ch == '"':
            end = source.find('"', i + 1)
            if end == -1:
                raise ParseError("unterminated quoted phrase", i)
            tokens.append(_Token("quoted", source[i + 1:end], i))
            i = end + 1
        else:
            start = i
            while i < n and not source[i].isspace() and source[i] not in _SPECIAL:
                i += 1
            tokens.append(_Token("word", source[start:i], start))
    tokens.append(_Token("eof", "", n))
    return tokens


class _Parser:
    def __init__(self, tokens: list[_Token]):
        self.tokens = tokens
        self.pos = 0

    def peek(self) -> _Token:
        return self.tokens[self.pos]

    def advance(self) -> _Token:
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def expr(self) -> FilterQuery:
        children = [self.and_expr()]
        while self._is_op("or"):
            self.advance()
            children.append(self.and_expr())
        return Or(tuple(children)) if len(children) > 1 else children[0]

    def and_expr(self) -> FilterQuery:
        children = [self.unary()]
        while self._is_op("and"):
            self.advance()
            children.append(self.unary())
        return And(tuple(children)) if len(children) > 1 else children[0]

    def unary(self) -> FilterQuery:
        if self._is_op("not"):
            self.advance()
            return Not(self.unary())
        return self.atom()

    def atom(self) -> FilterQuery:
        tok = self.peek()
        if tok.kind == "lparen":
            self.advance()
            inner = self.expr()
            closing = self.peek()
            if closing.kind != "rparen":
                raise ParseError("expected ')'", closing.offset)
            self.advance()
            return inner
        if tok.kind == "quoted":
            self.advance()
            toks = tokenize(tok.text).tokens
            if not toks:
                raise ParseError("empty quoted phrase", tok.offset)
            return Keyword(toks)
        if tok.kind == "word":
            if tok.text.lower() in _RESERVED:
                raise ParseError(f"dangling operator {tok.text!r}", tok.offset)
            self.advance()
            toks = tokenize(tok.text).tokens
            if not toks:
                raise ParseError(f"keyword has no matchable characters: {tok.text!r}", tok.offset)
            return Keyword(toks)
        raise ParseError("expected keyword, quoted phrase or '('", tok.offset)

    def _is_op(self, name: str) -> bool:
        tok = self.peek()
        return tok.kind == "word" and tok.text.lower() == name


def parse_query(source: str) -> FilterQuery:
    """Parse a query string; raises ParseError with a byte offset on failure."""
    source = unicodedata.normalize("NFC", source)
    tokens = _lex(source)
    if tokens[0].kind == "eof":
        raise ParseError("empty query", 0)
    parser = _Parser(tokens)
    query = parser.expr()
    trailing = parser.peek()
    if trailing.kind != "eof":
        raise ParseError(f"unexpected {trailing.text!r}", trailing.offset)
    return query


# ---------------------------------------------------------------------------
# evaluation

def _contains_phrase(phrase: tuple[str, ...], tokens: tuple[str, ...]) -> bool:
    if len(phrase) == 1:
        return phrase[0] in tokens
    k = len(phrase)
    for i in range(len(tokens) - k + 1):
        if tokens[i:i + k] == phrase:
            return True
    return False


def _eval(node: FilterQuery, tokens: tuple[str, ...]) -> bool:
    kind = type(node)
    if kind is Keyword:
        return _contains_phrase(node.phrase, tokens)
    if kind is And:
        return all(_eval(c, tokens) for c in node.children)
    if kind is Or:
        return any(_eval(c, tokens) for c in node.children)
    return not _eval(node.child, tokens)


def matches(query: FilterQuery, text: TokenizedText) -> bool:
    """True iff the query matches the tokenized text.  Pure."""
    return _eval(query, text.tokens)


# ---------------------------------------------------------------------------
# canonical printing

def _print_keyword(node: Keyword) -> str:
    if len(node.phrase) > 1:
        return '"' + " ".join(node.phrase) + '"'
    tok = node.phrase[0]
    if tok in _RESERVED or any(ch in _SPECIAL for ch in tok):
        return f'"{tok}"'
    return tok


def print_query(query: FilterQuery) -> str:
    """Fully parenthesized canonical form; parse(print(q)) == q."""
    kind = type(query)
    if kind is Keyword:
        return _print_keyword(query)
    if kind is And:
        return "(" + " AND ".join(print_query(c) for c in query.children) + ")"
    if kind is Or:
        return "(" + " OR ".join(print_query(c) for c in query.children) + ")"
    return "(NOT " + print_query(query.child) + ")"
