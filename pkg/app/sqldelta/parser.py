"""
SQL_δ parser - tokenizer and recursive descent parser.

Keywords are case-insensitive; identifiers keep their case. Errors carry the line
and column of the offending token.
"""

from dataclasses import dataclass
from enum import Enum, auto
from typing import Any, Optional

from app.core.exceptions import ParseError
from app.sqldelta.ast import (
    BoolExpr,
    ColumnRef,
    Comparison,
    Condition,
    EdgePattern,
    FromItem,
    JoinRef,
    Literal,
    MapRef,
    MatcherSpec,
    NodePattern,
    Operand,
    PathPattern,
    Select,
    SelectItem,
    Star,
    SubqueryRef,
    TableRef,
)


class TokenType(Enum):
    # Keywords
    SELECT = auto()
    FROM = auto()
    WHERE = auto()
    MATCH = auto()
    AS = auto()
    JOIN = auto()
    ON = auto()
    MAP = auto()
    USING = auto()
    AND = auto()
    OR = auto()
    TRUE = auto()
    FALSE = auto()
    NULL = auto()

    # Literals and names
    NUMBER = auto()
    STRING = auto()
    IDENTIFIER = auto()

    # Operators
    EQ = auto()  # =
    NEQ = auto()  # != or <>
    LT = auto()  # <
    GT = auto()  # >
    LTE = auto()  # <=
    GTE = auto()  # >=
    ARROW = auto()  # ->
    DASH = auto()  # -
    TILDE = auto()  # ~

    # Punctuation
    LPAREN = auto()
    RPAREN = auto()
    LBRACKET = auto()
    RBRACKET = auto()
    COMMA = auto()
    DOT = auto()
    COLON = auto()
    STAR = auto()
    SEMICOLON = auto()

    EOF = auto()


KEYWORDS = {
    "select": TokenType.SELECT,
    "from": TokenType.FROM,
    "where": TokenType.WHERE,
    "match": TokenType.MATCH,
    "as": TokenType.AS,
    "join": TokenType.JOIN,
    "on": TokenType.ON,
    "map": TokenType.MAP,
    "using": TokenType.USING,
    "and": TokenType.AND,
    "or": TokenType.OR,
    "true": TokenType.TRUE,
    "false": TokenType.FALSE,
    "null": TokenType.NULL,
}

SYMBOLS = [
    ("->", TokenType.ARROW),
    ("<=", TokenType.LTE),
    (">=", TokenType.GTE),
    ("!=", TokenType.NEQ),
    ("<>", TokenType.NEQ),
    ("=", TokenType.EQ),
    ("<", TokenType.LT),
    (">", TokenType.GT),
    ("-", TokenType.DASH),
    ("~", TokenType.TILDE),
    ("(", TokenType.LPAREN),
    (")", TokenType.RPAREN),
    ("[", TokenType.LBRACKET),
    ("]", TokenType.RBRACKET),
    (",", TokenType.COMMA),
    (".", TokenType.DOT),
    (":", TokenType.COLON),
    ("*", TokenType.STAR),
    (";", TokenType.SEMICOLON),
]

COMPARISONS = {
    TokenType.EQ: "=",
    TokenType.NEQ: "!=",
    TokenType.LT: "<",
    TokenType.GT: ">",
    TokenType.LTE: "<=",
    TokenType.GTE: ">=",
}


@dataclass
class Token:
    type: TokenType
    value: Any
    line: int
    column: int

    def __repr__(self):
        return f"Token({self.type.name}, {self.value!r}, {self.line}:{self.column})"


class Tokenizer:
    """Lexical analyzer - converts SQL_δ text to tokens."""

    def __init__(self, text: str):
        self.text = text
        self.pos = 0
        self.line = 1
        self.column = 1

    def _advance(self, n: int = 1):
        for _ in range(n):
            if self.text[self.pos] == "\n":
                self.line += 1
                self.column = 1
            else:
                self.column += 1
            self.pos += 1

    def _error(self, message: str):
        raise ParseError(message, self.line, self.column)

    def tokenize(self) -> list[Token]:
        text = self.text
        tokens: list[Token] = []
        while self.pos < len(text):
            ch = text[self.pos]
            if ch.isspace():
                self._advance()
                continue
            if text.startswith("--", self.pos):
                while self.pos < len(text) and text[self.pos] != "\n":
                    self._advance()
                continue
            line, column = self.line, self.column
            if ch.isdigit() or (ch == "." and self.pos + 1 < len(text) and text[self.pos + 1].isdigit()):
                tokens.append(Token(TokenType.NUMBER, self._number(), line, column))
            elif ch == "'":
                tokens.append(Token(TokenType.STRING, self._string(), line, column))
            elif ch.isalpha() or ch == "_":
                start = self.pos
                while self.pos < len(text) and (text[self.pos].isalnum() or text[self.pos] == "_"):
                    self._advance()
                word = text[start : self.pos]
                kind = KEYWORDS.get(word.lower(), TokenType.IDENTIFIER)
                tokens.append(Token(kind, word, line, column))
            else:
                for symbol, kind in SYMBOLS:
                    if text.startswith(symbol, self.pos):
                        self._advance(len(symbol))
                        tokens.append(Token(kind, symbol, line, column))
                        break
                else:
                    self._error(f"unexpected character {ch!r}")
        tokens.append(Token(TokenType.EOF, None, self.line, self.column))
        return tokens

    def _number(self):
        text = self.text
        start = self.pos
        while self.pos < len(text) and text[self.pos].isdigit():
            self._advance()
        is_float = False
        if self.pos < len(text) and text[self.pos] == "." and (
            self.pos + 1 >= len(text) or text[self.pos + 1] != "."
        ):
            is_float = True
            self._advance()
            while self.pos < len(text) and text[self.pos].isdigit():
                self._advance()
        if self.pos < len(text) and text[self.pos] in "eE":
            mark = self.pos
            self._advance()
            if self.pos < len(text) and text[self.pos] in "+-":
                self._advance()
            if self.pos < len(text) and text[self.pos].isdigit():
                is_float = True
                while self.pos < len(text) and text[self.pos].isdigit():
                    self._advance()
            else:
                self._error(f"malformed number {text[start:mark + 1]!r}")
        literal = text[start : self.pos]
        return float(literal) if is_float else int(literal)

    def _string(self) -> str:
        self._advance()
        out = []
        while True:
            if self.pos >= len(self.text):
                self._error("unterminated string literal")
            ch = self.text[self.pos]
            if ch == "'":
                if self.text.startswith("''", self.pos):
                    out.append("'")
                    self._advance(2)
                    continue
                self._advance()
                return "".join(out)
            out.append(ch)
            self._advance()


class Parser:
    """Recursive descent parser - tokens to a Select tree."""

    def __init__(self, tokens: list[Token]):
        self.tokens = tokens
        self.pos = 0

    # -----------------------
    # token helpers
    # -----------------------

    @property
    def current(self) -> Token:
        return self.tokens[self.pos]

    def peek(self, offset: int = 1) -> Token:
        return self.tokens[min(self.pos + offset, len(self.tokens) - 1)]

    def check(self, *kinds: TokenType) -> bool:
        return self.current.type in kinds

    def accept(self, kind: TokenType) -> Optional[Token]:
        if self.current.type is kind:
            token = self.current
            self.pos += 1
            return token
        return None

    def expect(self, kind: TokenType, what: Optional[str] = None) -> Token:
        token = self.accept(kind)
        if token is None:
            self.error(f"expected {what or kind.name.lower()}")
        return token

    def error(self, message: str):
        token = self.current
        found = "end of input" if token.type is TokenType.EOF else repr(token.value)
        raise ParseError(f"{message}, found {found}", token.line, token.column)

    # -----------------------
    # grammar
    # -----------------------

    def parse_query(self) -> Select:
        query = self.parse_select()
        self.accept(TokenType.SEMICOLON)
        if not self.check(TokenType.EOF):
            self.error("unexpected clause")
        return query

    def parse_select(self) -> Select:
        self.expect(TokenType.SELECT, "select")
        items = [self.parse_select_item()]
        while self.accept(TokenType.COMMA):
            items.append(self.parse_select_item())
        source = None
        if self.accept(TokenType.FROM):
            source = self.parse_from()
        paths: list[PathPattern] = []
        while self.check(TokenType.MATCH):
            match_token = self.current
            self.pos += 1
            if source is not None and not (isinstance(source, TableRef) and source.alias is None):
                raise ParseError(
                    "match needs a bare graph name in from", match_token.line, match_token.column
                )
            paths.append(self.parse_path())
            while self.check(TokenType.COMMA, TokenType.LPAREN):
                self.accept(TokenType.COMMA)
                paths.append(self.parse_path())
        where = None
        if self.accept(TokenType.WHERE):
            where = self.parse_condition()
        return Select(tuple(items), source, tuple(paths), where)

    def parse_select_item(self) -> SelectItem:
        if self.accept(TokenType.STAR):
            return SelectItem(Star())
        if (
            self.check(TokenType.IDENTIFIER)
            and self.peek().type is TokenType.DOT
            and self.peek(2).type is TokenType.STAR
        ):
            qualifier = self.current.value
            self.pos += 3
            return SelectItem(Star(qualifier))
        expr = self.parse_operand()
        alias = None
        if self.accept(TokenType.AS):
            alias = self.expect(TokenType.IDENTIFIER, "alias").value
        elif self.check(TokenType.IDENTIFIER):
            alias = self.current.value
            self.pos += 1
        return SelectItem(expr, alias)

    def parse_from(self) -> FromItem:
        item = self.parse_from_item()
        while True:
            if self.accept(TokenType.JOIN):
                right = self.parse_from_item()
                self.expect(TokenType.ON, "on")
                item = JoinRef(item, right, self.parse_condition())
            elif self.accept(TokenType.MAP):
                right = self.parse_from_item()
                matcher = self.parse_matcher() if self.accept(TokenType.USING) else None
                item = MapRef(item, right, matcher)
            else:
                return item

    def parse_from_item(self) -> FromItem:
        if self.accept(TokenType.LPAREN):
            query = self.parse_select()
            self.expect(TokenType.RPAREN, "')'")
            self.accept(TokenType.AS)
            alias = self.expect(TokenType.IDENTIFIER, "subquery alias").value
            return SubqueryRef(query, alias)
        name = self.expect(TokenType.IDENTIFIER, "relation name").value
        alias = None
        if self.accept(TokenType.AS):
            alias = self.expect(TokenType.IDENTIFIER, "alias").value
        elif self.check(TokenType.IDENTIFIER):
            alias = self.current.value
            self.pos += 1
        return TableRef(name, alias)

    def parse_matcher(self) -> MatcherSpec:
        token = self.expect(TokenType.IDENTIFIER, "matcher name")
        kind = token.value.lower()
        if kind not in ("exact", "fuzzy"):
            raise ParseError(f"unknown matcher {token.value!r}", token.line, token.column)
        self.expect(TokenType.LPAREN, "'('")
        left = self.parse_column()
        self.expect(TokenType.EQ if kind == "exact" else TokenType.TILDE, "'='" if kind == "exact" else "'~'")
        right = self.parse_column()
        threshold = None
        if kind == "fuzzy" and self.accept(TokenType.COMMA):
            threshold = float(self.expect(TokenType.NUMBER, "threshold").value)
        self.expect(TokenType.RPAREN, "')'")
        return MatcherSpec(kind, left, right, threshold)

    def parse_path(self) -> PathPattern:
        nodes = [self.parse_node()]
        edges = []
        while self.check(TokenType.DASH, TokenType.ARROW):
            edges.append(self.parse_edge())
            nodes.append(self.parse_node())
        return PathPattern(tuple(nodes), tuple(edges))

    def _var_and_label(self, closing: TokenType) -> tuple[Optional[str], Optional[str]]:
        var = label = None
        if self.check(TokenType.IDENTIFIER):
            var = self.current.value
            self.pos += 1
        if self.accept(TokenType.COLON):
            label = self.expect(TokenType.IDENTIFIER, "label").value
        self.expect(closing, "')'" if closing is TokenType.RPAREN else "']'")
        return var, label

    def parse_node(self) -> NodePattern:
        self.expect(TokenType.LPAREN, "'(' opening a pattern vertex")
        return NodePattern(*self._var_and_label(TokenType.RPAREN))

    def parse_edge(self) -> EdgePattern:
        if self.accept(TokenType.ARROW):
            return EdgePattern()
        self.expect(TokenType.DASH, "'-'")
        self.expect(TokenType.LBRACKET, "'['")
        var, label = self._var_and_label(TokenType.RBRACKET)
        self.expect(TokenType.ARROW, "'->'")
        return EdgePattern(var, label)

    def parse_condition(self) -> Condition:
        items = [self.parse_conjunction()]
        while self.accept(TokenType.OR):
            items.append(self.parse_conjunction())
        return items[0] if len(items) == 1 else BoolExpr("or", tuple(items))

    def parse_conjunction(self) -> Condition:
        items = [self.parse_atom()]
        while self.accept(TokenType.AND):
            items.append(self.parse_atom())
        return items[0] if len(items) == 1 else BoolExpr("and", tuple(items))

    def parse_atom(self) -> Condition:
        if self.accept(TokenType.LPAREN):
            cond = self.parse_condition()
            self.expect(TokenType.RPAREN, "')'")
            return cond
        left = self.parse_operand()
        kind = self.current.type
        if kind not in COMPARISONS:
            self.error("expected a comparison operator")
        self.pos += 1
        right = self.parse_operand()
        return Comparison(COMPARISONS[kind], left, right)

    def parse_column(self) -> ColumnRef:
        name = self.expect(TokenType.IDENTIFIER, "column name").value
        if self.accept(TokenType.DOT):
            return ColumnRef(self.expect(TokenType.IDENTIFIER, "column name").value, name)
        return ColumnRef(name)

    def parse_operand(self) -> Operand:
        token = self.current
        if token.type is TokenType.NUMBER:
            self.pos += 1
            return Literal(token.value)
        if token.type is TokenType.DASH and self.peek().type is TokenType.NUMBER:
            self.pos += 2
            return Literal(-self.tokens[self.pos - 1].value)
        if token.type is TokenType.STRING:
            self.pos += 1
            return Literal(token.value)
        if token.type in (TokenType.TRUE, TokenType.FALSE):
            self.pos += 1
            return Literal(token.type is TokenType.TRUE)
        if token.type is TokenType.NULL:
            self.pos += 1
            return Literal(None)
        if token.type is TokenType.IDENTIFIER:
            return self.parse_column()
        self.error("expected a column or a literal")


def parse(text: str) -> Select:
    """
    Parses one SQL_δ query.

    Raises:
        ParseError: With the line and column of the first syntax error.
    """
    return Parser(Tokenizer(text).tokenize()).parse_query()
