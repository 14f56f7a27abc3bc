"""Recursive-descent parser.

    expr   := xor ("|" xor)*
    xor    := term ("^" term)*
    term   := factor ("&" factor)*
    factor := ("!" | "~") factor | "(" expr ")" | ident

NOT binds tightest, then AND, XOR, OR. Binary operators are left-associative.
"""
from __future__ import annotations

import re

from .expr import And, Expr, Not, Or, Var, Xor

_TOKEN = re.compile(r"\s*(?:(?P<ident>[A-Za-z_][A-Za-z0-9_]*)|(?P<op>[|&^!~()]))")


class ParseError(ValueError):
    def __init__(self, message: str, offset: int, expected: set[str]):
        self.offset = offset
        self.expected = sorted(expected)
        super().__init__(f"{message} at offset {offset}; expected one of {self.expected}")


def _tokenize(text: str):
    tokens = []
    pos = 0
    while True:
        while pos < len(text) and text[pos].isspace():
            pos += 1
        if pos == len(text):
            break
        m = _TOKEN.match(text, pos)
        if not m:
            raise ParseError(f"unexpected character {text[pos]!r}", len(text[:pos].encode()),
                             {"identifier", "!", "~", "(", "|", "&", "^", ")"})
        kind = "ident" if m.group("ident") else m.group("op")
        start = m.start("ident") if m.group("ident") else m.start("op")
        tokens.append((kind, m.group(kind if kind == "ident" else "op"), start))
        pos = m.end()
    tokens.append(("eof", "", len(text.encode())))
    return tokens


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.tokens = _tokenize(text)
        self.pos = 0

    def peek(self):
        return self.tokens[self.pos]

    def advance(self):
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def offset(self, tok) -> int:
        # byte offset of a character index
        return len(self.text[: tok[2]].encode()) if tok[0] != "eof" else tok[2]

    def fail(self, expected):
        tok = self.peek()
        what = "end of input" if tok[0] == "eof" else repr(tok[1])
        raise ParseError(f"unexpected {what}", self.offset(tok), expected)

    def parse(self) -> Expr:
        e = self.expr()
        if self.peek()[0] != "eof":
            self.fail({"|", "^", "&", "end of input"})
        return e

    def expr(self) -> Expr:
        e = self.xor()
        while self.peek()[0] == "|":
            self.advance()
            e = Or(e, self.xor())
        return e

    def xor(self) -> Expr:
        e = self.term()
        while self.peek()[0] == "^":
            self.advance()
            e = Xor(e, self.term())
        return e

    def term(self) -> Expr:
        e = self.factor()
        while self.peek()[0] == "&":
            self.advance()
            e = And(e, self.factor())
        return e

    def factor(self) -> Expr:
        kind = self.peek()[0]
        if kind in ("!", "~"):
            self.advance()
            return Not(self.factor())
        if kind == "(":
            self.advance()
            e = self.expr()
            if self.peek()[0] != ")":
                self.fail({")", "|", "^", "&"})
            self.advance()
            return e
        if kind == "ident":
            return Var(self.advance()[1])
        self.fail({"identifier", "!", "~", "("})


def parse_expr(text: str) -> Expr:
    """Parse ``text``; precedence from tightest: ``!``/``~``, ``&``, ``^``, ``|``."""
    try:
        return _Parser(text).parse()
    except RecursionError:
        raise ParseError("expression nested too deeply", 0, set()) from None
