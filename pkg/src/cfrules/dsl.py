"""Text format for rulebases (``.cfr`` files).

::

    # comments run to end of line
    rule r1 { if A and B and C then X (0.9) }
    rule r2 { if D or E or F then X (-0.6), Y (0.2) }
    fact A = 0.9

``and`` binds tighter than ``or``; parentheses group.  Keywords are
case-insensitive, identifiers are not.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from decimal import Decimal
from enum import Enum
from typing import Sequence, Union

from .antecedent import And, Expr, Leaf, Or
from .engine import Rule

KEYWORDS = frozenset({"rule", "if", "then", "and", "or", "fact"})
MAX_DEPTH = 100


@dataclass(frozen=True)
class SourceSpan:
    line: int
    column: int
    length: int


class ErrorKind(str, Enum):
    UNEXPECTED_TOKEN = "UnexpectedToken"
    BAD_NUMBER = "BadNumber"
    DUPLICATE_RULE_ID = "DuplicateRuleId"
    DUPLICATE_CONCLUSION = "DuplicateConclusion"
    EMPTY_GROUP = "EmptyGroup"


class ParseError(Exception):
    def __init__(self, kind: ErrorKind, span: SourceSpan, message: str):
        super().__init__(f"{span.line}:{span.column}: {message}")
        self.kind = kind
        self.span = span
        self.message = message


@dataclass(frozen=True)
class Token:
    kind: str  # keyword text, "ident", "number", a punctuation char, or "eof"
    text: str
    span: SourceSpan


_TOKEN_RE = re.compile(
    r"""
    (?P<ws>[ \t\r\n]+)
  | (?P<comment>\#[^\n]*)
  | (?P<number>[+-]?[0-9]+(?:\.[0-9]+)?)
  | (?P<ident>[A-Za-z][A-Za-z0-9_]*)
  | (?P<punct>[{}(),=])
    """,
    re.VERBOSE,
)


def tokenize(source: str) -> list[Token]:
    tokens = []
    pos, line, line_start = 0, 1, 0
    while pos < len(source):
        m = _TOKEN_RE.match(source, pos)
        col = pos - line_start + 1
        if m is None:
            bad = source[pos]
            raise ParseError(
                ErrorKind.UNEXPECTED_TOKEN,
                SourceSpan(line, col, 1),
                f"unexpected character {bad!r}",
            )
        text = m.group()
        span = SourceSpan(line, col, len(text))
        kind = m.lastgroup
        if kind == "ident" and text.lower() in KEYWORDS:
            tokens.append(Token(text.lower(), text, span))
        elif kind == "punct":
            tokens.append(Token(text, text, span))
        elif kind in ("ident", "number"):
            tokens.append(Token(kind, text, span))
        newlines = text.count("\n")
        if newlines:
            line += newlines
            line_start = pos + text.rindex("\n") + 1
        pos = m.end()
    col = pos - line_start + 1
    tokens.append(Token("eof", "", SourceSpan(line, col, 1)))
    return tokens


class _Parser:
    def __init__(self, tokens: list[Token]):
        self.tokens = tokens
        self.i = 0
        self.depth = 0

    @property
    def tok(self) -> Token:
        return self.tokens[self.i]

    def fail(self, expected: str) -> ParseError:
        t = self.tok
        found = "end of input" if t.kind == "eof" else repr(t.text)
        return ParseError(ErrorKind.UNEXPECTED_TOKEN, t.span, f"expected {expected}, found {found}")

    def expect(self, kind: str, what: str | None = None) -> Token:
        if self.tok.kind != kind:
            raise self.fail(what or repr(kind))
        t = self.tok
        self.i += 1
        return t

    def accept(self, kind: str) -> bool:
        if self.tok.kind == kind:
            self.i += 1
            return True
        return False

    def number(self) -> float:
        t = self.expect("number", "a number")
        value = float(t.text)
        if not -1.0 <= value <= 1.0:
            raise ParseError(
                ErrorKind.BAD_NUMBER, t.span, f"certainty {t.text} is outside [-1, 1]"
            )
        return value

    def rulebase(self):
        rules, facts, seen = [], [], {}
        while self.tok.kind != "eof":
            if self.tok.kind == "rule":
                start = self.tokens[self.i + 1] if self.i + 1 < len(self.tokens) else self.tok
                rule = self.rule()
                if rule.id in seen:
                    raise ParseError(
                        ErrorKind.DUPLICATE_RULE_ID, start.span, f"duplicate rule id {rule.id}"
                    )
                seen[rule.id] = rule
                rules.append(rule)
            elif self.tok.kind == "fact":
                self.i += 1
                name = self.expect("ident", "a proposition name").text
                self.expect("=", "'='")
                facts.append((name, self.number()))
            else:
                raise self.fail("'rule' or 'fact'")
        return rules, facts

    def rule(self) -> Rule:
        self.expect("rule")
        rid = self.expect("ident", "a rule id").text
        self.expect("{", "'{'")
        self.expect("if", "'if'")
        expr = self.expr()
        self.expect("then", "'then'")
        conclusions = [self.conclusion()]
        while self.accept(","):
            t = self.tok
            conclusions.append(self.conclusion())
            if conclusions[-1][0] in [p for p, _ in conclusions[:-1]]:
                raise ParseError(
                    ErrorKind.DUPLICATE_CONCLUSION,
                    t.span,
                    f"rule {rid} concludes {t.text} twice",
                )
        self.expect("}", "'}'")
        return Rule(rid, expr, tuple(conclusions))

    def conclusion(self) -> tuple[str, float]:
        name = self.expect("ident", "a conclusion name").text
        self.expect("(", "'('")
        cf = self.number()
        self.expect(")", "')'")
        return name, cf

    def expr(self) -> Expr:
        terms = [self.term()]
        while self.accept("or"):
            terms.append(self.term())
        return terms[0] if len(terms) == 1 else Or(tuple(terms))

    def term(self) -> Expr:
        atoms = [self.atom()]
        while self.accept("and"):
            atoms.append(self.atom())
        return atoms[0] if len(atoms) == 1 else And(tuple(atoms))

    def atom(self) -> Expr:
        if self.tok.kind == "ident":
            return Leaf(self.expect("ident").text)
        if self.tok.kind == "(":
            open_tok = self.expect("(")
            if self.tok.kind == ")":
                raise ParseError(ErrorKind.EMPTY_GROUP, open_tok.span, "empty group '()'")
            self.depth += 1
            if self.depth > MAX_DEPTH:
                raise ParseError(
                    ErrorKind.UNEXPECTED_TOKEN, open_tok.span, "parentheses nested too deeply"
                )
            inner = self.expr()
            self.expect(")", "')'")
            self.depth -= 1
            return inner
        raise self.fail("a proposition or '('")


def parse_rulebase(source: Union[str, bytes]) -> tuple[list[Rule], list[tuple[str, float]]]:
    """Parse a rulebase; raises :class:`ParseError` on the first error."""
    if isinstance(source, (bytes, bytearray)):
        try:
            source = bytes(source).decode("utf-8")
        except UnicodeDecodeError as exc:
            # spans count decoded characters, so locate the bad byte that way
            good = bytes(source[: exc.start]).decode("utf-8")
            line = good.count("\n") + 1
            col = len(good) - (good.rfind("\n") + 1) + 1
            raise ParseError(
                ErrorKind.UNEXPECTED_TOKEN,
                SourceSpan(line, col, 1),
                f"invalid UTF-8 byte {source[exc.start]:#04x}",
            ) from None
    return _Parser(tokenize(source)).rulebase()


def format_number(x: float) -> str:
    # positional notation only; the grammar has no exponents
    text = format(Decimal(repr(float(x))), "f")
    return text if "." in text else text + ".0"


def format_expr(expr: Expr, nested: bool = False) -> str:
    if isinstance(expr, Leaf):
        return expr.prop
    op = " and " if isinstance(expr, And) else " or "
    body = op.join(format_expr(c, nested=True) for c in expr.children)
    return f"({body})" if nested else body


def format_rule(rule: Rule) -> str:
    concl = ", ".join(f"{p} ({format_number(cf)})" for p, cf in rule.conclusions)
    return f"rule {rule.id} {{ if {format_expr(rule.antecedent)} then {concl} }}"


def format_rulebase(rules: Sequence[Rule], facts: Sequence[tuple[str, float]] = ()) -> str:
    """Canonical text, one statement per line; ``parse_rulebase`` inverts it."""
    lines = [format_rule(r) for r in rules]
    lines += [f"fact {p} = {format_number(cf)}" for p, cf in facts]
    return "".join(line + "\n" for line in lines)
