"""Formulas and questions of a small function-free logic.

Surface syntax::

    formula  := disj
    disj     := conj ("|" conj)*
    conj     := lit ("&" lit)*
    lit      := "~" lit | "(" formula ")" | atom
    atom     := IDENT [ "(" term ("," term)* ")" ]
    question := "?" formula | "?" VAR ["open"] ":" formula

Identifiers match ``[a-z][a-z0-9_]*``.  The single letters x, y, z, u, v, w
are variables; every other identifier in term position is a constant.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Iterator, Mapping, Union

VARIABLES = frozenset("xyzuvw")
_IDENT = re.compile(r"[a-z][a-z0-9_]*")


class ParseError(SyntaxError):
    """Malformed source text; ``offset`` is the 1-based character position."""

    def __init__(self, message: str, text: str, offset: int):
        super().__init__(f"{message} at offset {offset}")
        self.msg = message
        self.text = text
        self.offset = offset


class VariableNotInBody(ValueError):
    pass


def _cached_hash(self) -> int:
    # formulas are hashed constantly during proof search; compute once
    try:
        return self.__dict__["_hash"]
    except KeyError:
        h = hash((type(self).__name__, *(getattr(self, f) for f in self.__dataclass_fields__)))
        object.__setattr__(self, "_hash", h)
        return h


@dataclass(frozen=True)
class Term:
    __hash__ = _cached_hash
    name: str

    def __post_init__(self):
        if not _IDENT.fullmatch(self.name):
            raise ValueError(f"bad term name {self.name!r}")

    @property
    def kind(self) -> str:
        return "variable" if self.name in VARIABLES else "constant"

    @property
    def is_variable(self) -> bool:
        return self.name in VARIABLES

    def __str__(self):
        return self.name


@dataclass(frozen=True)
class Atom:
    __hash__ = _cached_hash
    predicate: str
    args: tuple[Term, ...] = ()

    def __str__(self):
        return unparse(self)


@dataclass(frozen=True)
class Not:
    __hash__ = _cached_hash
    body: "Formula"

    def __str__(self):
        return unparse(self)


@dataclass(frozen=True)
class And:
    __hash__ = _cached_hash
    left: "Formula"
    right: "Formula"

    def __str__(self):
        return unparse(self)


@dataclass(frozen=True)
class Or:
    __hash__ = _cached_hash
    left: "Formula"
    right: "Formula"

    def __str__(self):
        return unparse(self)


Formula = Union[Atom, Not, And, Or]


@dataclass(frozen=True)
class Polar:
    __hash__ = _cached_hash
    body: Formula

    def __str__(self):
        return unparse(self)


@dataclass(frozen=True)
class Wh:
    __hash__ = _cached_hash
    variable: Term
    body: Formula
    domain: str = "closed"

    def __post_init__(self):
        if self.domain not in ("closed", "open"):
            raise ValueError(f"unknown wh domain {self.domain!r}")
        if not self.variable.is_variable:
            raise ValueError(f"{self.variable} is not a variable")
        if self.variable not in variables(self.body):
            raise VariableNotInBody(f"{self.variable} does not occur in {unparse(self.body)}")

    def __str__(self):
        return unparse(self)


Question = Union[Polar, Wh]


def atom(predicate: str, *args: str) -> Atom:
    return Atom(predicate, tuple(Term(a) for a in args))


# -- tokenizer ---------------------------------------------------------------

_TOKEN = re.compile(r"\s*(?:(?P<ident>[a-z][a-z0-9_]*)|(?P<arrow>->)|(?P<punct>[()~&|,?:]))")


@dataclass(frozen=True)
class _Tok:
    kind: str  # "ident", "->" or the punctuation character
    text: str
    offset: int  # 1-based


def _tokenize(src: str) -> list[_Tok]:
    toks = []
    pos = 0
    n = len(src)
    while pos < n:
        m = _TOKEN.match(src, pos)
        if m is None or m.end() == pos:
            # skip trailing whitespace
            rest = src[pos:]
            stripped = rest.lstrip()
            if not stripped:
                break
            bad = pos + (len(rest) - len(stripped))
            raise ParseError(f"unexpected character {src[bad]!r}", src, bad + 1)
        if m.group("ident") is not None:
            toks.append(_Tok("ident", m.group("ident"), m.start("ident") + 1))
        elif m.group("arrow") is not None:
            toks.append(_Tok("->", "->", m.start("arrow") + 1))
        else:
            c = m.group("punct")
            toks.append(_Tok(c, c, m.start("punct") + 1))
        pos = m.end()
    return toks


class _Parser:
    def __init__(self, src: str):
        self.src = src
        self.toks = _tokenize(src)
        self.i = 0

    def peek(self, k: int = 0) -> _Tok | None:
        j = self.i + k
        return self.toks[j] if j < len(self.toks) else None

    def error(self, message: str) -> ParseError:
        tok = self.peek()
        offset = tok.offset if tok else len(self.src) + 1
        return ParseError(message, self.src, offset)

    def expect(self, kind: str) -> _Tok:
        tok = self.peek()
        if tok is None or tok.kind != kind:
            found = "end of input" if tok is None else repr(tok.text)
            raise self.error(f"expected {kind!r}, found {found}")
        self.i += 1
        return tok

    def at(self, kind: str) -> bool:
        tok = self.peek()
        return tok is not None and tok.kind == kind

    def done(self):
        if self.peek() is not None:
            raise self.error(f"unexpected {self.peek().text!r}")

    def formula(self) -> Formula:
        f = self.conj()
        while self.at("|"):
            self.i += 1
            f = Or(f, self.conj())
        return f

    def conj(self) -> Formula:
        f = self.lit()
        while self.at("&"):
            self.i += 1
            f = And(f, self.lit())
        return f

    def lit(self) -> Formula:
        if self.at("~"):
            self.i += 1
            return Not(self.lit())
        if self.at("("):
            self.i += 1
            f = self.formula()
            self.expect(")")
            return f
        return self.atom()

    def atom(self) -> Atom:
        pred = self.expect("ident").text
        args = []
        if self.at("("):
            self.i += 1
            args.append(Term(self.expect("ident").text))
            while self.at(","):
                self.i += 1
                args.append(Term(self.expect("ident").text))
            self.expect(")")
        return Atom(pred, tuple(args))

    def question(self) -> Question:
        self.expect("?")
        t0, t1, t2 = self.peek(), self.peek(1), self.peek(2)
        if t0 is not None and t0.kind == "ident" and t0.text in VARIABLES:
            domain = None
            if t1 is not None and t1.kind == ":":
                domain, skip = "closed", 2
            elif (t1 is not None and t1.kind == "ident" and t1.text == "open"
                  and t2 is not None and t2.kind == ":"):
                domain, skip = "open", 3
            if domain is not None:
                self.i += skip
                body = self.formula()
                return Wh(Term(t0.text), body, domain)
        return Polar(self.formula())


def parse_formula(src: str) -> Formula:
    if not src or not src.strip():
        raise ParseError("empty formula", src or "", 1)
    p = _Parser(src)
    f = p.formula()
    p.done()
    return f


def parse_question(src: str) -> Question:
    if not src or not src.strip():
        raise ParseError("empty question", src or "", 1)
    p = _Parser(src)
    q = p.question()
    p.done()
    return q


def parse_rule(src: str) -> tuple[tuple[Formula, ...], Formula]:
    """Parse ``lit & lit & ... -> lit`` into (body literals, head literal)."""
    p = _Parser(src)
    body = [p.lit()]
    while p.at("&"):
        p.i += 1
        body.append(p.lit())
    p.expect("->")
    head = p.lit()
    p.done()
    for lit in (*body, head):
        if not is_literal(lit):
            raise ParseError(f"{unparse(lit)} is not a literal", src, 1)
    return tuple(body), head


# -- printing ------------------------------------------------------------------

def _prec(f: Formula) -> int:
    if isinstance(f, Or):
        return 1
    if isinstance(f, And):
        return 2
    return 3


def _fmt(f: Formula) -> str:
    if isinstance(f, Atom):
        if not f.args:
            return f.predicate
        return f"{f.predicate}({','.join(t.name for t in f.args)})"
    if isinstance(f, Not):
        inner = _fmt(f.body)
        return "~" + (inner if _prec(f.body) == 3 else f"({inner})")
    op = " & " if isinstance(f, And) else " | "
    p = _prec(f)
    left = _fmt(f.left)
    right = _fmt(f.right)
    if _prec(f.left) < p:
        left = f"({left})"
    # left-associative: an equal-precedence right operand needs parentheses
    if _prec(f.right) <= p:
        right = f"({right})"
    return left + op + right


def unparse(v: Formula | Question) -> str:
    """Canonical source text for a formula or question."""
    if isinstance(v, Polar):
        return "? " + _fmt(v.body)
    if isinstance(v, Wh):
        marker = " open" if v.domain == "open" else ""
        return f"?{v.variable.name}{marker}: {_fmt(v.body)}"
    return _fmt(v)


def wrapped(f: Formula) -> str:
    """Like :func:`unparse` but parenthesizes binary compounds."""
    s = unparse(f)
    return f"({s})" if isinstance(f, (And, Or)) else s


# -- structural helpers --------------------------------------------------------

def substitute(f: Formula, var: Term, c: Term) -> Formula:
    if isinstance(f, Atom):
        if var not in f.args:
            return f
        return Atom(f.predicate, tuple(c if t == var else t for t in f.args))
    if isinstance(f, Not):
        return Not(substitute(f.body, var, c))
    return type(f)(substitute(f.left, var, c), substitute(f.right, var, c))


def bind(f: Formula, binding: Mapping[Term, Term]) -> Formula:
    if not binding:
        return f
    if isinstance(f, Atom):
        return Atom(f.predicate, tuple(binding.get(t, t) for t in f.args))
    if isinstance(f, Not):
        return Not(bind(f.body, binding))
    return type(f)(bind(f.left, binding), bind(f.right, binding))


def iter_atoms(f: Formula) -> Iterator[Atom]:
    if isinstance(f, Atom):
        yield f
    elif isinstance(f, Not):
        yield from iter_atoms(f.body)
    else:
        yield from iter_atoms(f.left)
        yield from iter_atoms(f.right)


def atoms(f: Formula) -> list[Atom]:
    """Distinct atoms of ``f`` in first-occurrence order."""
    return list(dict.fromkeys(iter_atoms(f)))


def variables(f: Formula) -> set[Term]:
    return {t for a in iter_atoms(f) for t in a.args if t.is_variable}


def constants(f: Formula) -> set[Term]:
    return {t for a in iter_atoms(f) for t in a.args if not t.is_variable}


def is_ground(f: Formula) -> bool:
    return not variables(f)


def is_literal(f: Formula) -> bool:
    return isinstance(f, Atom) or (isinstance(f, Not) and isinstance(f.body, Atom))


def complement(f: Formula) -> Formula:
    """Negation of ``f`` with a single double negation cancelled."""
    return f.body if isinstance(f, Not) else Not(f)


def evaluate(f: Formula, world: Mapping[Atom, bool]) -> bool:
    if isinstance(f, Atom):
        return world[f]
    if isinstance(f, Not):
        return not evaluate(f.body, world)
    if isinstance(f, And):
        return evaluate(f.left, world) and evaluate(f.right, world)
    return evaluate(f.left, world) or evaluate(f.right, world)


def match_instance(pattern: Formula, f: Formula, var: Term) -> Term | None:
    """Return c when ``f == pattern[var := c]`` for some constant c."""
    found: list[Term] = []

    def walk(p, g) -> bool:
        if isinstance(p, Atom):
            if not isinstance(g, Atom) or p.predicate != g.predicate or len(p.args) != len(g.args):
                return False
            for a, b in zip(p.args, g.args):
                if a == var:
                    if b.is_variable or (found and found[0] != b):
                        return False
                    if not found:
                        found.append(b)
                elif a != b:
                    return False
            return True
        if type(p) is not type(g):
            return False
        if isinstance(p, Not):
            return walk(p.body, g.body)
        return walk(p.left, g.left) and walk(p.right, g.right)

    if walk(pattern, f) and found:
        return found[0]
    return None
