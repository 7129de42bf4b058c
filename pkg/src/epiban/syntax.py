"""Core-logic and BAN-logic syntax: AST, parser, canonical printer.

Concrete grammar (core)::

    formula  := iff
    iff      := implies ('<=>' implies)*
    implies  := or ('=>' implies)?
    or       := and ('|' and)*
    and      := unary ('&' unary)*
    unary    := '!' unary | 'K[' ag ']' unary | 'K0[' ag ']' unary
              | 'K[' ag ';' num ']' unary | 'P[' ag ']' '>=' num unary
              | 'X' unary | 'Y' unary | 'SY' unary | 'G' unary | 'H' unary
              | '<P>' unary | 'E[' ags ']' unary | 'C[' ags ']' unary
              | 'exists' var '.' unary | atom
    atom     := 'true' | 'false' | 'good' | prop | '(' formula ')'
              | 'sent[' ag '](' str ')' | 'recv[' ag '](' str ')'
              | 'extract[' ag '](' term ')' | '[' term ']' '=' str
              | str '<=' str
    str      := QUOTED | var | '<' str ',' str '>'
    term     := ident | sort ':' ident | 'pub(' ident ')' | 'priv(' ident ')'
              | 'inv(' term ')' | '(' term ',' term ')' | 'enc(' term ',' term ')'
              | '#(' formula ')'

Bare identifiers in term position resolve by prefix: ``k`` symmetric key,
``n`` nonce, ``t`` plaintext, anything else an agent.  The printer falls
back to ``key:``/``nonce:``/``text:``/``agent:`` when the prefix would lie.

BAN::

    ban := ag 'believes' ban | ag 'controls' ban | ag 'sees' msg
         | ag 'said' msg | ag 'key(' term ')' ag | 'pk(' term ')' ag
         | 'fresh(' msg ')' | '(' ban ')'
    msg := term | '{' msg 'from' ag '}' term | '(' msg ',' msg ')' | '#(' ban ')'
"""
from __future__ import annotations

import re
from fractions import Fraction
from functools import lru_cache
from typing import Iterable, List, Optional, Sequence, Tuple

from .terms import (Agent, Atom, ConcreteString, Enc, FormulaMsg, Key, MessageTerm,
                    Nonce, Pair, Pairing, Plaintext, node)


# ------------------------------------------------------------------ AST

class Formula:
    __slots__ = ()


@node
class Top(Formula):
    pass


@node
class Prim(Formula):
    name: str


@node
class Good(Formula):
    pass


@node
class Var:
    name: str

    def __str__(self):
        return self.name


@node
class Sent(Formula):
    agent: str
    s: object


@node
class Received(Formula):
    agent: str
    s: object


@node
class Extract(Formula):
    agent: str
    term: object


@node
class Not(Formula):
    body: Formula


@node
class And(Formula):
    left: Formula
    right: Formula


@node
class Or(Formula):
    left: Formula
    right: Formula


@node
class Implies(Formula):
    left: Formula
    right: Formula


@node
class Iff(Formula):
    left: Formula
    right: Formula


@node
class Know(Formula):
    agent: str
    body: Formula


@node
class Next(Formula):
    body: Formula


@node
class Prev(Formula):
    body: Formula


@node
class Always(Formula):
    body: Formula


@node
class AlwaysPast(Formula):
    body: Formula


@node
class ProbGE(Formula):
    agent: str
    threshold: Fraction
    body: Formula


@node
class Exists(Formula):
    var: str
    body: Formula


@node
class EncodingEq(Formula):
    term: object
    s: object


@node
class Substr(Formula):
    left: object
    right: object


@node
class CGood(Formula):
    group: Tuple[str, ...]
    body: Formula


TRUE = Top()
FALSE = Not(TRUE)
GOOD = Good()
BINARY = (And, Or, Implies, Iff)


# derived operators, expanded at construction time

def prob_know(i: str, alpha, phi: Formula) -> Formula:
    """K_i^alpha: knows that phi has probability at least 1 - alpha."""
    return Know(i, ProbGE(i, 1 - Fraction(alpha), phi))


def sprev(phi: Formula) -> Formula:
    return And(Prev(phi), Not(Prev(FALSE)))


def past_diamond(phi: Formula) -> Formula:
    return Not(AlwaysPast(Not(phi)))


def conj(parts: Sequence[Formula]) -> Formula:
    parts = list(parts)
    if not parts:
        return TRUE
    out = parts[-1]
    for p in reversed(parts[:-1]):
        out = And(p, out)
    return out


def egood(group: Iterable[str], phi: Formula) -> Formula:
    return conj([Know(i, Implies(GOOD, phi)) for i in group])


def next_n(phi: Formula, n: int) -> Formula:
    for _ in range(n):
        phi = Next(phi)
    return phi


def prev_n(phi: Formula, n: int) -> Formula:
    for _ in range(n):
        phi = Prev(phi)
    return phi


# ----------------------------------------------------------------- BAN

class BanFormula:
    __slots__ = ()


@node
class Believes(BanFormula):
    agent: str
    body: BanFormula


@node
class Controls(BanFormula):
    agent: str
    body: BanFormula


@node
class Sees(BanFormula):
    agent: str
    msg: object


@node
class Said(BanFormula):
    agent: str
    msg: object


@node
class SharedKey(BanFormula):
    left: str
    key: Key
    right: str


@node
class PublicKey(BanFormula):
    key: Key
    agent: str


@node
class Fresh(BanFormula):
    msg: object


@node
class EncFrom(MessageTerm):
    body: object
    sender: str
    key: Key


# ------------------------------------------------------- tree utilities

def children(x) -> tuple:
    if isinstance(x, (Not, Know, Next, Prev, Always, AlwaysPast, ProbGE, Exists, CGood,
                      Believes, Controls)):
        return (x.body,)
    if isinstance(x, BINARY):
        return (x.left, x.right)
    if isinstance(x, (Pair, Pairing)):
        return (x.left, x.right)
    if isinstance(x, Enc):
        return (x.body, x.key)
    if isinstance(x, EncFrom):
        return (x.body, Agent(x.sender), x.key)
    if isinstance(x, FormulaMsg):
        return (x.body,)
    if isinstance(x, (Sent, Received)):
        return (x.s,)
    if isinstance(x, Extract):
        return (x.term,)
    if isinstance(x, EncodingEq):
        return (x.term, x.s)
    if isinstance(x, Substr):
        return (x.left, x.right)
    if isinstance(x, (Sees, Said, Fresh)):
        return (x.msg,)
    if isinstance(x, SharedKey):
        return (Agent(x.left), x.key, Agent(x.right))
    if isinstance(x, PublicKey):
        return (x.key, Agent(x.agent))
    return ()


@lru_cache(maxsize=None)
def formula_nesting(x) -> int:
    """How many formula-messages sit inside one another, at most."""
    inner = max((formula_nesting(c) for c in children(x)), default=0)
    return inner + isinstance(x, FormulaMsg)


def node_count(x) -> int:
    """Tree size (shared subtrees counted once per occurrence)."""
    return _node_count(x)


@lru_cache(maxsize=None)
def _node_count(x) -> int:
    return 1 + sum(_node_count(c) for c in children(x))


@lru_cache(maxsize=None)
def free_vars(x) -> frozenset:
    if isinstance(x, Var):
        return frozenset((x.name,))
    if isinstance(x, FormulaMsg):
        return frozenset()
    out = frozenset().union(*(free_vars(c) for c in children(x))) if children(x) else frozenset()
    if isinstance(x, Exists):
        out = out - {x.var}
    return out


@lru_cache(maxsize=None)
def future_depth(phi) -> float:
    """How many steps past the current time evaluating ``phi`` may look."""
    if isinstance(phi, Next):
        return 1 + future_depth(phi.body)
    if isinstance(phi, Prev):
        return max(0, future_depth(phi.body) - 1)
    if isinstance(phi, Always):
        return float("inf") if future_depth(phi.body) > 0 else 0
    if isinstance(phi, Formula):
        kids = [c for c in children(phi) if isinstance(c, Formula)]
        return max((future_depth(c) for c in kids), default=0)
    return 0


# --------------------------------------------------------------- errors

class ParseError(SyntaxError):
    def __init__(self, msg: str, text: str, pos: int):
        line = text.count("\n", 0, pos) + 1
        col = pos - (text.rfind("\n", 0, pos) + 1) + 1
        super().__init__(f"{msg} at line {line}, column {col}")
        self.lineno, self.offset, self.text = line, col, text
        self.line, self.col = line, col

    def __str__(self):
        return self.args[0]


class UnboundVariable(ParseError):
    pass


# -------------------------------------------------------------- lexer

_TOKEN = re.compile(r"""
    (?P<ws>\s+)
  | (?P<quoted>'(?:[^'\\]|\\.)*')
  | (?P<num>\d+(?:/\d+|\.\d+)?)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<op><=>|=>|<=|>=|<P>|[()\[\]{}<>,.;:=!&|\#~])
""", re.VERBOSE)


def tokenize(text: str) -> List[Tuple[str, str, int]]:
    toks = []
    pos = 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m:
            raise ParseError(f"unexpected character {text[pos]!r}", text, pos)
        kind = m.lastgroup
        if kind != "ws":
            toks.append((kind, m.group(), pos))
        pos = m.end()
    toks.append(("eof", "", len(text)))
    return toks


def unquote(tok: str) -> str:
    return re.sub(r"\\(.)", r"\1", tok[1:-1])


def quote(name: str) -> str:
    return "'" + name.replace("\\", "\\\\").replace("'", "\\'") + "'"


CORE_KEYWORDS = {"X", "Y", "SY", "G", "H", "K", "K0", "P", "E", "C", "exists", "true",
                 "false", "good", "sent", "recv", "extract"}
TERM_KEYWORDS = {"pub", "priv", "inv", "enc", "key", "nonce", "text", "agent", "from"}
BAN_KEYWORDS = {"believes", "controls", "sees", "said", "key", "pk", "fresh", "from"}


def resolve_name(name: str):
    """Default sort convention for bare identifiers in term position."""
    if name.startswith("k"):
        return Key(name)
    if name.startswith("n"):
        return Nonce(name)
    if name.startswith("t"):
        return Plaintext(name)
    return Agent(name)


class _Parser:
    def __init__(self, text: str, ban: bool = False, scenario: bool = False):
        self.text = text
        self.toks = tokenize(text)
        self.i = 0
        self.ban = ban
        self.scenario = scenario
        self.bound: List[str] = []

    # token helpers
    def peek(self, k: int = 0):
        return self.toks[min(self.i + k, len(self.toks) - 1)]

    def at(self, value: str, k: int = 0) -> bool:
        kind, v, _ = self.peek(k)
        return v == value and kind in ("op", "ident")

    def take(self):
        t = self.toks[self.i]
        self.i += 1
        return t

    def fail(self, msg: str, tok=None):
        tok = tok or self.peek()
        raise ParseError(f"{msg}, found {tok[1] or 'end of input'!r}", self.text, tok[2])

    def expect(self, value: str):
        if not self.at(value):
            self.fail(f"expected {value!r}")
        return self.take()

    def ident(self) -> str:
        kind, v, _ = self.peek()
        if kind != "ident":
            self.fail("expected identifier")
        self.take()
        return v

    def number(self) -> Fraction:
        kind, v, _ = self.peek()
        if kind != "num":
            self.fail("expected number")
        self.take()
        q = Fraction(v)
        if not 0 <= q <= 1:
            self.fail("probability outside [0, 1]")
        return q

    def done(self):
        if self.peek()[0] != "eof":
            self.fail("unexpected trailing input")

    # ---------------------------------------------------------- core
    def formula(self) -> Formula:
        left = self.implies()
        while self.at("<=>"):
            self.take()
            left = Iff(left, self.implies())
        return left

    def implies(self) -> Formula:
        left = self.disj()
        if self.at("=>"):
            self.take()
            return Implies(left, self.implies())
        return left

    def disj(self) -> Formula:
        left = self.conj()
        while self.at("|"):
            self.take()
            left = Or(left, self.conj())
        return left

    def conj(self) -> Formula:
        left = self.unary()
        while self.at("&"):
            self.take()
            left = And(left, self.unary())
        return left

    def agent_list(self) -> Tuple[str, ...]:
        names = [self.ident()]
        while self.at(","):
            self.take()
            names.append(self.ident())
        return tuple(names)

    def unary(self) -> Formula:
        kind, v, pos = self.peek()
        if v in ("!", "~") and kind == "op":
            self.take()
            return Not(self.unary())
        if v == "<P>":
            self.take()
            return past_diamond(self.unary())
        if kind == "ident" and self.at("[", 1):
            if v == "K":
                self.take(); self.take()
                ag = self.ident()
                if self.at(";"):
                    self.take()
                    alpha = self.number()
                    self.expect("]")
                    return prob_know(ag, alpha, self.unary())
                self.expect("]")
                return Know(ag, self.unary())
            if v == "K0":
                self.take(); self.take()
                ag = self.ident()
                self.expect("]")
                return prob_know(ag, 0, self.unary())
            if v == "P":
                self.take(); self.take()
                ag = self.ident()
                self.expect("]")
                self.expect(">=")
                q = self.number()
                return ProbGE(ag, q, self.unary())
            if v in ("E", "C"):
                self.take(); self.take()
                group = self.agent_list()
                self.expect("]")
                body = self.unary()
                return egood(group, body) if v == "E" else CGood(group, body)
        if kind == "ident" and v in ("X", "Y", "SY", "G", "H") and not self.at("<=", 1):
            self.take()
            body = self.unary()
            return {"X": Next, "Y": Prev, "SY": sprev, "G": Always, "H": AlwaysPast}[v](body)
        if v == "exists" and kind == "ident":
            self.take()
            var = self.ident()
            if var in CORE_KEYWORDS:
                self.fail("reserved word used as variable")
            self.expect(".")
            self.bound.append(var)
            body = self.unary()
            self.bound.pop()
            return Exists(var, body)
        return self.atom()

    def atom(self) -> Formula:
        kind, v, pos = self.peek()
        if kind == "op" and v == "(":
            self.take()
            f = self.formula()
            self.expect(")")
            return f
        if kind == "op" and v == "[":
            self.take()
            t = self.term()
            self.expect("]")
            self.expect("=")
            return EncodingEq(t, self.strexpr())
        if kind == "ident" and v in ("sent", "recv", "extract") and self.at("[", 1):
            self.take(); self.take()
            ag = self.ident()
            self.expect("]")
            self.expect("(")
            arg = self.term() if v == "extract" else self.strexpr()
            self.expect(")")
            return {"sent": Sent, "recv": Received, "extract": Extract}[v](ag, arg)
        if kind == "quoted" or (kind == "op" and v == "<") or (
                kind == "ident" and self.at("<=", 1)):
            left = self.strexpr()
            self.expect("<=")
            return Substr(left, self.strexpr())
        if kind == "ident":
            self.take()
            if v == "true":
                return TRUE
            if v == "false":
                return FALSE
            if v == "good":
                return GOOD
            if v in CORE_KEYWORDS:
                self.fail("misplaced keyword", (kind, v, pos))
            return Prim(v)
        self.fail("expected formula")

    def strexpr(self):
        kind, v, pos = self.peek()
        if kind == "quoted":
            self.take()
            return Atom(unquote(v))
        if kind == "op" and v == "<":
            self.take()
            a = self.strexpr()
            self.expect(",")
            b = self.strexpr()
            self.expect(">")
            return Pairing(a, b)
        if self.scenario and kind == "op" and v == "[":
            self.take()
            t = self.term()
            self.expect("]")
            return Encoded(t)
        if kind == "ident":
            self.take()
            if not self.scenario and v not in self.bound:
                raise UnboundVariable(f"unbound string variable {v!r}", self.text, pos)
            return Var(v)
        self.fail("expected string")

    # ---------------------------------------------------------- terms
    def term(self):
        kind, v, pos = self.peek()
        if kind == "op" and v == "(":
            self.take()
            a = self.term()
            self.expect(",")
            b = self.term()
            self.expect(")")
            return Pair(a, b)
        if kind == "op" and v == "#":
            self.take()
            self.expect("(")
            saved, self.bound = self.bound, []
            body = self.ban_formula() if self.ban else self.formula()
            self.bound = saved
            self.expect(")")
            return body if self.ban else FormulaMsg(body)
        if self.ban and kind == "op" and v == "{":
            self.take()
            body = self.term()
            if not self.at("from"):
                self.fail("expected 'from'")
            self.take()
            sender = self.ident()
            self.expect("}")
            key = self.key_term()
            return EncFrom(body, sender, key)
        if kind != "ident":
            self.fail("expected term")
        if self.at(":", 1) and v in ("key", "nonce", "text", "agent"):
            self.take(); self.take()
            name = self.ident()
            return {"key": Key, "nonce": Nonce, "text": Plaintext, "agent": Agent}[v](name)
        if self.at("(", 1) and v in ("pub", "priv"):
            self.take(); self.take()
            name = self.ident()
            self.expect(")")
            return Key(name, v)
        if self.at("(", 1) and v == "inv":
            self.take(); self.take()
            k = self.term()
            self.expect(")")
            if not isinstance(k, Key):
                self.fail("inv() expects a key")
            return k.inverse
        if self.at("(", 1) and v == "enc":
            self.take(); self.take()
            body = self.term()
            self.expect(",")
            key = self.key_term()
            self.expect(")")
            return Enc(body, key)
        self.take()
        return resolve_name(v)

    def key_term(self) -> Key:
        tok = self.peek()
        k = self.term()
        if not isinstance(k, Key):
            self.fail("expected key", tok)
        return k

    # ------------------------------------------------------------ BAN
    def ban_formula(self) -> BanFormula:
        kind, v, pos = self.peek()
        if kind == "op" and v == "(":
            self.take()
            f = self.ban_formula()
            self.expect(")")
            return f
        if kind == "ident" and v == "pk" and self.at("(", 1):
            self.take(); self.take()
            k = self.key_term()
            self.expect(")")
            return PublicKey(k, self.ident())
        if kind == "ident" and v == "fresh" and self.at("(", 1):
            self.take(); self.take()
            m = self.term()
            self.expect(")")
            return Fresh(m)
        ag = self.ident()
        kind, v, pos = self.peek()
        if v == "believes":
            self.take()
            return Believes(ag, self.ban_formula())
        if v == "controls":
            self.take()
            return Controls(ag, self.ban_formula())
        if v == "sees":
            self.take()
            return Sees(ag, self.term())
        if v == "said":
            self.take()
            return Said(ag, self.term())
        if v == "key" and self.at("(", 1):
            self.take(); self.take()
            k = self.key_term()
            self.expect(")")
            return SharedKey(ag, k, self.ident())
        self.fail("expected BAN operator")


@node
class Encoded:
    """Scenario-only string reference: the encoding of a term in the run."""
    term: object


def parse_core(text: str) -> Formula:
    p = _Parser(text)
    f = p.formula()
    p.done()
    return f


def parse_ban(text: str) -> BanFormula:
    p = _Parser(text, ban=True)
    f = p.ban_formula()
    p.done()
    return f


def parse_term(text: str, ban: bool = False):
    p = _Parser(text, ban=ban)
    t = p.term()
    p.done()
    return t


def parse_string(text: str):
    """A concrete string or scenario string reference (``[term]`` allowed)."""
    p = _Parser(text, scenario=True)
    s = p.strexpr()
    p.done()
    return s


# -------------------------------------------------------------- printer

def _frac(q: Fraction) -> str:
    q = Fraction(q)
    return str(q.numerator) if q.denominator == 1 else f"{q.numerator}/{q.denominator}"


def print_term(t) -> str:
    if isinstance(t, Key):
        if t.kind != "sym":
            return f"{t.kind}({t.name})"
        return t.name if resolve_name(t.name) == t and t.name not in TERM_KEYWORDS else f"key:{t.name}"
    if isinstance(t, (Nonce, Plaintext, Agent)):
        if resolve_name(t.name) == t and t.name not in TERM_KEYWORDS | CORE_KEYWORDS | BAN_KEYWORDS:
            return t.name
        sort = {Nonce: "nonce", Plaintext: "text", Agent: "agent"}[type(t)]
        return f"{sort}:{t.name}"
    if isinstance(t, Pair):
        return f"({print_term(t.left)}, {print_term(t.right)})"
    if isinstance(t, Enc):
        return f"enc({print_term(t.body)}, {print_term(t.key)})"
    if isinstance(t, EncFrom):
        return f"{{{print_term(t.body)} from {t.sender}}}{print_term(t.key)}"
    if isinstance(t, FormulaMsg):
        return f"#({print_core(t.body)})"
    if isinstance(t, BanFormula):
        return f"#({print_ban(t)})"
    raise TypeError(f"not a term: {t!r}")


def print_string(s) -> str:
    if isinstance(s, Atom):
        return quote(s.name)
    if isinstance(s, Pairing):
        return f"<{print_string(s.left)}, {print_string(s.right)}>"
    if isinstance(s, Var):
        return s.name
    if isinstance(s, Encoded):
        return f"[{print_term(s.term)}]"
    raise TypeError(f"not a string: {s!r}")


_BIN_OPS = {And: "&", Or: "|", Implies: "=>", Iff: "<=>"}


def _operand(phi) -> str:
    text = print_core(phi)
    return f"({text})" if isinstance(phi, BINARY) else text


def print_core(phi: Formula) -> str:
    if phi == FALSE:
        return "false"
    if isinstance(phi, Top):
        return "true"
    if isinstance(phi, Good):
        return "good"
    if isinstance(phi, Prim):
        return phi.name
    if isinstance(phi, Sent):
        return f"sent[{phi.agent}]({print_string(phi.s)})"
    if isinstance(phi, Received):
        return f"recv[{phi.agent}]({print_string(phi.s)})"
    if isinstance(phi, Extract):
        return f"extract[{phi.agent}]({print_term(phi.term)})"
    if isinstance(phi, Not):
        return "!" + _operand(phi.body)
    if isinstance(phi, BINARY):
        return f"{_operand(phi.left)} {_BIN_OPS[type(phi)]} {_operand(phi.right)}"
    if isinstance(phi, Know):
        return f"K[{phi.agent}]({print_core(phi.body)})"
    if isinstance(phi, ProbGE):
        return f"P[{phi.agent}]>={_frac(phi.threshold)}({print_core(phi.body)})"
    if isinstance(phi, (Next, Prev, Always, AlwaysPast)):
        op = {Next: "X", Prev: "Y", Always: "G", AlwaysPast: "H"}[type(phi)]
        return f"{op}({print_core(phi.body)})"
    if isinstance(phi, Exists):
        return f"exists {phi.var}.({print_core(phi.body)})"
    if isinstance(phi, EncodingEq):
        return f"[{print_term(phi.term)}] = {print_string(phi.s)}"
    if isinstance(phi, Substr):
        return f"{print_string(phi.left)} <= {print_string(phi.right)}"
    if isinstance(phi, CGood):
        return f"C[{','.join(phi.group)}]({print_core(phi.body)})"
    raise TypeError(f"not a formula: {phi!r}")


def print_ban(f: BanFormula) -> str:
    if isinstance(f, Believes):
        return f"{f.agent} believes {print_ban(f.body)}"
    if isinstance(f, Controls):
        return f"{f.agent} controls {print_ban(f.body)}"
    if isinstance(f, Sees):
        return f"{f.agent} sees {print_term(f.msg)}"
    if isinstance(f, Said):
        return f"{f.agent} said {print_term(f.msg)}"
    if isinstance(f, SharedKey):
        return f"{f.left} key({print_term(f.key)}) {f.right}"
    if isinstance(f, PublicKey):
        return f"pk({print_term(f.key)}) {f.agent}"
    if isinstance(f, Fresh):
        return f"fresh({print_term(f.msg)})"
    raise TypeError(f"not a BAN formula: {f!r}")


def print_canonical(x) -> str:
    if isinstance(x, BanFormula):
        return print_ban(x)
    return print_core(x)
