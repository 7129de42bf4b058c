"""Line-oriented scenario files describing a finite interpreted system.

Example::

    epiban-scenario 1
    name  handshake
    agents a b e
    symkeys kab
    nonces na nb
    term enc((na, a), kab)
    formula a sees na
    horizon 3
    fresh 1
    formula-nesting 3
    dolev-yao a b e
    nonforging a b
    honest a b
    protocol a : kab na
    guesses e : kab

    run r1
      good yes
      enc <'na', 'a'> kab = c1
      init a : kab na
      round 1
        a -> b : [enc((na, a), kab)]
        b <- [enc((na, a), kab)]
      prop 2 : p
    end

    cell c : r1 = 1

Strings are quoted atoms ``'s'``, pairings ``<s, t>`` or ``[term]`` (the
term's encoding in the enclosing run).  ``#`` starts a comment only at the
beginning of a line.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, List, Optional, Tuple

from .syntax import (BanFormula, Encoded, ParseError, _Parser, print_ban, print_core,
                     print_string, print_term)
from .terms import Key

HEADER = "epiban-scenario 1"


@dataclass
class EventSpec:
    agent: str
    kind: str  # "send" | "recv"
    s: object
    peer: Optional[str] = None


@dataclass
class RunSpec:
    id: str
    good: bool = True
    enc: List[Tuple[object, Key, str]] = field(default_factory=list)
    init: Dict[str, list] = field(default_factory=dict)
    rounds: Dict[int, List[EventSpec]] = field(default_factory=dict)
    props: Dict[int, List[str]] = field(default_factory=dict)
    extract: Dict[Tuple[str, int], list] = field(default_factory=dict)

    def send(self, rnd: int, agent: str, peer: str, s):
        self.rounds.setdefault(rnd, []).append(EventSpec(agent, "send", s, peer))

    def recv(self, rnd: int, agent: str, s):
        self.rounds.setdefault(rnd, []).append(EventSpec(agent, "recv", s))

    def deliver(self, rnd: int, sender: str, receiver: str, s):
        self.send(rnd, sender, receiver, s)
        self.recv(rnd, receiver, s)


@dataclass
class ScenarioSpec:
    name: str = "scenario"
    agents: List[str] = field(default_factory=list)
    symkeys: List[str] = field(default_factory=list)
    asymkeys: Dict[str, Optional[str]] = field(default_factory=dict)  # name -> owner
    nonces: List[str] = field(default_factory=list)
    texts: List[str] = field(default_factory=list)
    terms: list = field(default_factory=list)
    formulas: List[BanFormula] = field(default_factory=list)
    core_formulas: list = field(default_factory=list)
    orphans: List[str] = field(default_factory=list)
    horizon: int = 0
    fresh: int = 0
    formula_nesting: int = 3
    dolev_yao: List[str] = field(default_factory=list)
    nonforging: List[str] = field(default_factory=list)
    honest: List[str] = field(default_factory=list)
    protocol: Dict[str, list] = field(default_factory=dict)
    guesses: Dict[str, list] = field(default_factory=dict)
    runs: List[RunSpec] = field(default_factory=list)
    cells: List[Tuple[str, Dict[str, Fraction]]] = field(default_factory=list)


class ScenarioError(ValueError):
    def __init__(self, msg: str, lineno: int = 0):
        super().__init__(f"line {lineno}: {msg}" if lineno else msg)
        self.lineno = lineno


# ----------------------------------------------------------------- parsing

def _items(text: str, lineno: int) -> list:
    """Whitespace-separated terms and string references."""
    p = _Parser(text, ban=True, scenario=True)
    out = []
    try:
        while p.peek()[0] != "eof":
            kind, v, _ = p.peek()
            if kind == "quoted" or (kind == "op" and v in ("<", "[")):
                out.append(p.strexpr())
            else:
                out.append(p.term())
            if p.at(","):
                p.take()
    except ParseError as e:
        raise ScenarioError(str(e), lineno) from None
    return out


def _one(text: str, lineno: int, what: str):
    p = _Parser(text, ban=True, scenario=True)
    try:
        if what == "string":
            x = p.strexpr()
        elif what == "term":
            x = p.term()
        elif what == "key":
            x = p.key_term()
        elif what == "ban":
            x = p.ban_formula()
        else:
            p.ban = False
            x = p.formula()
        p.done()
    except ParseError as e:
        raise ScenarioError(str(e), lineno) from None
    return x


def _split(rest: str, lineno: int) -> Tuple[str, str]:
    if ":" not in rest:
        raise ScenarioError("expected 'agent : ...'", lineno)
    head, tail = rest.split(":", 1)
    return head.strip(), tail.strip()


def _bool(v: str, lineno: int) -> bool:
    if v in ("yes", "true", "1"):
        return True
    if v in ("no", "false", "0"):
        return False
    raise ScenarioError(f"expected yes/no, got {v!r}", lineno)


def parse_scenario(text: str) -> ScenarioSpec:
    lines = text.splitlines()
    spec = ScenarioSpec()
    run: Optional[RunSpec] = None
    rnd: Optional[int] = None
    seen_header = False
    for lineno, raw in enumerate(lines, 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if not seen_header:
            if line != HEADER:
                raise ScenarioError(f"expected header {HEADER!r}", lineno)
            seen_header = True
            continue
        word, _, rest = line.partition(" ")
        rest = rest.strip()
        if run is not None:
            if word == "end":
                spec.runs.append(run)
                run, rnd = None, None
            elif word == "good":
                run.good = _bool(rest, lineno)
            elif word == "enc":
                lhs, _, atom = rest.rpartition("=")
                if not lhs:
                    raise ScenarioError("expected 'enc <string> <key> = <atom>'", lineno)
                p = _Parser(lhs, ban=True, scenario=True)
                try:
                    s = p.strexpr()
                    k = p.key_term()
                    p.done()
                except ParseError as e:
                    raise ScenarioError(str(e), lineno) from None
                run.enc.append((s, k, atom.strip()))
            elif word == "init":
                ag, tail = _split(rest, lineno)
                run.init.setdefault(ag, []).extend(_items(tail, lineno))
            elif word == "round":
                rnd = int(rest)
                run.rounds.setdefault(rnd, [])
            elif word == "prop":
                t, tail = _split(rest, lineno)
                run.props.setdefault(int(t), []).extend(tail.split())
            elif word == "extract":
                head, tail = _split(rest, lineno)
                ag, t = head.split()
                run.extract[(ag, int(t))] = _items(tail, lineno)
            elif rnd is not None and ("->" in line or "<-" in line):
                if "->" in line:
                    ag, tail = line.split("->", 1)
                    peer, s = _split(tail, lineno)
                    run.send(rnd, ag.strip(), peer, _one(s, lineno, "string"))
                else:
                    ag, s = line.split("<-", 1)
                    run.recv(rnd, ag.strip(), _one(s.strip(), lineno, "string"))
            else:
                raise ScenarioError(f"unexpected line in run {run.id!r}", lineno)
            continue
        if word == "name":
            spec.name = rest
        elif word == "agents":
            spec.agents.extend(rest.split())
        elif word == "symkeys":
            spec.symkeys.extend(rest.split())
        elif word == "asymkeys":
            for k in rest.split():
                spec.asymkeys[k] = None
        elif word == "owner":
            k, ag = rest.split()
            spec.asymkeys[k] = ag
        elif word == "nonces":
            spec.nonces.extend(rest.split())
        elif word == "texts":
            spec.texts.extend(rest.split())
        elif word == "orphans":
            spec.orphans.extend(rest.split())
        elif word == "term":
            spec.terms.append(_one(rest, lineno, "term"))
        elif word == "formula":
            spec.formulas.append(_one(rest, lineno, "ban"))
        elif word == "coreformula":
            spec.core_formulas.append(_one(rest, lineno, "core"))
        elif word == "horizon":
            spec.horizon = int(rest)
        elif word == "fresh":
            spec.fresh = int(rest)
        elif word == "formula-nesting":
            spec.formula_nesting = int(rest)
        elif word == "dolev-yao":
            spec.dolev_yao.extend(rest.split())
        elif word == "nonforging":
            spec.nonforging.extend(rest.split())
        elif word == "honest":
            spec.honest.extend(rest.split())
        elif word == "protocol":
            ag, tail = _split(rest, lineno)
            spec.protocol.setdefault(ag, []).extend(_items(tail, lineno))
        elif word == "guesses":
            ag, tail = _split(rest, lineno)
            spec.guesses.setdefault(ag, []).extend(_items(tail, lineno))
        elif word == "run":
            run, rnd = RunSpec(rest), None
        elif word == "cell":
            name, tail = _split(rest, lineno)
            weights: Dict[str, Fraction] = {}
            for part in tail.split(","):
                rid, _, w = part.partition("=")
                try:
                    weights[rid.strip()] = Fraction(w.strip())
                except ValueError:
                    raise ScenarioError(f"bad weight {w.strip()!r}", lineno) from None
            spec.cells.append((name, weights))
        else:
            raise ScenarioError(f"unknown directive {word!r}", lineno)
    if run is not None:
        raise ScenarioError(f"run {run.id!r} is missing 'end'", len(lines))
    if not seen_header:
        raise ScenarioError("empty scenario")
    return spec


def load_scenario(path) -> ScenarioSpec:
    with open(path) as fh:
        return parse_scenario(fh.read())


# ----------------------------------------------------------------- writing

def _item(x) -> str:
    if isinstance(x, (Encoded,)) or type(x).__name__ in ("Atom", "Pairing", "Var"):
        return print_string(x)
    return print_term(x)


def _frac(q: Fraction) -> str:
    return str(q.numerator) if q.denominator == 1 else f"{q.numerator}/{q.denominator}"


def dump_scenario(spec: ScenarioSpec) -> str:
    out = [HEADER, f"name {spec.name}"]

    def words(key, vals):
        if vals:
            out.append(f"{key} {' '.join(vals)}")

    words("agents", spec.agents)
    words("symkeys", spec.symkeys)
    words("asymkeys", list(spec.asymkeys))
    for k, ag in spec.asymkeys.items():
        if ag is not None:
            out.append(f"owner {k} {ag}")
    words("nonces", spec.nonces)
    words("texts", spec.texts)
    words("orphans", spec.orphans)
    out += [f"term {print_term(t)}" for t in spec.terms]
    out += [f"formula {print_ban(f)}" for f in spec.formulas]
    out += [f"coreformula {print_core(f)}" for f in spec.core_formulas]
    out += [f"horizon {spec.horizon}", f"fresh {spec.fresh}"]
    if spec.formula_nesting != ScenarioSpec.formula_nesting:
        out.append(f"formula-nesting {spec.formula_nesting}")
    words("dolev-yao", spec.dolev_yao)
    words("nonforging", spec.nonforging)
    words("honest", spec.honest)
    for ag, items in spec.protocol.items():
        out.append(f"protocol {ag} : {' '.join(_item(x) for x in items)}")
    for ag, items in spec.guesses.items():
        out.append(f"guesses {ag} : {' '.join(_item(x) for x in items)}")
    for run in spec.runs:
        out += ["", f"run {run.id}", f"  good {'yes' if run.good else 'no'}"]
        for s, k, atom in run.enc:
            out.append(f"  enc {print_string(s)} {print_term(k)} = {atom}")
        for ag, items in run.init.items():
            out.append(f"  init {ag} : {' '.join(_item(x) for x in items)}")
        for rnd in sorted(run.rounds):
            out.append(f"  round {rnd}")
            for ev in run.rounds[rnd]:
                if ev.kind == "send":
                    out.append(f"    {ev.agent} -> {ev.peer} : {print_string(ev.s)}")
                else:
                    out.append(f"    {ev.agent} <- {print_string(ev.s)}")
        for t in sorted(run.props):
            out.append(f"  prop {t} : {' '.join(run.props[t])}")
        for (ag, t), items in sorted(run.extract.items()):
            out.append(f"  extract {ag} {t} : {' '.join(_item(x) for x in items)}")
        out.append("end")
    out.append("")
    for name, weights in spec.cells:
        out.append(f"cell {name} : " + ", ".join(f"{r} = {_frac(w)}" for r, w in weights.items()))
    return "\n".join(out) + "\n"
