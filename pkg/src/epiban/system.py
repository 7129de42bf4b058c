"""Finite interpreted probabilistic systems with synchronous perfect recall."""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Dict, FrozenSet, List, NamedTuple, Optional, Tuple

from .scenario import ScenarioSpec
from .syntax import BanFormula, Encoded, Var, formula_nesting
from .terms import (Agent, Atom, ConcreteString, EncodingTable, FormulaMsg, Key, Nonce, Pair,
                    Pairing, Plaintext, UnknownTerm, self_atom, string_closure, subterms)
from .translate import TranslationParams, translate_message


class BuildError(ValueError):
    pass


class ZeroConditioning(ArithmeticError):
    pass


@dataclass(frozen=True)
class SendTo:
    recipient: str
    s: object


@dataclass(frozen=True)
class Recv:
    s: object


class Point(NamedTuple):
    run: str
    time: int

    def __str__(self):
        return f"({self.run}, {self.time})"


@dataclass(frozen=True)
class LocalState:
    init: FrozenSet
    history: Tuple[FrozenSet, ...]

    @property
    def time(self) -> int:
        return len(self.history)


class Run:
    def __init__(self, id: str, good: bool, table: EncodingTable, init: Dict[str, FrozenSet],
                 rounds: Dict[str, Tuple[FrozenSet, ...]], props: Tuple[FrozenSet, ...],
                 extract: Optional[Dict[Tuple[str, int], FrozenSet]] = None):
        self.id = id
        self.good = good
        self.table = table
        self.init = init
        self.rounds = rounds
        self.props = props
        self.extract = extract or {}
        self._local: Dict = {}

    @property
    def horizon(self) -> int:
        return len(self.props) - 1

    def local_state(self, agent: str, m: int) -> LocalState:
        key = (agent, m)
        st = self._local.get(key)
        if st is None:
            st = LocalState(self.init[agent], self.rounds[agent][:m])
            self._local[key] = st
        return st

    def events(self, agent: str, m: int):
        """All events of ``agent`` in rounds 1..m."""
        for rnd in self.rounds[agent][:m]:
            yield from rnd

    def received(self, agent: str, m: int) -> set:
        return {e.s for e in self.events(agent, m) if isinstance(e, Recv)}

    def sent(self, agent: str, m: int) -> set:
        return {e.s for e in self.events(agent, m) if isinstance(e, SendTo)}

    def __repr__(self):
        return f"Run({self.id!r}, good={self.good})"


@dataclass(frozen=True)
class Cell:
    name: str
    weights: Dict[str, Fraction]

    def __hash__(self):
        return hash(self.name)


class InterpretedSystem:
    def __init__(self, *, name, agents, runs, horizon, fresh, cells, terms, strings,
                 formula_atoms, formulas, dolev_yao, nonforging, honest, protocol, guesses,
                 key_owner, keys):
        self.name = name
        self.agents: Tuple[str, ...] = tuple(agents)
        self.runs: Tuple[Run, ...] = tuple(sorted(runs, key=lambda r: r.id))
        self.run_by_id: Dict[str, Run] = {r.id: r for r in self.runs}
        self.horizon: int = horizon
        self.fresh: int = fresh
        self.cells: Tuple[Cell, ...] = tuple(cells)
        self.cell_of: Dict[str, Cell] = {r: c for c in self.cells for r in c.weights}
        self.terms: FrozenSet = frozenset(terms)
        self.strings: Tuple = tuple(sorted(strings, key=repr))
        self.formula_atoms: FrozenSet = frozenset(formula_atoms)
        self.formulas: Tuple[BanFormula, ...] = tuple(formulas)
        self.dolev_yao = frozenset(dolev_yao)
        self.nonforging = frozenset(nonforging)
        self.honest = frozenset(honest)
        self.protocol: Dict[str, FrozenSet] = protocol
        self.guesses: Dict[str, FrozenSet] = guesses
        self.key_owner: Dict[str, Optional[str]] = key_owner
        self.keys: Tuple[Key, ...] = tuple(keys)
        self._cache: Dict = {}

    @property
    def params(self) -> TranslationParams:
        return TranslationParams(self.agents, l=self.fresh)

    def points(self) -> List[Point]:
        return [Point(r.id, m) for r in self.runs for m in range(self.horizon + 1)]

    def run(self, rid: str) -> Run:
        return self.run_by_id[rid]

    def local_state(self, p: Point, agent: str) -> LocalState:
        return self.run_by_id[p.run].local_state(agent, p.time)

    def weight(self, rid: str) -> Fraction:
        return self.cell_of[rid].weights[rid]

    def __repr__(self):
        return f"InterpretedSystem({self.name!r}, runs={len(self.runs)}, T={self.horizon})"


def indistinguishable(sys: InterpretedSystem, p1: Point, p2: Point, i: str) -> bool:
    return sys.local_state(p1, i) == sys.local_state(p2, i)


def conditioning_runs(sys: InterpretedSystem, p: Point, i: str) -> List[str]:
    """Runs r' of p's cell with (r', m) indistinguishable from p for i."""
    cell = sys.cell_of[p.run]
    mine = sys.local_state(p, i)
    return [r for r in sorted(cell.weights)
            if sys.run_by_id[r].local_state(i, p.time) == mine]


def point_measure(sys: InterpretedSystem, p: Point, i: str) -> Dict[Point, Fraction]:
    cell = sys.cell_of[p.run]
    runs = conditioning_runs(sys, p, i)
    total = sum((cell.weights[r] for r in runs), Fraction(0))
    if total == 0:
        raise ZeroConditioning(f"agent {i} conditions on a null set at {p}")
    return {Point(r, p.time): cell.weights[r] / total for r in runs}


# --------------------------------------------------------------- building

def _base_terms(spec: ScenarioSpec) -> Dict[str, object]:
    seen: Dict[str, object] = {}
    decls = ([(a, Agent(a)) for a in spec.agents] + [(k, Key(k)) for k in spec.symkeys]
             + [(n, Nonce(n)) for n in spec.nonces] + [(t, Plaintext(t)) for t in spec.texts])
    for name, t in decls:
        if name in seen or name in spec.asymkeys:
            raise BuildError(f"identifier {name!r} declared twice (sorts must be disjoint)")
        seen[name] = t
    return seen


def build_system(spec: ScenarioSpec) -> InterpretedSystem:
    base = _base_terms(spec)
    base_set = set(base.values())
    for k in spec.asymkeys:
        base_set |= {Key(k, "pub"), Key(k, "priv")}
    if not spec.agents:
        raise BuildError("no agents declared")
    params = TranslationParams(spec.agents, l=spec.fresh)
    T = spec.horizon
    if T < 0:
        raise BuildError("horizon must be >= 0")

    def check_term(t, where):
        for sub in subterms(t):
            if isinstance(sub, (Agent, Key, Nonce, Plaintext)) and sub not in base_set:
                raise BuildError(f"{where}: undeclared {type(sub).__name__.lower()} {sub.label if isinstance(sub, Key) else sub.name!r}")
        return t

    universe = set(base_set)
    formula_terms = [FormulaMsg(translate_message(f, params).body) for f in spec.formulas]
    formula_terms += [FormulaMsg(f) for f in spec.core_formulas]
    universe.update(formula_terms)
    for t in spec.terms:
        universe.update(subterms(check_term(translate_message(t, params), "term")))
    deep = [t for t in universe if formula_nesting(t) > spec.formula_nesting]
    if deep:
        raise BuildError(f"formula-message nested {formula_nesting(deep[0])} deep; "
                         f"the limit is {spec.formula_nesting} (see formula-nesting)")
    formula_atoms = {self_atom(f) for f in formula_terms}
    orphans = {Atom(o) for o in spec.orphans}

    def tr(t, where):
        if isinstance(t, (Atom, Pairing)):
            return t
        return check_term(translate_message(t, params), where)

    # pass 1: tables
    tables: Dict[str, EncodingTable] = {}
    for rs in spec.runs:
        if rs.id in tables:
            raise BuildError(f"run {rs.id!r} declared twice")
        overrides: Dict = {}
        for s, k, atom in rs.enc:
            if k not in base_set:
                raise BuildError(f"run {rs.id}: undeclared key {k.label!r}")
            src = _resolve(s, lambda t: EncodingTable.build([tr(t, f"run {rs.id}")], overrides)
                           .encode(tr(t, f"run {rs.id}")), rs.id)
            overrides[(src, k)] = Atom(atom)
        tables[rs.id] = EncodingTable.build(sorted(universe, key=repr), overrides)

    strings = set(orphans) | formula_atoms
    for tab in tables.values():
        strings |= tab.strings()
    strings = set(string_closure(strings))

    def resolve(s, rid, where):
        tab = tables[rid]

        def enc_term(t):
            try:
                return tab.encode(tr(t, where))
            except UnknownTerm:
                raise BuildError(f"{where}: term {t!r} is outside the declared universe") from None

        out = _resolve(s, enc_term, rid)
        if out not in strings:
            raise BuildError(f"{where}: undeclared string {out}")
        return out

    runs = []
    for rs in spec.runs:
        where = f"run {rs.id}"
        tab = tables[rs.id]
        init = {}
        for ag in spec.agents:
            items = rs.init.get(ag, [])
            init[ag] = frozenset(resolve(_as_ref(x), rs.id, f"{where} init {ag}") for x in items)
        for ag in rs.init:
            if ag not in spec.agents:
                raise BuildError(f"{where}: init for undeclared agent {ag!r}")
        per_agent: Dict[str, List[set]] = {ag: [set() for _ in range(T)] for ag in spec.agents}
        for rnd, evs in rs.rounds.items():
            if not 1 <= rnd <= T:
                raise BuildError(f"{where}: round {rnd} outside horizon {T}")
            for ev in evs:
                if ev.agent not in per_agent:
                    raise BuildError(f"{where}: event for undeclared agent {ev.agent!r}")
                s = resolve(ev.s, rs.id, f"{where} round {rnd}")
                if ev.kind == "send":
                    if ev.peer not in per_agent:
                        raise BuildError(f"{where}: send to undeclared agent {ev.peer!r}")
                    per_agent[ev.agent][rnd - 1].add(SendTo(ev.peer, s))
                else:
                    per_agent[ev.agent][rnd - 1].add(Recv(s))
        rounds = {ag: tuple(frozenset(x) for x in evs) for ag, evs in per_agent.items()}
        props = [set() for _ in range(T + 1)]
        for t, names in rs.props.items():
            if not 0 <= t <= T:
                raise BuildError(f"{where}: prop at time {t} outside horizon")
            props[t].update(names)
        extract = {}
        for (ag, t), items in rs.extract.items():
            terms = frozenset(tr(x, where) for x in items)
            for x in terms:
                tab.encode(x)
            extract[(ag, t)] = terms
        runs.append(Run(rs.id, rs.good, tab, init, rounds, tuple(frozenset(p) for p in props),
                        extract))

    run_ids = {r.id for r in runs}
    cells = []
    covered: Dict[str, str] = {}
    for name, weights in spec.cells:
        for rid, w in weights.items():
            if rid not in run_ids:
                raise BuildError(f"cell {name}: unknown run {rid!r}")
            if rid in covered:
                raise BuildError(f"run {rid!r} is in cells {covered[rid]!r} and {name!r}")
            if w < 0:
                raise BuildError(f"cell {name}: negative weight for {rid!r}")
            covered[rid] = name
        total = sum(weights.values(), Fraction(0))
        if total != 1:
            raise BuildError(f"cell {name}: weights sum to {total}, not 1")
        cells.append(Cell(name, dict(weights)))
    missing = run_ids - set(covered)
    if missing:
        raise BuildError(f"runs {sorted(missing)} belong to no cell")

    def agent_items(d, where):
        out = {}
        for ag, items in d.items():
            if ag not in spec.agents:
                raise BuildError(f"{where}: undeclared agent {ag!r}")
            strs = set()
            for x in items:
                ref = _as_ref(x)
                if isinstance(ref, Encoded):
                    t = tr(ref.term, where)
                    strs.add(self_atom(t) if not isinstance(t, Pair) else None)
                else:
                    strs.add(ref)
            out[ag] = frozenset(s for s in strs if s is not None)
        return out

    for cls_name, members in (("dolev-yao", spec.dolev_yao), ("nonforging", spec.nonforging),
                              ("honest", spec.honest)):
        for ag in members:
            if ag not in spec.agents:
                raise BuildError(f"{cls_name}: undeclared agent {ag!r}")
    for k, owner in spec.asymkeys.items():
        if owner is not None and owner not in spec.agents:
            raise BuildError(f"owner of {k}: undeclared agent {owner!r}")
    keys = [Key(k) for k in spec.symkeys]
    for k in spec.asymkeys:
        keys += [Key(k, "pub"), Key(k, "priv")]
    return InterpretedSystem(
        name=spec.name, agents=spec.agents, runs=runs, horizon=T, fresh=spec.fresh,
        cells=cells, terms=universe, strings=strings, formula_atoms=formula_atoms,
        formulas=list(spec.formulas), dolev_yao=spec.dolev_yao, nonforging=spec.nonforging,
        honest=spec.honest, protocol=agent_items(spec.protocol, "protocol"),
        guesses=agent_items(spec.guesses, "guesses"), key_owner=dict(spec.asymkeys), keys=keys)


def _as_ref(x):
    if isinstance(x, (Atom, Pairing, Encoded, Var)):
        return x
    return Encoded(x)


def _resolve(s, enc_term, where):
    if isinstance(s, Encoded):
        return enc_term(s.term)
    if isinstance(s, Pairing):
        return Pairing(_resolve(s.left, enc_term, where), _resolve(s.right, enc_term, where))
    if isinstance(s, Atom):
        return s
    if isinstance(s, Var):
        raise BuildError(f"run {where}: variable {s.name!r} in a concrete string")
    return enc_term(s)
