"""Dolev-Yao derivation closures and the induced interpretation of extract."""
from __future__ import annotations

from dataclasses import dataclass
from typing import FrozenSet, Iterable, List, Optional

from .terms import Atom, Diagnostic, EncodingTable, Key, Pairing, self_atom
from .system import InterpretedSystem, Point

STANDARD, NONFORGING = "standard", "nonforging"


@dataclass(frozen=True)
class ClosureSet:
    agent: str
    point: Point
    strings: FrozenSet
    variant: str = STANDARD

    def __contains__(self, s) -> bool:
        return s in self.strings

    def __len__(self):
        return len(self.strings)


def closure(seeds: Iterable, universe: Iterable, table: EncodingTable,
            variant: str = STANDARD, me: Optional[str] = None) -> FrozenSet:
    """Least superset of ``seeds`` closed under the Dolev-Yao rules.

    Pair composition is limited to pairings that exist in ``universe``;
    encryption to entries the run's table declares.
    """
    S = set(seeds)
    pairings = [p for p in universe if isinstance(p, Pairing)]
    entries = list(table.enc_map.items())
    me_atom = Atom(me) if me is not None else None
    changed = True
    while changed:
        changed = False
        todo = [s for s in S if isinstance(s, Pairing)]
        while todo:
            p = todo.pop()
            for c in (p.left, p.right):
                if c not in S:
                    S.add(c)
                    changed = True
                    if isinstance(c, Pairing):
                        todo.append(c)
        for p in pairings:
            if p not in S and p.left in S and p.right in S:
                S.add(p)
                changed = True
        for (s, k), c in entries:
            if c in S and s not in S and self_atom(k.inverse) in S:
                S.add(s)
                changed = True
            if c not in S and self_atom(k) in S:
                if variant == STANDARD:
                    ok = s in S
                else:
                    ok = isinstance(s, Pairing) and s.right == me_atom and s.left in S
                if ok:
                    S.add(c)
                    changed = True
    return frozenset(S)


def seeds(sys: InterpretedSystem, p: Point, i: str) -> set:
    run = sys.run(p.run)
    out = set(run.received(i, p.time))
    out |= run.init[i]
    out |= {Atom(a) for a in sys.agents}
    out |= sys.formula_atoms
    return out


def cancompute(sys: InterpretedSystem, p: Point, i: str, variant: str = STANDARD) -> ClosureSet:
    key = ("cancompute", p, i, variant)
    hit = sys._cache.get(key)
    if hit is None:
        run = sys.run(p.run)
        strings = closure(seeds(sys, p, i), sys.strings, run.table, variant, me=i)
        hit = ClosureSet(i, p, strings, variant)
        sys._cache[key] = hit
    return hit


def extract_dy(sys: InterpretedSystem, p: Point, i: str, m) -> bool:
    return sys.run(p.run).table.encode(m) in cancompute(sys, p, i)


def extract_holds(sys: InterpretedSystem, p: Point, i: str, m) -> bool:
    """Valuation of extract_i(m): a declared override if the run has one for
    this agent, otherwise Dolev-Yao derivability of m's encoding."""
    run = sys.run(p.run)
    enc = run.table.encode(m)  # raises UnknownTerm
    declared = [t for (ag, t) in run.extract if ag == i and t <= p.time]
    if declared:
        t = max(declared)
        return m in run.extract[(i, t)]
    return enc in cancompute(sys, p, i)


def check_honest(sys: InterpretedSystem, i: str, vocabulary=None, l: Optional[int] = None) -> List[Diagnostic]:
    """Violations of the honest-sender condition for agent ``i``.

    For each vocabulary formula F: whenever i first sends a string it knows
    contains F's encoding, i must know with probability 1 that F will hold
    for the next l steps.
    """
    from .evaluator import evaluator_for
    from .syntax import (And, Exists, EncodingEq, Implies, Know, Not, Next, Sent, Substr,
                         Var, conj, future_depth, next_n, print_ban, prob_know)
    from .translate import TranslationParams, translate_formula, translate_message

    l = sys.fresh if l is None else l
    params = TranslationParams(sys.agents, l=l)
    vocab = list(sys.formulas if vocabulary is None else vocabulary)
    ev = evaluator_for(sys)
    diags = []
    s, s2 = Var("s"), Var("s2")
    for F in vocab:
        fm = translate_message(F, params)
        FT = translate_formula(F, params)
        says = Exists("s", And(EncodingEq(fm, s), Exists("s2", And(
            Not(Sent(i, s2)), And(Next(Sent(i, s2)), Know(i, Substr(s, s2)))))))
        believed = prob_know(i, 0, conj([next_n(FT, d) for d in range(l + 1)]))
        depth = future_depth(believed)
        ant_true, ant_err = ev.sat(says)
        con_true, con_err = ev.sat(believed)
        for idx, p in enumerate(ev.points):
            if p.time >= sys.horizon:
                continue  # nothing can be sent after the last round
            bit = 1 << idx
            if ant_err & bit:
                diags.append(Diagnostic("honesty", f"{i} honesty undecidable for "
                                        f"{print_ban(F)} (zero conditioning)", (p,)))
                break
            if not ant_true & bit:
                continue
            if p.time + depth > sys.horizon:
                diags.append(Diagnostic("honesty", f"{i} sends {print_ban(F)} too close to the "
                                        f"horizon to check its belief", (p,)))
                break
            if con_err & bit or not con_true & bit:
                diags.append(Diagnostic("honesty", f"{i} sends {print_ban(F)} without believing "
                                        f"it for the next {l} steps", (p,)))
                break
    return diags
