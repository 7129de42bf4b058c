"""Hypotheses a system must meet before the rule translations are checked.

Codes:

* ``H0``  every received string was sent by someone no later than that round
* ``H1``  initial states hold public keys, own private keys, protocol items
  and a subset of declared guesses, and nothing else
* ``H2``  newly sent strings are derivable (nonforging derivation for
  nonforging agents)
* ``H3``  encryption-knowledge assumptions (a) and (b) across
  indistinguishable points
* ``H4``  the system maintains goodness
* ``H5``  declared extract overrides agree with Dolev-Yao derivability
* ``honesty``  honest agents are nonforging and send only believed formulas
* ``encoding``  a run's table is incoherent
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, List, Optional

from .dolevyao import NONFORGING, STANDARD, cancompute, check_honest, extract_dy, extract_holds
from .evaluator import evaluator_for
from .syntax import GOOD, Implies, Not, prob_know
from .system import InterpretedSystem, Point, Recv, SendTo
from .terms import Atom, Diagnostic, Key, self_atom, validate_encoding

HYPOTHESES = ("H0", "H1", "H2", "H3", "H4", "H5", "honesty", "encoding")


def _first_by_round(run, agent, kind):
    """string -> first round in which ``agent`` had an event of ``kind`` with it."""
    out: Dict = {}
    for rnd, evs in enumerate(run.rounds[agent], 1):
        for e in evs:
            if isinstance(e, kind) and e.s not in out:
                out[e.s] = rnd
    return out


def check_channel(sys: InterpretedSystem) -> List[Diagnostic]:
    diags = []
    for r in sys.runs:
        sent: Dict = {}
        for ag in sys.agents:
            for s, rnd in _first_by_round(r, ag, SendTo).items():
                sent[s] = min(rnd, sent.get(s, rnd))
        for ag in sys.agents:
            for rnd, evs in enumerate(r.rounds[ag], 1):
                for e in sorted((e for e in evs if isinstance(e, Recv)), key=repr):
                    if sent.get(e.s, rnd + 1) > rnd:
                        diags.append(Diagnostic("H0", f"{ag} receives {e.s} in round {rnd} of "
                                                f"{r.id} but nobody sent it by then",
                                                (Point(r.id, rnd),)))
    return diags


def check_init(sys: InterpretedSystem) -> List[Diagnostic]:
    pubs = {self_atom(Key(k, "pub")) for k in sys.key_owner}
    diags = []
    for ag in sys.agents:
        own = {self_atom(Key(k, "priv")) for k, o in sys.key_owner.items() if o == ag}
        required = pubs | own | set(sys.protocol.get(ag, ()))
        allowed = required | set(sys.guesses.get(ag, ()))
        for r in sys.runs:
            init = r.init[ag]
            for s in sorted(required - init, key=repr):
                diags.append(Diagnostic("H1", f"{ag}'s initial state in {r.id} lacks {s}",
                                        (Point(r.id, 0),)))
            for s in sorted(init - allowed, key=repr):
                what = "another agent's private key" if (
                    isinstance(s, Atom) and s.name.startswith("priv(")) else "undeclared prior information"
                diags.append(Diagnostic("H1", f"{ag}'s initial state in {r.id} holds {s} "
                                        f"({what})", (Point(r.id, 0),)))
    return diags


def check_sends(sys: InterpretedSystem) -> List[Diagnostic]:
    diags = []
    for ag in sys.agents:
        if ag not in sys.dolev_yao and ag not in sys.nonforging:
            continue
        variant = NONFORGING if ag in sys.nonforging else STANDARD
        for r in sys.runs:
            for s, rnd in sorted(_first_by_round(r, ag, SendTo).items(), key=lambda x: (x[1], repr(x[0]))):
                if s not in cancompute(sys, Point(r.id, rnd - 1), ag, variant):
                    diags.append(Diagnostic("H2", f"{ag} sends {s} in round {rnd} of {r.id} "
                                            f"without being able to compute it ({variant})",
                                            (Point(r.id, rnd - 1),)))
    return diags


def encryption_mismatches(sys: InterpretedSystem, i: str, p: Point, q: Point) -> List:
    """(s, k) entries on which assumptions (a)/(b) fail for p ~_i q."""
    tr, tq = sys.run(p.run).table, sys.run(q.run).table
    if tr.enc_map == tq.enc_map:
        return []
    S = cancompute(sys, p, i)
    bad = []
    for (s, k) in sorted(set(tr.enc_map) | set(tq.enc_map), key=repr):
        c = tr.enc_map.get((s, k))
        a = c is not None and c in S and self_atom(k.inverse) in S
        b = s in S and self_atom(k) in S
        if (a or b) and c != tq.enc_map.get((s, k)):
            bad.append((s, k))
    return bad


def _classes(sys: InterpretedSystem, i: str):
    ev = evaluator_for(sys)
    for mask in ev.classes[i]:
        members = [p for n, p in enumerate(ev.points) if mask >> n & 1]
        if len(members) > 1:
            yield members


def check_encryption_knowledge(sys: InterpretedSystem) -> List[Diagnostic]:
    diags = []
    for ag in sys.agents:
        for members in _classes(sys, ag):
            first = sys.run(members[0].run).table.enc_map
            if all(sys.run(p.run).table.enc_map == first for p in members):
                continue
            for p in members:
                for q in members:
                    if p == q:
                        continue
                    bad = encryption_mismatches(sys, ag, p, q)
                    if bad:
                        s, k = bad[0]
                        diags.append(Diagnostic(
                            "H3", f"{ag} cannot tell {p} from {q} but the runs encrypt {s} "
                            f"under {k.label} differently while {ag} holds what (a)/(b) need",
                            (p, q)))
    return diags


def check_goodness(sys: InterpretedSystem) -> List[Diagnostic]:
    diags = []
    ev = evaluator_for(sys)
    for ag in sys.agents:
        v = ev.valid(Implies(GOOD, Not(prob_know(ag, 0, Not(GOOD)))))
        if not v.ok:
            diags.append(Diagnostic("H4", f"goodness not maintained for {ag}: {v.status} "
                                    f"{v.detail}", (v.witness,)))
    return diags


def check_extract(sys: InterpretedSystem) -> List[Diagnostic]:
    diags = []
    for r in sys.runs:
        for ag in sorted({a for a, _ in r.extract}):
            if ag not in sys.dolev_yao and ag not in sys.nonforging:
                continue
            for m in range(sys.horizon + 1):
                p = Point(r.id, m)
                for t in sorted(sys.terms, key=repr):
                    if extract_holds(sys, p, ag, t) != extract_dy(sys, p, ag, t):
                        diags.append(Diagnostic("H5", f"declared extract for {ag} at {p} "
                                                f"disagrees with derivability on {t!r}", (p,)))
                        break
    return diags


def check_honesty(sys: InterpretedSystem) -> List[Diagnostic]:
    diags = []
    for ag in sorted(sys.honest):
        if ag not in sys.nonforging:
            diags.append(Diagnostic("honesty", f"honest agent {ag} is not declared nonforging"))
        diags += check_honest(sys, ag)
    return diags


def validate_scenario(sys: InterpretedSystem, params=None) -> List[Diagnostic]:
    key = "validation"
    hit = sys._cache.get(key)
    if hit is None:
        hit = []
        for r in sys.runs:
            hit += [Diagnostic("encoding", f"run {r.id}: {d.message}", d.witness)
                    for d in validate_encoding(r.table)]
        hit += check_channel(sys)
        hit += check_init(sys)
        hit += check_sends(sys)
        hit += check_encryption_knowledge(sys)
        hit += check_goodness(sys)
        hit += check_extract(sys)
        hit += check_honesty(sys)
        sys._cache[key] = hit
    return list(hit)


def failed_hypotheses(diags) -> set:
    return {d.code for d in diags}


@dataclass(frozen=True)
class LocalityResult:
    status: str  # ok | failed | not applicable
    pairs: int = 0
    mismatch: Optional[tuple] = None


def check_locality(sys: InterpretedSystem, agents=None) -> LocalityResult:
    """Same local state implies same derivable strings, on systems meeting H3.

    ``pairs`` counts unordered pairs of distinct points per agent.
    """
    if any(d.code == "H3" for d in validate_scenario(sys)):
        return LocalityResult("not applicable")
    ev = evaluator_for(sys)
    pairs = 0
    for ag in agents or sys.agents:
        for mask in ev.classes[ag]:
            members = [p for n, p in enumerate(ev.points) if mask >> n & 1]
            for n, p in enumerate(members):
                for q in members[n + 1:]:
                    pairs += 1
                    if cancompute(sys, p, ag).strings != cancompute(sys, q, ag).strings:
                        return LocalityResult("failed", pairs, (ag, p, q))
    return LocalityResult("ok", pairs)
