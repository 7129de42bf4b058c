"""Evaluation trees and run timelines for counterexample points."""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import List, Optional

from .dolevyao import cancompute
from .evaluator import Evaluator, evaluator_for
from .syntax import (Always, AlwaysPast, And, CGood, EncodingEq, Exists, Extract, Formula, Good,
                     Iff, Implies, Know, Next, Not, Or, Prev, Prim, ProbGE, Received, Sent,
                     Substr, Top, children, print_core, print_string)
from .system import InterpretedSystem, Point, Recv, SendTo

MAX_DEPTH = 40
ATOMS = (Top, Prim, Good, Sent, Received, Extract, EncodingEq, Substr)


@dataclass
class ExplainNode:
    formula: Formula
    point: Point
    value: Optional[bool]  # None: undefined
    env: dict = field(default_factory=dict)
    note: str = ""
    kids: List["ExplainNode"] = field(default_factory=list)

    def walk(self):
        yield self
        for k in self.kids:
            yield from k.walk()

    def find(self, pred):
        return [n for n in self.walk() if pred(n)]

    @property
    def label(self) -> str:
        text = print_core(self.formula)
        if len(text) > 90:
            text = text[:87] + "..."
        return text


def _value(ev: Evaluator, phi, env, p) -> Optional[bool]:
    t, e = ev.sat(phi, env)
    bit = 1 << ev.index[p]
    if e & bit:
        return None
    return bool(t & bit)


def _bound(phi, env):
    """Restrict env to variables free in phi, for readable labels."""
    from .syntax import free_vars
    fv = free_vars(phi)
    return {k: v for k, v in env.items() if k in fv}


def explain(sys: InterpretedSystem, p: Point, phi, env=None, depth: int = 0) -> ExplainNode:
    ev = evaluator_for(sys)
    env = env or {}
    val = _value(ev, phi, env, p)
    node = ExplainNode(phi, p, val, _bound(phi, env))
    if depth >= MAX_DEPTH or isinstance(phi, ATOMS):
        return node
    T = sys.horizon

    def sub(q, psi, e=env, note=""):
        n = explain(sys, q, psi, e, depth + 1)
        if note:
            n.note = note
        node.kids.append(n)
        return n

    if isinstance(phi, Not):
        sub(p, phi.body)
    elif isinstance(phi, (And, Or, Implies, Iff)):
        sub(p, phi.left)
        sub(p, phi.right)
    elif isinstance(phi, Know):
        sub(p, phi.body)
        if val is not True:
            for q in ev.points:
                if q != p and q.time == p.time and \
                        sys.local_state(q, phi.agent) == sys.local_state(p, phi.agent) and \
                        _value(ev, phi.body, env, q) is not True:
                    sub(q, phi.body, note=f"{phi.agent} cannot rule out {q}")
                    break
    elif isinstance(phi, ProbGE):
        vt, ve = ev.sat(phi.body, env)
        bit = 1 << ev.index[p]
        for mask, members, denom in ev.groups[phi.agent]:
            if mask & bit:
                num = sum(w for b, w in members if b & vt)
                node.note = f"Pr = {Fraction(num) / denom}" if denom else "conditioning on a null set"
        sub(p, phi.body)
    elif isinstance(phi, Next):
        if p.time < T:
            sub(Point(p.run, p.time + 1), phi.body)
        else:
            node.note = "past the horizon"
    elif isinstance(phi, Prev):
        if p.time > 0:
            sub(Point(p.run, p.time - 1), phi.body)
        else:
            node.note = "time 0: weak previous holds"
    elif isinstance(phi, Always):
        times = range(p.time, T + 1)
        bad = [m for m in times if _value(ev, phi.body, env, Point(p.run, m)) is not True]
        for m in (bad[:1] if bad else times):
            sub(Point(p.run, m), phi.body)
    elif isinstance(phi, AlwaysPast):
        times = range(p.time, -1, -1)
        bad = [m for m in times if _value(ev, phi.body, env, Point(p.run, m)) is not True]
        for m in (bad[:1] if bad else times):
            sub(Point(p.run, m), phi.body)
    elif isinstance(phi, Exists):
        cands = list(ev.domain(phi, env))
        if val is True:
            best = next(s for s in cands if _value(ev, phi.body, {**env, phi.var: s}, p))
            sub(p, phi.body, {**env, phi.var: best}, note=f"witness {phi.var} = {print_string(best)}")
        else:
            def score(s):
                n = explain(sys, p, phi.body, {**env, phi.var: s}, depth + 1)
                return sum(1 for x in n.walk() if x.value is True and isinstance(x.formula, ATOMS))
            best = max(cands, key=score) if cands else None
            if best is not None:
                sub(p, phi.body, {**env, phi.var: best},
                    note=f"closest candidate {phi.var} = {print_string(best)}")
    elif isinstance(phi, CGood):
        sub(p, phi.body)
    else:
        for c in children(phi):
            if isinstance(c, Formula):
                sub(p, c)
    return node


def render_tree(node: ExplainNode, indent: int = 0) -> List[str]:
    mark = {True: "T", False: "F", None: "?"}[node.value]
    env = ""
    if node.env:
        env = "  [" + ", ".join(f"{k}={print_string(v)}" for k, v in sorted(node.env.items())) + "]"
    note = f"  -- {node.note}" if node.note else ""
    lines = [f"{'  ' * indent}{mark} {node.label} @ {node.point}{env}{note}"]
    for k in node.kids:
        lines += render_tree(k, indent + 1)
    return lines


def timeline(sys: InterpretedSystem, rid: str) -> dict:
    """Events, local-state sizes and closure growth of one run."""
    run = sys.run(rid)
    out = {"run": rid, "good": run.good, "init": {}, "rounds": []}
    for ag in sys.agents:
        out["init"][ag] = sorted(str(s) for s in run.init[ag])
    prev = {ag: cancompute(sys, Point(rid, 0), ag).strings for ag in sys.agents}
    out["closure0"] = {ag: sorted(str(s) for s in prev[ag]) for ag in sys.agents}
    for m in range(1, sys.horizon + 1):
        sends, recvs, gained = [], [], {}
        for ag in sys.agents:
            for e in sorted(run.rounds[ag][m - 1], key=repr):
                if isinstance(e, SendTo):
                    sends.append(f"{ag} -> {e.recipient} : {e.s}")
                elif isinstance(e, Recv):
                    recvs.append(f"{ag} <- {e.s}")
        events = sends + recvs
        for ag in sys.agents:
            cur = cancompute(sys, Point(rid, m), ag).strings
            new = cur - prev[ag]
            if new:
                gained[ag] = sorted(str(s) for s in new)
            prev[ag] = cur
        out["rounds"].append({"round": m, "events": events, "closure_gained": gained,
                              "props": sorted(run.props[m])})
    return out


def render_timeline(tl: dict) -> List[str]:
    lines = [f"run {tl['run']}" + ("" if tl["good"] else "   *** good = false ***")]
    for ag, items in tl["init"].items():
        lines.append(f"  init {ag}: {', '.join(items) or '-'}")
    for rnd in tl["rounds"]:
        lines.append(f"  round {rnd['round']}")
        lines += [f"    {e}" for e in rnd["events"]] or ["    (no events)"]
        for ag, new in rnd["closure_gained"].items():
            lines.append(f"    + {ag} can now compute: {', '.join(new)}")
        if rnd["props"]:
            lines.append(f"    props: {' '.join(rnd['props'])}")
    return lines


def render_trace(sys: InterpretedSystem, p: Point, phi) -> str:
    lines = [f"witness {p}"] + render_timeline(timeline(sys, p.run))
    lines += ["", "evaluation at the witness:"] + render_tree(explain(sys, p, phi))
    return "\n".join(lines) + "\n"
