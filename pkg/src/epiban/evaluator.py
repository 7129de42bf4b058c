"""Satisfaction relation over finite interpreted systems.

Subformulas are evaluated over all points at once.  A value is a pair of
bitmasks ``(true, undefined)`` indexed by point (runs in id order, then
time).  Points become undefined when a probability conditions on a null set
or a next-step looks past the horizon; connectives combine undefinedness in
Kleene's strong three-valued style, so a conjunction with a false conjunct is
false regardless of the other side.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Dict, List, Optional, Tuple

from .dolevyao import extract_holds
from .syntax import (Always, AlwaysPast, And, Atom, CGood, EncodingEq, Exists, Extract,
                     Formula, Good, Iff, Implies, Know, Next, Not, Or, Pairing, Prev, Prim,
                     ProbGE, Received, Sent, Substr, Top, Var, free_vars, future_depth,
                     print_core)
from .system import InterpretedSystem, Point, Recv, SendTo, ZeroConditioning
from .terms import SubstringRelation


class HorizonExceeded(ValueError):
    pass


class EvaluationError(ValueError):
    pass


@dataclass(frozen=True)
class Verdict:
    status: str  # valid | invalid | error
    witness: Optional[Point] = None
    detail: str = ""
    checked: int = 0

    @property
    def ok(self) -> bool:
        return self.status == "valid"

    def as_dict(self):
        return {"status": self.status, "witness": list(self.witness) if self.witness else None,
                "detail": self.detail, "checked": self.checked}


Value = Tuple[int, int]


class Evaluator:
    def __init__(self, sys: InterpretedSystem):
        self.sys = sys
        T = self.T = sys.horizon
        W = T + 1
        self.points: List[Point] = sys.points()
        self.index: Dict[Point, int] = {p: n for n, p in enumerate(self.points)}
        N = len(self.points)
        self.full = (1 << N) - 1
        self.first = sum(1 << (ri * W) for ri in range(len(sys.runs)))
        self.last = self.first << T
        self.run_mask: Dict[str, int] = {}
        self.good = 0
        for ri, r in enumerate(sys.runs):
            m = ((1 << W) - 1) << (ri * W)
            self.run_mask[r.id] = m
            if r.good:
                self.good |= m
        self.cell_mask = {c.name: sum(self.run_mask[r] for r in c.weights) for c in sys.cells}
        # per-agent indistinguishability classes and (class x cell) groups
        self.classes: Dict[str, List[int]] = {}
        self.groups: Dict[str, List[Tuple[int, List[Tuple[int, Fraction]], Fraction]]] = {}
        for ag in sys.agents:
            cls: Dict = {}
            grp: Dict = {}
            for n, p in enumerate(self.points):
                st = sys.local_state(p, ag)
                cls[st] = cls.get(st, 0) | (1 << n)
                cell = sys.cell_of[p.run]
                key = (st, cell.name)
                g = grp.setdefault(key, [0, [], Fraction(0)])
                w = cell.weights[p.run]
                g[0] |= 1 << n
                g[1].append((1 << n, w))
                g[2] += w
            self.classes[ag] = list(cls.values())
            self.groups[ag] = [tuple(g) for g in grp.values()]
        self.sent: Dict = {}
        self.recv: Dict = {}
        for ri, r in enumerate(sys.runs):
            for ag in sys.agents:
                acc_s, acc_r = set(), set()
                for m in range(W):
                    if m > 0:
                        for e in r.rounds[ag][m - 1]:
                            (acc_s if isinstance(e, SendTo) else acc_r).add(e.s)
                    bit = 1 << (ri * W + m)
                    for s in acc_s:
                        self.sent[(ag, s)] = self.sent.get((ag, s), 0) | bit
                    for s in acc_r:
                        self.recv[(ag, s)] = self.recv.get((ag, s), 0) | bit
        self.substr = {r.id: SubstringRelation(r.table, sys.strings) for r in sys.runs}
        self.memo: Dict = {}
        self.atom_memo: Dict = {}

    # ------------------------------------------------------------ helpers
    def false_of(self, v: Value) -> int:
        return self.full & ~v[0] & ~v[1]

    def mk(self, t: int, f: int) -> Value:
        return t, self.full & ~t & ~f

    def resolve(self, s, env):
        if isinstance(s, Var):
            try:
                return env[s.name]
            except KeyError:
                raise EvaluationError(f"free variable {s.name!r}") from None
        if isinstance(s, Pairing):
            return Pairing(self.resolve(s.left, env), self.resolve(s.right, env))
        return s

    def runs_where(self, pred) -> int:
        out = 0
        for r in self.sys.runs:
            if pred(r):
                out |= self.run_mask[r.id]
        return out

    # --------------------------------------------------------- evaluation
    def sat(self, phi: Formula, env: Optional[dict] = None) -> Value:
        env = env or {}
        fv = free_vars(phi)
        key = (phi, tuple(sorted((v, env[v]) for v in fv if v in env))) if fv else (phi, ())
        hit = self.memo.get(key)
        if hit is None:
            hit = self._sat(phi, env)
            self.memo[key] = hit
        return hit

    def _atom(self, key, compute) -> int:
        hit = self.atom_memo.get(key)
        if hit is None:
            hit = compute()
            self.atom_memo[key] = hit
        return hit

    def _sat(self, phi, env) -> Value:
        full = self.full
        if isinstance(phi, Top):
            return full, 0
        if isinstance(phi, Good):
            return self.good, 0
        if isinstance(phi, Prim):
            return self._atom(("prim", phi.name), lambda: sum(
                1 << n for n, p in enumerate(self.points)
                if phi.name in self.sys.run(p.run).props[p.time])), 0
        if isinstance(phi, Sent):
            return self.sent.get((phi.agent, self.resolve(phi.s, env)), 0), 0
        if isinstance(phi, Received):
            return self.recv.get((phi.agent, self.resolve(phi.s, env)), 0), 0
        if isinstance(phi, Extract):
            return self._atom(("extract", phi.agent, phi.term), lambda: sum(
                1 << n for n, p in enumerate(self.points)
                if extract_holds(self.sys, p, phi.agent, phi.term))), 0
        if isinstance(phi, EncodingEq):
            s = self.resolve(phi.s, env)
            return self.runs_where(lambda r: r.table.encode(phi.term) == s), 0
        if isinstance(phi, Substr):
            a, b = self.resolve(phi.left, env), self.resolve(phi.right, env)
            return self._atom(("substr", a, b), lambda: self.runs_where(
                lambda r: (a, b) in self.substr[r.id])), 0
        if isinstance(phi, Not):
            t, e = self.sat(phi.body, env)
            return full & ~t & ~e, e
        if isinstance(phi, (And, Or, Implies, Iff)):
            a = self.sat(phi.left, env)
            if isinstance(phi, And) and a[0] == 0 and a[1] == 0:
                return 0, 0
            b = self.sat(phi.right, env)
            ta, fa, tb, fb = a[0], self.false_of(a), b[0], self.false_of(b)
            if isinstance(phi, And):
                return self.mk(ta & tb, fa | fb)
            if isinstance(phi, Or):
                return self.mk(ta | tb, fa & fb)
            if isinstance(phi, Implies):
                return self.mk(fa | tb, ta & fb)
            return self.mk((ta & tb) | (fa & fb), (ta & fb) | (fa & tb))
        if isinstance(phi, Know):
            v = self.sat(phi.body, env)
            f = self.false_of(v)
            t = u = 0
            for c in self.classes[phi.agent]:
                if c & f:
                    continue
                if c & ~v[0]:
                    u |= c
                else:
                    t |= c
            return t, u
        if isinstance(phi, ProbGE):
            vt, ve = self.sat(phi.body, env)
            t = u = 0
            alpha = phi.threshold
            for mask, members, denom in self.groups[phi.agent]:
                if denom == 0:
                    u |= mask
                    continue
                lo = sum((w for bit, w in members if bit & vt), Fraction(0))
                hi = lo + sum((w for bit, w in members if bit & ve), Fraction(0))
                if lo >= alpha * denom:
                    t |= mask
                elif hi >= alpha * denom:
                    u |= mask
            return t, u
        if isinstance(phi, Next):
            t, e = self.sat(phi.body, env)
            keep = full & ~self.last
            return (t >> 1) & keep, ((e >> 1) & keep) | self.last
        if isinstance(phi, Prev):
            t, e = self.sat(phi.body, env)
            keep = full & ~self.first
            return ((t << 1) & keep) | self.first, (e << 1) & keep
        if isinstance(phi, (Always, AlwaysPast)):
            v = self.sat(phi.body, env)
            t0, f0 = v[0], self.false_of(v)
            at, af = t0, f0
            for _ in range(self.T):
                if isinstance(phi, Always):
                    keep = full & ~self.last
                    at = t0 & (((at >> 1) & keep) | self.last)
                    af = f0 | ((af >> 1) & keep)
                else:
                    keep = full & ~self.first
                    at = t0 & (((at << 1) & keep) | self.first)
                    af = f0 | ((af << 1) & keep)
            return self.mk(at, af)
        if isinstance(phi, Exists):
            t, f = 0, full
            for s in self.domain(phi, env):
                inner = dict(env)
                inner[phi.var] = s
                v = self.sat(phi.body, inner)
                t |= v[0]
                f &= self.false_of(v)
                if t == full:
                    break
            return self.mk(t, f)
        if isinstance(phi, CGood):
            v = self.sat(phi.body, env)
            lo = self._cgood_fix(phi.group, v[0])
            hi = self._cgood_fix(phi.group, v[0] | v[1])
            return lo, hi & ~lo
        raise TypeError(f"cannot evaluate {phi!r}")

    def domain(self, phi: Exists, env):
        body = phi.body
        if (isinstance(body, And) and isinstance(body.left, EncodingEq)
                and body.left.s == Var(phi.var) and not free_vars(body.left.term)):
            # only the term's encodings can satisfy the first conjunct
            seen = []
            for r in self.sys.runs:
                s = r.table.encode(body.left.term)
                if s not in seen:
                    seen.append(s)
            return seen
        return self.sys.strings

    def _cgood_fix(self, group, phi_true: int) -> int:
        """Greatest X with X = E^good_G(phi & X), on definite truth."""
        x = self.full
        while True:
            target = (self.full & ~self.good) | (phi_true & x)
            nxt = self.full
            for ag in group:
                ok = 0
                for c in self.classes[ag]:
                    if not c & ~target:
                        ok |= c
                nxt &= ok
            if nxt == x:
                return x
            x = nxt

    # --------------------------------------------------------- front end
    def check_closed(self, phi):
        fv = free_vars(phi)
        if fv:
            raise EvaluationError(f"formula has free variables {sorted(fv)}")

    def guard(self, p: Point, phi):
        if future_depth(phi) > self.T - p.time:
            raise HorizonExceeded(f"{print_core(phi)[:60]}... looks past horizon {self.T} at {p}")

    def eval(self, p: Point, phi) -> bool:
        self.check_closed(phi)
        self.guard(p, phi)
        t, e = self.sat(phi)
        bit = 1 << self.index[p]
        if e & bit:
            raise ZeroConditioning(f"undefined probability while evaluating at {p}")
        return bool(t & bit)

    def eval_prob(self, p: Point, i: str, phi) -> Fraction:
        self.check_closed(phi)
        self.guard(p, phi)
        vt, ve = self.sat(phi)
        bit = 1 << self.index[p]
        for mask, members, denom in self.groups[i]:
            if mask & bit:
                if denom == 0:
                    raise ZeroConditioning(f"agent {i} conditions on a null set at {p}")
                if any(b & ve and w > 0 for b, w in members):
                    raise ZeroConditioning(f"undefined subformula under P[{i}] at {p}")
                return sum((w for b, w in members if b & vt), Fraction(0)) / denom
        raise KeyError(p)

    def valid(self, phi, horizon_safe: bool = False) -> Verdict:
        self.check_closed(phi)
        depth = future_depth(phi)
        t, e = self.sat(phi)
        checked = 0
        for n, p in enumerate(self.points):
            if depth > self.T - p.time:
                if horizon_safe:
                    continue
                return Verdict("error", p, "HorizonExceeded: formula looks past the horizon",
                               checked)
            checked += 1
            bit = 1 << n
            if e & bit:
                return Verdict("error", p, "ZeroConditioning: probability undefined", checked)
            if not t & bit:
                return Verdict("invalid", p, "formula false at witness", checked)
        return Verdict("valid", None, "", checked)


def evaluator_for(sys: InterpretedSystem) -> Evaluator:
    ev = sys._cache.get("evaluator")
    if ev is None:
        ev = Evaluator(sys)
        sys._cache["evaluator"] = ev
    return ev


def eval(sys: InterpretedSystem, p: Point, phi) -> bool:  # noqa: A001
    return evaluator_for(sys).eval(p, phi)


def eval_prob(sys: InterpretedSystem, p: Point, i: str, phi) -> Fraction:
    return evaluator_for(sys).eval_prob(p, i, phi)


def eval_cgood(sys: InterpretedSystem, p: Point, group, phi) -> bool:
    return evaluator_for(sys).eval(p, CGood(tuple(group), phi))


def valid(sys: InterpretedSystem, phi, horizon_safe: bool = False) -> Verdict:
    return evaluator_for(sys).valid(phi, horizon_safe)
