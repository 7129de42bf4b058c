"""Checking translated BAN rule instances against a system.

Each instance is gated on the hypotheses the soundness theorem needs for its
rule; an instance whose gate fails is skipped, never counted as a failure.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, replace
from typing import Dict, List, Optional, Sequence

from .evaluator import Verdict, valid
from .syntax import (BanFormula, EncFrom, ParseError, Sees, SharedKey, parse_ban, parse_term,
                     print_ban, print_term)
from .system import InterpretedSystem
from .terms import Agent, Enc, FormulaMsg, Key, Pair, UnknownTerm, term_depth
from .translate import (RULE_VARS, RULES, SideConditionViolated, TranslationParams, print_subst,
                        translate_message, translate_rule_instance)
from .validation import validate_scenario

BASE_HYPOTHESES = ("encoding", "H0", "H1", "H2", "H3", "H5")
AUTO_DEPTH = 2


class HypothesisNotMet(RuntimeError):
    pass


@dataclass(frozen=True)
class InstanceResult:
    rule: str
    subst: str
    status: str  # valid | invalid | error | skipped
    witness: Optional[tuple] = None
    detail: str = ""
    checked: int = 0

    @property
    def key(self):
        return (self.rule, self.subst)

    def as_dict(self):
        return {"rule": self.rule, "subst": self.subst, "status": self.status,
                "witness": list(self.witness) if self.witness else None,
                "detail": self.detail, "checked": self.checked}


def gate(sys: InterpretedSystem, rule: str, subst: Dict, diags=None) -> List[str]:
    """Hypotheses missing for this instance; empty means it may be checked."""
    failed = {d.code for d in (validate_scenario(sys) if diags is None else diags)}
    missing = sorted(failed & set(BASE_HYPOTHESES))
    not_dy = [a for a in sys.agents if a not in sys.dolev_yao and a not in sys.nonforging]
    if not_dy:
        missing.append(f"dolev-yao({','.join(not_dy)})")
    if rule == "R1" and subst["i"] not in sys.nonforging:
        missing.append(f"nonforging({subst['i']})")
    if rule == "R3":
        if subst["j"] not in sys.honest:
            missing.append(f"honest({subst['j']})")
        missing += sorted(failed & {"H4", "honesty"})
    return missing


def _unquote(sys: InterpretedSystem):
    back = {FormulaMsg(translate_message(F, sys.params).body): F for F in sys.formulas}

    def go(t):
        if t in back:
            return back[t]
        if isinstance(t, FormulaMsg):
            return None  # core-logic formula with no BAN source
        if isinstance(t, Pair):
            a, b = go(t.left), go(t.right)
            return None if a is None or b is None else Pair(a, b)
        if isinstance(t, Enc):
            a = go(t.body)
            return None if a is None else Enc(a, t.key)
        return t
    return go


def auto_instances(sys: InterpretedSystem, rules: Sequence[str] = RULES,
                   depth: int = AUTO_DEPTH) -> List[tuple]:
    """Type-correct substitutions over the system's declared universe.

    Messages are drawn from declared terms of depth at most ``depth``; only
    instances whose encodings exist in every run are produced.
    """
    ag = list(sys.agents)
    unq = _unquote(sys)
    terms = sorted(sys.terms, key=repr)
    sym = [k for k in sys.keys if k.symmetric]
    out = []

    def msg(t):
        return unq(t) if term_depth(t) <= depth else None

    for t in terms:
        if isinstance(t, Enc) and isinstance(t.body, Pair) and isinstance(t.body.right, Agent):
            X, l, k = msg(t.body.left), t.body.right.name, t.key
            if X is None:
                continue
            for i in ag:
                if i == l:
                    continue
                if k.symmetric:
                    out += [(r, {"i": i, "j": j, "k": k, "F": X, "l": l})
                            for r in ("R1", "R6") if r in rules for j in ag]
                elif k.kind == "pub" and "R7" in rules:
                    out.append(("R7", {"i": i, "k": k, "F": X, "l": l}))
        if isinstance(t, Pair):
            F, F2 = msg(t.left), msg(t.right)
            if F is None or F2 is None:
                continue
            for i in ag:
                if "R2" in rules:
                    out += [("R2", {"i": i, "j": j, "F": F, "F2": F2}) for j in ag]
                if "R5" in rules:
                    out.append(("R5", {"i": i, "F": F, "F2": F2}))
                if "R8" in rules:
                    out.append(("R8", {"i": i, "F": F, "F2": F2}))
    formulas = list(sys.formulas)
    controlled = formulas + [SharedKey(a, k, b) for k in sym for a, b in itertools.combinations(ag, 2)]
    for i, j in itertools.product(ag, ag):
        if "R3" in rules:
            out += [("R3", {"i": i, "j": j, "F": F}) for F in formulas]
        if "R4" in rules:
            out += [("R4", {"i": i, "j": j, "F": F}) for F in controlled]
        if "R9" in rules and i != j:
            out += [("R9", {"i": i, "k": k, "j": j}) for k in sym]
    seen, uniq = set(), []
    for rule, s in out:
        key = (rule, print_subst(rule, s))
        if key not in seen:
            seen.add(key)
            uniq.append((rule, s))
    return sorted(uniq, key=lambda x: (RULES.index(x[0]), print_subst(*x)))


def parse_substitutions(text: str) -> List[tuple]:
    """Lines like ``R1 i=a j=b k=kab F=na l=b``; ``#`` starts a comment line."""
    out = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        rule, *binds = line.split(None, 1)
        if rule not in RULE_VARS:
            raise ValueError(f"line {lineno}: unknown rule {rule!r}")
        subst: Dict = {}
        rest = binds[0] if binds else ""
        # split on ' v=' boundaries for the rule's schema variables
        parts = _split_bindings(rest, RULE_VARS[rule], lineno)
        for v, val in parts.items():
            if v in ("i", "j", "l"):
                subst[v] = val
            elif v == "k":
                subst[v] = parse_term(val, ban=True) if "(" in val else Key(val)
            else:
                try:
                    subst[v] = parse_ban(val)
                except ParseError:
                    subst[v] = parse_term(val, ban=True)
        out.append((rule, subst))
    return out


def _split_bindings(rest: str, names, lineno) -> Dict[str, str]:
    import re
    pat = re.compile(r"(?:^|\s)(" + "|".join(map(re.escape, names)) + r")=")
    hits = list(pat.finditer(rest))
    out = {}
    for n, h in enumerate(hits):
        end = hits[n + 1].start() if n + 1 < len(hits) else len(rest)
        out[h.group(1)] = rest[h.end():end].strip()
    if not out and names:
        raise ValueError(f"line {lineno}: no bindings")
    return out


def check_instance(sys: InterpretedSystem, rule: str, subst: Dict,
                   params: Optional[TranslationParams] = None, diags=None,
                   skip_validate: bool = False) -> InstanceResult:
    key = print_subst(rule, subst)
    if not skip_validate:
        missing = gate(sys, rule, subst, diags)
        if missing:
            return InstanceResult(rule, key, "skipped", detail="hypotheses not met: " + ", ".join(missing))
    params = params or sys.params
    params = replace(params, quote=sys.params)
    try:
        phi = translate_rule_instance(rule, subst, params)
        v: Verdict = valid(sys, phi, horizon_safe=True)
    except SideConditionViolated as e:
        return InstanceResult(rule, key, "error", detail=f"SideConditionViolated: {e}")
    except UnknownTerm as e:
        return InstanceResult(rule, key, "error", detail=f"UnknownTerm: {e}")
    return InstanceResult(rule, key, v.status, v.witness, v.detail, v.checked)


def check_soundness(sys: InterpretedSystem, rules: Sequence[str] = RULES, instances=None,
                    params: Optional[TranslationParams] = None, skip_validate: bool = False,
                    depth: int = AUTO_DEPTH) -> List[InstanceResult]:
    if instances is None:
        instances = auto_instances(sys, rules, depth)
    diags = None if skip_validate else validate_scenario(sys)
    res = [check_instance(sys, r, s, params, diags, skip_validate) for r, s in instances
           if r in rules]
    return sorted(res, key=lambda x: (RULES.index(x.rule), x.subst))
