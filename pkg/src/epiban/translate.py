"""Compile BAN formulas and messages into the core logic."""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, Optional, Sequence, Tuple

from .syntax import (GOOD, Always, AlwaysPast, And, BanFormula, Believes, Controls,
                     EncFrom, EncodingEq, Exists, Extract, Fresh, Iff, Implies, Know, Next,
                     Not, PublicKey, Received, Said, Sees, Sent, SharedKey, Substr, Var,
                     conj, past_diamond, prev_n, prob_know, sprev)
from .terms import Agent, Enc, FormulaMsg, Key, Pair

X, Y = Var("x"), Var("y")


@dataclass(frozen=True)
class TranslationParams:
    agents: Tuple[str, ...]
    l: int = 0
    alpha: Fraction = Fraction(0)
    said: str = "primary"
    sees: str = "primary"
    box_key: bool = False
    server: Optional[str] = None
    # parameters used inside formula-messages; None means these ones
    quote: Optional["TranslationParams"] = None

    def __post_init__(self):
        object.__setattr__(self, "agents", tuple(self.agents))
        object.__setattr__(self, "alpha", Fraction(self.alpha))
        if not 0 <= self.alpha < 1:
            raise ValueError("alpha must lie in [0, 1)")
        if self.l < 0:
            raise ValueError("freshness window must be >= 0")
        if self.said not in ("primary", "alt") or self.sees not in ("primary", "alt"):
            raise ValueError("translation variant must be 'primary' or 'alt'")

    @property
    def experimental(self) -> bool:
        return self.alpha != 0


def translate_message(m, params: Optional[TranslationParams] = None):
    if isinstance(m, EncFrom):
        return Enc(Pair(translate_message(m.body, params), Agent(m.sender)), m.key)
    if isinstance(m, Pair):
        return Pair(translate_message(m.left, params), translate_message(m.right, params))
    if isinstance(m, Enc):
        return Enc(translate_message(m.body, params), m.key)
    if isinstance(m, BanFormula):
        if params is None:
            raise ValueError("formula messages need translation parameters")
        return FormulaMsg(translate_formula(m, params.quote or params))
    return m


def first_send(i: str, y=Y):
    """i had not sent y yet, and sends it in the coming round."""
    return And(Not(Sent(i, y)), Next(Sent(i, y)))


def believes(i: str, body, params: TranslationParams):
    k = lambda phi: prob_know(i, params.alpha, phi)  # noqa: E731
    return And(Not(k(Not(GOOD))), k(Implies(GOOD, body)))


def translate_said(i: str, m, params: TranslationParams, variant: Optional[str] = None):
    mm = translate_message(m, params)
    if (variant or params.said) == "alt":
        inner = Know(i, Exists("x", And(EncodingEq(mm, X), Substr(X, Y))))
        return Exists("y", past_diamond(sprev(And(first_send(i), inner))))
    # y is bound inside x's conjunction; equivalent to binding both up front.
    said = past_diamond(sprev(And(first_send(i), Know(i, Substr(X, Y)))))
    return Exists("x", And(EncodingEq(mm, X), Exists("y", said)))


def translate_said_alternative(i: str, m, params: TranslationParams):
    return translate_said(i, m, params, "alt")


def translate_sees(i: str, m, params: TranslationParams, variant: Optional[str] = None):
    mm = translate_message(m, params)
    if (variant or params.sees) == "alt":
        return Exists("x", And(EncodingEq(mm, X),
                               Exists("y", And(Received(i, Y), Know(i, Substr(X, Y))))))
    return Know(i, Extract(i, mm))


def translate_sees_alternative(i: str, m, params: TranslationParams):
    return translate_sees(i, m, params, "alt")


def shared_key(i: str, k: Key, j: str, params: TranslationParams):
    allowed = {i, j}
    if params.server is not None:
        allowed.add(params.server)
    parts = [Extract(i, k), Extract(j, k)]
    parts += [Not(Extract(a, k)) for a in params.agents if a not in allowed]
    out = conj(parts)
    return Always(out) if params.box_key else out


def public_key(k: Key, j: str, params: TranslationParams):
    inv = k.inverse
    out = conj([Extract(j, inv)] + [Not(Extract(a, inv)) for a in params.agents if a != j])
    return Always(out) if params.box_key else out


def fresh(m, params: TranslationParams):
    mm = translate_message(m, params)
    never = conj([AlwaysPast(Not(Exists("y", And(first_send(a), Substr(X, Y)))))
                  for a in params.agents])
    return Exists("x", And(EncodingEq(mm, X), prev_n(never, params.l)))


def translate_formula(f: BanFormula, params: TranslationParams):
    if isinstance(f, Believes):
        return believes(f.agent, translate_formula(f.body, params), params)
    if isinstance(f, Controls):
        body = translate_formula(f.body, params)
        return Iff(prob_know(f.agent, params.alpha, Implies(GOOD, body)), body)
    if isinstance(f, Sees):
        return translate_sees(f.agent, f.msg, params)
    if isinstance(f, Said):
        return translate_said(f.agent, f.msg, params)
    if isinstance(f, SharedKey):
        return shared_key(f.left, f.key, f.right, params)
    if isinstance(f, PublicKey):
        return public_key(f.key, f.agent, params)
    if isinstance(f, Fresh):
        return fresh(f.msg, params)
    raise TypeError(f"not a BAN formula: {f!r}")


# ------------------------------------------------------------ rule schemas

class SideConditionViolated(ValueError):
    pass


RULES = ("R1", "R2", "R3", "R4", "R5", "R6", "R7", "R8", "R9")

# schema variables each rule binds
RULE_VARS: Dict[str, Tuple[str, ...]] = {
    "R1": ("i", "j", "k", "F", "l"),
    "R2": ("i", "j", "F", "F2"),
    "R3": ("i", "j", "F"),
    "R4": ("i", "j", "F"),
    "R5": ("i", "F", "F2"),
    "R6": ("i", "j", "k", "F", "l"),
    "R7": ("i", "k", "F", "l"),
    "R8": ("i", "F", "F2"),
    "R9": ("i", "k", "j"),
}


def rule_formulas(rule: str, subst: Dict) -> Tuple[Sequence[BanFormula], BanFormula]:
    """Premises and conclusion of a BAN rule instance."""
    if rule not in RULE_VARS:
        raise KeyError(f"unknown rule {rule!r}")
    missing = [v for v in RULE_VARS[rule] if v not in subst]
    if missing:
        raise SideConditionViolated(f"{rule}: unbound schema variables {missing}")
    s = subst
    i = s["i"]
    if rule in ("R1", "R6", "R7") and s["l"] == i:
        raise SideConditionViolated(f"{rule}: from-field {s['l']!r} must differ from {i!r}")
    if rule in ("R1", "R6", "R9") and not s["k"].symmetric:
        raise SideConditionViolated(f"{rule}: shared key must be symmetric")
    if rule == "R7" and s["k"].kind != "pub":
        raise SideConditionViolated("R7: k must be a public key")
    if rule in ("R3", "R4") and not isinstance(s["F"], BanFormula):
        raise SideConditionViolated(f"{rule}: F must be a formula")
    if rule == "R1":
        return ([Believes(i, SharedKey(s["j"], s["k"], i)), Sees(i, EncFrom(s["F"], s["l"], s["k"]))],
                Believes(i, Said(s["j"], s["F"])))
    if rule == "R2":
        return ([Believes(i, Said(s["j"], Pair(s["F"], s["F2"])))],
                Believes(i, Said(s["j"], s["F"])))
    if rule == "R3":
        return ([Believes(i, Fresh(s["F"])), Believes(i, Said(s["j"], s["F"]))],
                Believes(i, Believes(s["j"], s["F"])))
    if rule == "R4":
        return ([Believes(i, Controls(s["j"], s["F"])), Believes(i, Believes(s["j"], s["F"]))],
                Believes(i, s["F"]))
    if rule == "R5":
        return [Sees(i, Pair(s["F"], s["F2"]))], Sees(i, s["F"])
    if rule == "R6":
        return ([Believes(i, SharedKey(s["j"], s["k"], i)), Sees(i, EncFrom(s["F"], s["l"], s["k"]))],
                Sees(i, s["F"]))
    if rule == "R7":
        return ([Believes(i, PublicKey(s["k"], i)), Sees(i, EncFrom(s["F"], s["l"], s["k"]))],
                Sees(i, s["F"]))
    if rule == "R8":
        return [Believes(i, Fresh(s["F"]))], Believes(i, Fresh(Pair(s["F"], s["F2"])))
    return [Believes(i, SharedKey(i, s["k"], s["j"]))], Believes(i, SharedKey(s["j"], s["k"], i))


def translate_rule_instance(rule: str, subst: Dict, params: TranslationParams):
    premises, conclusion = rule_formulas(rule, subst)
    return Implies(conj([translate_formula(p, params) for p in premises]),
                   translate_formula(conclusion, params))


def print_subst(rule: str, subst: Dict) -> str:
    from .syntax import print_term
    parts = []
    for v in RULE_VARS[rule]:
        val = subst[v]
        parts.append(f"{v}={val if isinstance(val, str) else print_term(val)}")
    return ", ".join(parts)
