from fractions import Fraction

import pytest
from hypothesis import HealthCheck, given, settings

from epiban.syntax import (GOOD, Always, And, Controls, EncFrom, Exists, Extract, Fresh, Iff,
                           Implies, Know, Not, ProbGE, Sees, SharedKey, node_count, parse_ban,
                           print_core)
from epiban.terms import Agent, Enc, FormulaMsg, Key, Nonce, Pair
from epiban.translate import (RULES, SideConditionViolated, TranslationParams, rule_formulas,
                              translate_formula, translate_message, translate_rule_instance)

from helpers import ban_formulas

P = TranslationParams(("a", "b", "c"), l=2)
kab, na = Key("kab"), Nonce("na")
# per-node blow-up bound for three agents and l = 2 (see test_acceptance for the reported c)
C_BOUND = 40


def tr(text, params=P):
    return translate_formula(parse_ban(text), params)


def test_believes_shape():
    phi = tr("a believes b sees na")
    k0 = lambda x: Know("a", ProbGE("a", Fraction(1), x))  # noqa: E731
    assert phi == And(Not(k0(Not(GOOD))), k0(Implies(GOOD, Know("b", Extract("b", na)))))


def test_alpha_changes_threshold():
    phi = tr("a believes b sees na", TranslationParams(("a", "b"), alpha=Fraction(1, 4)))
    assert "P[a]>=3/4" in print_core(phi)
    assert TranslationParams(("a",), alpha=Fraction(1, 4)).experimental


@pytest.mark.parametrize("kw", [dict(alpha=1), dict(alpha=-1), dict(l=-1), dict(said="x")])
def test_bad_params(kw):
    with pytest.raises(ValueError):
        TranslationParams(("a",), **kw)


def test_controls_is_iff():
    phi = tr("a controls b sees na")
    assert isinstance(phi, Iff)
    assert phi.right == Know("b", Extract("b", na))


def test_messages():
    m = translate_message(EncFrom(na, "b", kab), P)
    assert m == Enc(Pair(na, Agent("b")), kab)
    fm = translate_message(parse_ban("b sees na"), P)
    assert fm == FormulaMsg(Know("b", Extract("b", na)))
    with pytest.raises(ValueError):
        translate_message(parse_ban("b sees na"))


def test_said_variants_differ():
    prim, alt = tr("b said na"), tr("b said na", TranslationParams(P.agents, said="alt"))
    assert prim != alt
    assert isinstance(prim, Exists) and prim.var == "x"
    assert isinstance(alt, Exists) and alt.var == "y"


def test_sees_variants_differ():
    alt = tr("b sees na", TranslationParams(P.agents, sees="alt"))
    assert "recv[b](y)" in print_core(alt)


def test_shared_key_and_options():
    phi = tr("a key(kab) b")
    assert phi == And(Extract("a", kab), And(Extract("b", kab), Not(Extract("c", kab))))
    srv = tr("a key(kab) b", TranslationParams(P.agents, server="c"))
    assert srv == And(Extract("a", kab), Extract("b", kab))
    assert isinstance(tr("a key(kab) b", TranslationParams(P.agents, box_key=True)), Always)


def test_fresh_looks_back_l_steps():
    one = print_core(tr("fresh(na)", TranslationParams(P.agents, l=1)))
    three = print_core(tr("fresh(na)", TranslationParams(P.agents, l=3)))
    assert three.count("Y(") == one.count("Y(") + 2


def test_rule_schemas():
    subst = {"i": "a", "j": "b", "k": kab, "F": na, "l": "b"}
    prem, concl = rule_formulas("R1", subst)
    assert len(prem) == 2 and print_core(translate_formula(concl, P)).startswith("!K[a]")
    assert isinstance(translate_rule_instance("R1", subst, P), Implies)
    assert set(RULES) == {f"R{n}" for n in range(1, 10)}


@pytest.mark.parametrize("rule, subst", [
    ("R1", {"i": "a", "j": "b", "k": kab, "F": na, "l": "a"}),
    ("R1", {"i": "a", "j": "b", "k": Key("kp", "pub"), "F": na, "l": "b"}),
    ("R7", {"i": "a", "k": kab, "F": na, "l": "b"}),
    ("R3", {"i": "a", "j": "b", "F": na}),
    ("R2", {"i": "a", "j": "b", "F": na}),
])
def test_side_conditions(rule, subst):
    with pytest.raises(SideConditionViolated):
        rule_formulas(rule, subst)


@settings(max_examples=300, deadline=None, suppress_health_check=list(HealthCheck))
@given(ban_formulas(controls=False, max_leaves=12))
def test_controls_free_translation_is_linear(f):
    assert node_count(translate_formula(f, P)) <= C_BOUND * node_count(f)


def test_controls_tower_is_exponential():
    f = Sees("a", na)
    sizes = []
    for d in range(10):
        sizes.append(len(print_core(translate_formula(f, P))))
        f = Controls("b", f)
    for d, n in enumerate(sizes):
        assert n >= 2 ** d
    assert all(b >= 2 * a for a, b in zip(sizes, sizes[1:]))
