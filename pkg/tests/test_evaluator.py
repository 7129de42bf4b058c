from dataclasses import replace
from fractions import Fraction

import pytest
from hypothesis import HealthCheck, given, settings, strategies as st

from epiban.dolevyao import extract_holds
from epiban.evaluator import (EvaluationError, HorizonExceeded, eval, eval_cgood, eval_prob,
                              evaluator_for, valid)
from epiban.scenario import parse_scenario
from epiban.syntax import (GOOD, TRUE, Always, And, CGood, EncodingEq, Exists, Extract, Formula,
                           Implies, Know, Not, ProbGE, Var, children, egood, free_vars,
                           parse_core, prob_know)
from epiban.system import Point, ZeroConditioning, build_system, point_measure
from epiban.soundness import auto_instances
from epiban.translate import translate_rule_instance
from epiban.validation import check_goodness, validate_scenario

from helpers import (ALL_FIXTURES, RANDOM_SEEDS, SOUNDNESS, fixture, random_system, substitute,
                     system_formulas)
from test_system import THREE_RUNS

DEFINED = tuple(n for n in ALL_FIXTURES if n != "zeroweight")
SYSTEMS = [("fixture", n) for n in DEFINED] + [("random", s) for s in RANDOM_SEEDS]


def get(kind, key):
    return fixture(key) if kind == "fixture" else random_system(key)


def three_runs():
    return build_system(parse_scenario(THREE_RUNS))


# ---------------------------------------------------------- hand examples

def test_prob_exact_thresholds():
    sys = three_runs()
    p = Point("r3", 0)
    will_get = parse_core("X recv[a]('x')")
    assert eval_prob(sys, p, "a", will_get) == Fraction(1, 2)
    assert eval(sys, p, ProbGE("a", Fraction(1, 2), will_get))
    assert not eval(sys, p, ProbGE("a", Fraction(1, 2) + Fraction(1, 10**12), will_get))
    assert eval_prob(sys, Point("r1", 1), "a", parse_core("recv[a]('x')")) == 0


def test_prob_matches_point_measure():
    sys = three_runs()
    phi = parse_core("Y !recv[b]('x')")
    ev = evaluator_for(sys)
    for p in sys.points():
        mu = point_measure(sys, p, "a")
        want = sum((w for q, w in mu.items() if ev.eval(q, phi)), Fraction(0))
        assert eval_prob(sys, p, "a", phi) == want


def test_next_and_prev_at_the_edges():
    sys = fixture("mixed")
    assert eval(sys, Point("r1", 0), parse_core("Y false"))  # weak previous
    assert not eval(sys, Point("r1", 0), parse_core("!Y false"))
    assert eval(sys, Point("r1", 0), parse_core("X p"))
    with pytest.raises(HorizonExceeded):
        eval(sys, Point("r1", 2), parse_core("X p"))
    v = valid(sys, parse_core("X true"))
    assert v.status == "error" and "Horizon" in v.detail
    v = valid(sys, parse_core("X true"), horizon_safe=True)
    assert v.ok and v.checked == 4


def test_zero_conditioning_is_an_error():
    sys = fixture("zeroweight")
    v = valid(sys, parse_core("P[a]>=1/2(good)"))
    assert v.status == "error" and "ZeroConditioning" in v.detail
    bad = [p for p in sys.points() if sys.weight(p.run) == 0]
    with pytest.raises(ZeroConditioning):
        for p in bad:
            eval(sys, p, parse_core("P[a]>=1/2(good)"))


def test_free_variables_rejected():
    with pytest.raises(EvaluationError):
        valid(fixture("mixed"), parse_core("exists x.(sent[a](x))").body)


def test_kleene_guarding():
    # a false conjunct masks an undefined one; K0 guards keep things defined
    sys = fixture("zeroweight")
    assert valid(sys, parse_core("false & P[a]>=1(good) => true")).ok
    phi = parse_core("!K0[a](!good) => P[a]>=1/2(good | !good)")
    assert valid(sys, phi).status in ("valid", "error")


# ------------------------------------------------------------------ S5

def _s5(sys, phi, i):
    return [Implies(Know(i, phi), phi),
            Implies(Know(i, phi), Know(i, Know(i, phi))),
            Implies(Not(Know(i, phi)), Know(i, Not(Know(i, phi))))]


@pytest.mark.parametrize("kind,key", SYSTEMS)
def test_s5(kind, key):
    sys = get(kind, key)

    @settings(max_examples=8, deadline=None, suppress_health_check=list(HealthCheck))
    @given(system_formulas(sys, future=False, max_leaves=6), st.sampled_from(sys.agents))
    def check(phi, i):
        for law in _s5(sys, phi, i):
            v = valid(sys, law)
            assert v.status != "invalid", (law, v)

    check()


@pytest.mark.parametrize("kind,key", SYSTEMS)
def test_know_distributes(kind, key):
    sys = get(kind, key)

    @settings(max_examples=5, deadline=None, suppress_health_check=list(HealthCheck))
    @given(system_formulas(sys, future=False, max_leaves=4),
           system_formulas(sys, future=False, max_leaves=4), st.sampled_from(sys.agents))
    def check(phi, psi, i):
        k = Implies(Know(i, Implies(phi, psi)), Implies(Know(i, phi), Know(i, psi)))
        assert valid(sys, k).status != "invalid"

    check()


# ------------------------------------------------- extract monotonicity

@pytest.mark.parametrize("kind,key", SYSTEMS)
def test_extract_monotone(kind, key):
    sys = get(kind, key)
    if any(d.code == "H5" for d in validate_scenario(sys)):
        pytest.skip("declared extract overrides disagree with derivability")
    for ag in sys.agents:
        for t in sorted(sys.terms, key=repr):
            phi = Extract(ag, t)
            assert valid(sys, Implies(phi, Always(phi))).ok
            # and pointwise, against the closure directly
            for r in sys.runs:
                vals = [extract_holds(sys, Point(r.id, m), ag, t) for m in range(sys.horizon + 1)]
                assert vals == sorted(vals)


# ------------------------------------------------------ maintains goodness

@pytest.mark.parametrize("kind,key", SYSTEMS)
def test_maintains_goodness(kind, key):
    sys = get(kind, key)
    if check_goodness(sys):
        pytest.skip("H4 fails")
    for i in sys.agents:
        assert valid(sys, Implies(GOOD, Not(prob_know(i, 0, Not(GOOD))))).ok
        # oracle: on a good run some i-indistinguishable point gives good positive mass
        for p in sys.points():
            if not sys.run(p.run).good:
                continue
            same = [q for q in sys.points() if q.time == p.time
                    and sys.local_state(q, i) == sys.local_state(p, i)]
            assert any(sum((w for x, w in point_measure(sys, q, i).items()
                            if sys.run(x.run).good), Fraction(0)) > 0 for q in same)


# ---------------------------------------------------- Exists vs oracle

def _oracle_exists(sys, phi: Exists):
    ev = evaluator_for(sys)
    t, f = 0, ev.full
    for s in sys.strings:
        bt, be = ev.sat(substitute(phi.body, phi.var, s))
        t |= bt
        f &= ev.full & ~bt & ~be
    return t, ev.full & ~t & ~f


@pytest.mark.parametrize("kind,key", SYSTEMS)
def test_exists_matches_substitution(kind, key):
    sys = get(kind, key)
    ev = evaluator_for(sys)
    tm = sorted(sys.terms, key=repr)

    @settings(max_examples=6, deadline=None, suppress_health_check=list(HealthCheck))
    @given(system_formulas(sys, max_leaves=6, vars=("x",), exists=False), st.sampled_from(tm))
    def check(body, t):
        for phi in (Exists("x", body), Exists("x", And(EncodingEq(t, Var("x")), body))):
            assert ev.sat(phi) == _oracle_exists(sys, phi)

    check()


@pytest.mark.parametrize("name", SOUNDNESS + ("said-nested", "selfenc"))
def test_exists_matches_substitution_on_translations(name):
    sys = fixture(name)
    ev = evaluator_for(sys)
    seen = 0
    for rule, subst in auto_instances(sys)[::7]:
        stack = [translate_rule_instance(rule, subst, replace(sys.params, quote=sys.params))]
        while stack:
            x = stack.pop()
            if isinstance(x, Exists) and not free_vars(x):
                assert ev.sat(x) == _oracle_exists(sys, x)
                seen += 1
            stack.extend(c for c in children(x) if isinstance(c, Formula))
    assert seen


# ------------------------------------------------------ C^good fixpoint

def _stabilise(sys, group, phi):
    ev = evaluator_for(sys)
    x = TRUE
    masks = [ev.sat(x)[0]]
    for _ in range(len(ev.points) + 1):
        x = egood(group, And(phi, x))
        masks.append(ev.sat(x)[0])
    return masks


@pytest.mark.parametrize("kind,key", SYSTEMS)
def test_cgood_is_the_limit_of_egood(kind, key):
    sys = get(kind, key)
    ev = evaluator_for(sys)
    group = tuple(sys.agents[:2])
    for text in ("p | q", "!good | p", "Y true", "recv[%s]('n1') | true" % group[0]):
        phi = parse_core(text)
        masks = _stabilise(sys, group, phi)
        n = len(ev.points)
        # decreasing, and stable by step |points|
        assert all(b & ~a == 0 for a, b in zip(masks, masks[1:]))
        assert masks[n] == masks[n + 1]
        want = masks[n]
        assert ev.sat(CGood(group, phi))[0] == want
        for p in sys.points():
            assert eval_cgood(sys, p, group, phi) == bool(want >> ev.index[p] & 1)
