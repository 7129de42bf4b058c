"""Shared test machinery: bundled fixtures, random small systems, oracles."""
from __future__ import annotations

import dataclasses
import itertools
import random
from fractions import Fraction
from functools import lru_cache
from pathlib import Path

from hypothesis import strategies as st

from epiban.scenario import load_scenario, parse_scenario
from epiban.syntax import (Always, AlwaysPast, And, Believes, Controls, EncFrom, EncodingEq, Exists,
                           Extract, Fresh, Good, Iff, Implies, Know, Next, Not, Or, Prev, Prim,
                           ProbGE, PublicKey, Received, Said, Sees, Sent, SharedKey, Substr, Top,
                           Var)
from epiban.system import build_system
from epiban.terms import (Agent, Atom, Enc, FormulaMsg, Key, Nonce, Pair, Pairing, Plaintext,
                          self_atom)

FIXTURE_DIR = Path(__file__).resolve().parent.parent / "src" / "epiban" / "fixtures"
SOUNDNESS = ("keyexchange", "pubkey", "runenc")
ALL_FIXTURES = tuple(sorted(p.stem for p in FIXTURE_DIR.glob("*.scn")))


def fixture_path(name: str) -> Path:
    return FIXTURE_DIR / f"{name}.scn"


@lru_cache(maxsize=None)
def fixture(name: str):
    return build_system(load_scenario(fixture_path(name)))


# ------------------------------------------------------------ random systems

RAND_TERMS = ["enc((n1, a), k1)", "enc(n2, k2)", "(n1, n2)", "enc((n3, b), k1)"]
RAND_STRINGS = ["[enc((n1, a), k1)]", "[enc(n2, k2)]", "[(n1, n2)]", "[enc((n3, b), k1)]",
                "'n1'", "'n2'", "'n3'", "'k1'", "'k2'"]


def random_scenario_text(seed: int, agents=("a", "b", "c"), max_runs: int = 4,
                         max_horizon: int = 3) -> str:
    """A small well-formed scenario; hypotheses H0-H5 may or may not hold."""
    rng = random.Random(seed)
    ags = list(agents[: rng.choice((2, 3))])
    T = rng.randint(1, max_horizon)
    nruns = rng.randint(1, max_runs)
    lines = ["epiban-scenario 1", f"name rand{seed}", f"agents {' '.join(ags)}",
             "symkeys k1 k2", "nonces n1 n2 n3"]
    lines += [f"term {t}" for t in RAND_TERMS]
    lines += [f"horizon {T}", f"fresh {rng.randint(0, 1)}", f"dolev-yao {' '.join(ags)}"]
    base = [rng.sample(["k1", "k2", "n1", "n2", "n3"], rng.randint(0, 3)) for _ in ags]
    for rid in range(nruns):
        lines += ["", f"run r{rid}", f"  good {rng.choice(('yes', 'yes', 'no'))}"]
        if rng.random() < 0.5:
            # run-dependent encoding of n2 under k2
            lines.append(f"  enc 'n2' k2 = c{rng.randint(0, 1)}")
        for ag, items in zip(ags, base):
            items = list(items)
            if rng.random() < 0.3:
                items.append(rng.choice(["k1", "n1", "n2"]))
            if items:
                lines.append(f"  init {ag} : {' '.join(sorted(set(items)))}")
        for rnd in range(1, T + 1):
            evs = []
            for _ in range(rng.randint(0, 2)):
                src, dst = rng.sample(ags, 2)
                s = rng.choice(RAND_STRINGS)
                evs.append(f"{src} -> {dst} : {s}")
                if rng.random() < 0.8:
                    evs.append(f"{dst} <- {s}")
            if evs:
                lines.append(f"  round {rnd}")
                lines += [f"    {e}" for e in evs]
        for m in range(T + 1):
            if rng.random() < 0.4:
                lines.append(f"  prop {m} : {rng.choice(('p', 'q'))}")
        lines.append("end")
    ids = [f"r{i}" for i in range(nruns)]
    rng.shuffle(ids)
    cut = rng.randint(1, nruns)
    for name, group in (("c0", ids[:cut]), ("c1", ids[cut:])):
        if group:
            ws = [rng.randint(1, 4) for _ in group]
            tot = sum(ws)
            parts = ", ".join(f"{r} = {Fraction(w, tot)}" for r, w in zip(group, ws))
            lines.append(f"cell {name} : {parts}")
    return "\n".join(lines) + "\n"


def random_system(seed: int, **kw):
    return build_system(parse_scenario(random_scenario_text(seed, **kw)))


RANDOM_SEEDS = tuple(range(60))


# ------------------------------------------------------- closure oracle

def naive_closure(seeds, universe, enc_map, variant="standard", me=None):
    """Saturate by applying every rule to every candidate until nothing new.

    Deliberately naive: each pass rebuilds all one-step consequences of the
    current set from scratch.
    """
    S = set(seeds)
    universe = set(universe)
    while True:
        new = set()
        for s in S:
            if isinstance(s, Pairing):
                new |= {s.left, s.right}
        for s, t in itertools.product(S, S):
            if Pairing(s, t) in universe:
                new.add(Pairing(s, t))
        for (body, k), c in enc_map.items():
            if c in S and self_atom(k.inverse) in S:
                new.add(body)
            if self_atom(k) in S:
                if variant == "standard" and body in S:
                    new.add(c)
                if (variant == "nonforging" and isinstance(body, Pairing)
                        and body.right == Atom(me) and body.left in S):
                    new.add(c)
        if new <= S:
            return frozenset(S)
        S |= new


def random_closure_instance(rng: random.Random, max_size: int = 12):
    """(seeds, universe, enc_map) with |universe| <= max_size."""
    from epiban.terms import string_closure
    while True:
        keys = [Key("k1"), Key("k2"), Key("kp", "pub")]
        atoms = [Atom(x) for x in ("n1", "n2", "a", "b")] + [self_atom(k) for k in keys]
        atoms.append(self_atom(Key("kp", "priv")))
        pool = list(atoms)
        for _ in range(rng.randint(0, 3)):
            pool.append(Pairing(rng.choice(pool), rng.choice(pool)))
        enc_map = {}
        for n in range(rng.randint(0, 4)):
            body, k = rng.choice(pool), rng.choice(keys)
            if (body, k) not in enc_map:
                enc_map[(body, k)] = Atom(f"c{n}")
                pool.append(enc_map[(body, k)])
        for _ in range(rng.randint(0, 2)):
            pool.append(Pairing(rng.choice(pool), rng.choice(pool)))
        extra = set(pool)
        for (body, k), c in enc_map.items():
            extra |= {body, c, self_atom(k)}
        universe = string_closure(extra)
        if len(universe) <= max_size:
            seeds = set(rng.sample(sorted(universe, key=repr), rng.randint(0, min(5, len(universe)))))
            return seeds, universe, enc_map


# -------------------------------------------------------- substitution

def substitute(phi, var: str, s):
    """Replace free occurrences of Var(var) in phi with the string s."""
    if isinstance(phi, Var):
        return s if phi.name == var else phi
    if isinstance(phi, Exists) and phi.var == var:
        return phi
    if isinstance(phi, Pairing):
        return Pairing(substitute(phi.left, var, s), substitute(phi.right, var, s))
    if dataclasses.is_dataclass(phi) and not isinstance(phi, type):
        if isinstance(phi, (FormulaMsg, Key, Nonce, Agent, Plaintext, Atom)):
            return phi
        kw = {f.name: substitute(getattr(phi, f.name), var, s) for f in dataclasses.fields(phi)}
        return type(phi)(**kw)
    return phi


# ------------------------------------------------------ AST strategies

AGENTS = ("a", "b", "c")
_ag = st.sampled_from(AGENTS)
_base_term = st.sampled_from([Nonce("n1"), Nonce("n2"), Plaintext("t1"), Agent("a"), Key("k1"),
                              Key("kp", "pub"), Key("kp", "priv"), Nonce("nonce"),
                              Agent("enc"), Key("x", "sym")])
_atom = st.sampled_from([Atom("n1"), Atom("c 1"), Atom("it's"), Atom("fm:x"), Atom("")])
_frac = st.sampled_from([Fraction(0), Fraction(1, 2), Fraction(3, 4), Fraction(1)])


def terms(depth: int = 3):
    return st.recursive(_base_term, lambda t: st.one_of(
        st.builds(Pair, t, t), st.builds(Enc, t, st.sampled_from([Key("k1"), Key("kp", "pub")]))),
        max_leaves=depth * 2)


def strings(vars=()):
    leaves = _atom if not vars else st.one_of(_atom, st.sampled_from([Var(v) for v in vars]))
    return st.recursive(leaves, lambda s: st.builds(Pairing, s, s), max_leaves=4)


def core_formulas(max_leaves: int = 12, future: bool = True, vars=(), agents=AGENTS,
                  term_pool=None, string_pool=None, exists: bool = True):
    """Random core-logic ASTs (closed unless ``vars`` is given).

    With ``term_pool``/``string_pool`` the atoms draw from a system's
    vocabulary, so the formulas can be evaluated there.
    """
    ag = st.sampled_from(tuple(agents))
    tm = terms(2) if term_pool is None else st.sampled_from(tuple(term_pool))

    def strs(bound):
        if string_pool is None:
            return strings(bound)
        leaves = st.sampled_from(tuple(string_pool))
        if bound:
            leaves = st.one_of(leaves, st.sampled_from([Var(v) for v in bound]))
        return leaves

    @st.composite
    def atoms(draw, bound):
        s = strs(bound)
        kinds = [st.just(Top()), st.just(Good()), st.builds(Prim, st.sampled_from(["p", "q", "done"])),
                 st.builds(Sent, ag, s), st.builds(Received, ag, s),
                 st.builds(Extract, ag, tm), st.builds(EncodingEq, tm, s),
                 st.builds(Substr, s, s)]
        return draw(st.one_of(kinds))

    def extend(children):
        ops = [st.builds(Not, children), st.builds(And, children, children),
               st.builds(Or, children, children), st.builds(Implies, children, children),
               st.builds(Iff, children, children), st.builds(Know, ag, children),
               st.builds(ProbGE, ag, _frac, children), st.builds(Prev, children),
               st.builds(AlwaysPast, children)]
        if future:
            ops += [st.builds(Next, children), st.builds(Always, children)]
        return st.one_of(ops)

    closed = st.recursive(atoms(tuple(vars)), extend, max_leaves=max_leaves)
    if not exists:
        return closed

    @st.composite
    def with_exists(draw):
        v = draw(st.sampled_from(["x", "y"]))
        inner = draw(st.recursive(atoms(tuple(vars) + (v,)), extend, max_leaves=max_leaves // 2))
        return Exists(v, inner)

    return st.one_of(closed, with_exists(), st.builds(And, closed, with_exists()))


def system_formulas(sys, **kw):
    """core_formulas over the vocabulary of ``sys``."""
    pool = [s for s in sys.strings if isinstance(s, Atom)][:8] + [Atom("nowhere")]
    return core_formulas(agents=sys.agents, term_pool=sorted(sys.terms, key=repr),
                         string_pool=pool, **kw)


def ban_messages(formulas=None):
    leaf = _base_term
    return st.recursive(leaf, lambda m: st.one_of(
        st.builds(Pair, m, m),
        st.builds(EncFrom, m, _ag, st.sampled_from([Key("k1"), Key("kp", "pub")]))),
        max_leaves=4)


def ban_formulas(controls: bool = True, max_leaves: int = 8):
    key = st.sampled_from([Key("k1"), Key("k2")])
    leaves = st.one_of(st.builds(Sees, _ag, ban_messages()), st.builds(Said, _ag, ban_messages()),
                       st.builds(SharedKey, _ag, key, _ag),
                       st.builds(PublicKey, st.just(Key("kp", "pub")), _ag),
                       st.builds(Fresh, ban_messages()))

    def extend(f):
        ops = [st.builds(Believes, _ag, f), st.builds(Said, _ag, f.map(lambda x: x)),
               st.builds(Sees, _ag, st.builds(Pair, f, _base_term)),
               st.builds(Fresh, f)]
        if controls:
            ops.append(st.builds(Controls, _ag, f))
        return st.one_of(ops)

    return st.recursive(leaves, extend, max_leaves=max_leaves)


# ------------------------------------------- seeded generators (no hypothesis)

_R_AGENTS = ("a", "b", "c")
_R_BASE = (Nonce("n1"), Nonce("n2"), Plaintext("t1"), Agent("a"), Key("k1"), Key("kp", "pub"),
           Key("kp", "priv"), Agent("enc"), Nonce("nonce"))
_R_ATOMS = (Atom("n1"), Atom("c 1"), Atom("it's"), Atom(""), Atom("fm:x"))


def random_term(rng: random.Random, depth: int = 2):
    if depth == 0 or rng.random() < 0.4:
        return rng.choice(_R_BASE)
    if rng.random() < 0.5:
        return Pair(random_term(rng, depth - 1), random_term(rng, depth - 1))
    return Enc(random_term(rng, depth - 1), rng.choice((Key("k1"), Key("kp", "pub"))))


def random_string(rng: random.Random, bound=(), depth: int = 2):
    if depth == 0 or rng.random() < 0.6:
        if bound and rng.random() < 0.5:
            return Var(rng.choice(bound))
        return rng.choice(_R_ATOMS)
    return Pairing(random_string(rng, bound, depth - 1), random_string(rng, bound, depth - 1))


def random_core(rng: random.Random, depth: int = 4, bound=()):
    from epiban.syntax import CGood
    if depth == 0 or rng.random() < 0.25:
        k = rng.randrange(8)
        s = lambda: random_string(rng, bound)  # noqa: E731
        return [Top(), Good(), Prim(rng.choice(("p", "q"))), Sent(rng.choice(_R_AGENTS), s()),
                Received(rng.choice(_R_AGENTS), s()), Extract(rng.choice(_R_AGENTS), random_term(rng)),
                EncodingEq(random_term(rng), s()), Substr(s(), s())][k]
    sub = lambda: random_core(rng, depth - 1, bound)  # noqa: E731
    k = rng.randrange(14)
    ag = rng.choice(_R_AGENTS)
    if k == 0:
        return Not(sub())
    if k <= 4:
        return [And, Or, Implies, Iff][k - 1](sub(), sub())
    if k == 5:
        return Know(ag, sub())
    if k == 6:
        return ProbGE(ag, Fraction(rng.randint(0, 4), 4), sub())
    if k <= 10:
        return [Next, Prev, Always, AlwaysPast][k - 7](sub())
    if k == 11:
        return CGood(tuple(sorted(set(rng.sample(_R_AGENTS, 2)))), sub())
    v = rng.choice("xyz")
    return Exists(v, random_core(rng, depth - 1, bound + (v,)))


def random_ban_message(rng: random.Random, depth: int = 2):
    if depth == 0 or rng.random() < 0.4:
        return rng.choice(_R_BASE)
    if rng.random() < 0.5:
        return Pair(random_ban_message(rng, depth - 1), random_ban_message(rng, depth - 1))
    return EncFrom(random_ban_message(rng, depth - 1), rng.choice(_R_AGENTS),
                   rng.choice((Key("k1"), Key("kp", "pub"))))


def random_ban(rng: random.Random, depth: int = 3, controls: bool = True):
    ag = rng.choice(_R_AGENTS)
    if depth == 0 or rng.random() < 0.3:
        k = rng.randrange(5)
        if k == 0:
            return Sees(ag, random_ban_message(rng))
        if k == 1:
            return Said(ag, random_ban_message(rng))
        if k == 2:
            return SharedKey(ag, rng.choice((Key("k1"), Key("k2"))), rng.choice(_R_AGENTS))
        if k == 3:
            return PublicKey(Key("kp", "pub"), ag)
        return Fresh(random_ban_message(rng))
    sub = random_ban(rng, depth - 1, controls)
    k = rng.randrange(5 if controls else 4)
    if k == 0:
        return Believes(ag, sub)
    if k == 1:
        return Said(ag, sub)
    if k == 2:
        return Sees(ag, Pair(sub, random_ban_message(rng, 1)))
    if k == 3:
        return Fresh(sub)
    return Controls(ag, sub)
