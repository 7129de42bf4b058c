"""Regenerate the bundled scenario fixtures in src/epiban/fixtures/.

Soundness fixtures enumerate adversary choices with itertools.product; each
nonprobabilistic choice of the adversary becomes a cell, and whether it
guessed a secret is the probabilistic part.
"""
from __future__ import annotations

import argparse
import itertools
from fractions import Fraction
from pathlib import Path

OUT = Path(__file__).resolve().parent.parent / "src" / "epiban" / "fixtures"


class Scn:
    def __init__(self, name, header):
        self.lines = ["epiban-scenario 1", f"name {name}"] + header
        self.cells = {}

    def run(self, rid, good=True, enc=(), init=(), rounds=None, props=()):
        out = ["", f"run {rid}", f"  good {'yes' if good else 'no'}"]
        out += [f"  enc {e}" for e in enc]
        out += [f"  init {ag} : {items}" for ag, items in init if items]
        for rnd in sorted(rounds or {}):
            out.append(f"  round {rnd}")
            out += [f"    {ev}" for ev in rounds[rnd]]
        out += [f"  prop {t} : {p}" for t, p in props]
        out.append("end")
        self.lines += out

    def cell(self, name, rid, w):
        self.cells.setdefault(name, []).append((rid, Fraction(w)))

    def text(self):
        tail = [""]
        for name, ws in self.cells.items():
            assert sum(w for _, w in ws) == 1, name
            tail.append(f"cell {name} : " + ", ".join(f"{r} = {w}" for r, w in ws))
        return "\n".join(self.lines + tail) + "\n"


def deliver(rounds, rnd, src, dst, s, eaves=None):
    evs = rounds.setdefault(rnd, [])
    evs += [f"{src} -> {dst} : {s}", f"{dst} <- {s}"]
    if eaves:
        evs.append(f"{eaves} <- {s}")


def keyexchange():
    """b hands a a session key under a long-term key; formula sent first."""
    F = "#(b sees nb)"
    c1, c2, c3, cj = f"[enc(({F}, b), kab)]", "[enc((kab, b), kl)]", "[enc((na, a), kab)]", "[enc((ne, e), ke)]"
    scn = Scn("keyexchange", [
        "agents a b e", "symkeys kab kl ke", "nonces na nb ne",
        f"term enc(({F}, b), kab)", "term enc((kab, b), kl)", "term enc((na, a), kab)",
        "term enc((ne, e), ke)", "formula b sees nb",
        "horizon 4", "fresh 2", "dolev-yao a b e", "nonforging a b", "honest a b",
        "protocol a : na kl", "protocol b : nb kab kl", "protocol e : ne ke", "guesses e : kab"])
    for guess, eaves, junk in itertools.product((0, 1), repeat=3):
        rid = f"g{guess}v{eaves}j{junk}"
        spy = "e" if eaves else None
        rounds = {}
        deliver(rounds, 1, "b", "a", c1, spy)
        if junk:
            deliver(rounds, 1, "e", "a", cj)
        deliver(rounds, 2, "b", "a", c2, spy)
        deliver(rounds, 3, "a", "b", c3, spy)
        if guess and eaves:
            deliver(rounds, 4, "e", "b", "'na'")
        scn.run(rid, good=not guess, rounds=rounds,
                init=[("a", "na kl"), ("b", "nb kab kl"), ("e", "ne ke" + (" kab" if guess else ""))],
                props=[(3, "done")] if not guess else [])
        scn.cell(f"v{eaves}j{junk}", rid, "1/4" if guess else "3/4")
    return scn


def pubkey():
    """Public-key nonce exchange plus a server handing out a session key."""
    F = "#(s sees ns)"
    m1, m2, m3 = "[enc((na, a), pub(kb))]", "[enc(((na, nb), b), pub(ka))]", "[enc((nb, a), pub(kb))]"
    sa, sb, forged = "[enc((kab, s), kas)]", "[enc((kab, s), kbs)]", "[enc((ne, a), pub(kb))]"
    scn = Scn("pubkey", [
        "agents a b s e", "symkeys kab kas kbs", "asymkeys ka kb", "owner ka a", "owner kb b",
        "nonces na nb ns ne",
        "term enc((na, a), pub(kb))", "term enc(((na, nb), b), pub(ka))", "term enc((nb, a), pub(kb))",
        "term enc((kab, s), kas)", "term enc((kab, s), kbs)", "term enc((ne, a), pub(kb))",
        f"term ({F}, s)", "formula s sees ns",
        "horizon 4", "fresh 1", "dolev-yao a b s e", "nonforging a b s", "honest a b s",
        "protocol a : na kas", "protocol b : nb kbs", "protocol s : ns kab kas kbs",
        "protocol e : ne", "guesses e : priv(kb)"])
    pubs = "pub(ka) pub(kb)"
    for guess, eaves, forge in itertools.product((0, 1), repeat=3):
        rid = f"g{guess}v{eaves}f{forge}"
        spy = "e" if eaves else None
        rounds = {}
        deliver(rounds, 1, "a", "b", m1, spy)
        deliver(rounds, 1, "s", "a", sa)
        deliver(rounds, 1, "s", "e", f"[({F}, s)]")
        if forge:
            deliver(rounds, 1, "e", "b", forged)
        deliver(rounds, 2, "b", "a", m2, spy)
        deliver(rounds, 2, "s", "b", sb)
        deliver(rounds, 3, "a", "b", m3, spy)
        if guess and eaves:
            deliver(rounds, 4, "e", "a", "'na'")
        scn.run(rid, good=not guess, rounds=rounds, init=[
            ("a", f"na kas priv(ka) {pubs}"), ("b", f"nb kbs priv(kb) {pubs}"),
            ("s", f"ns kab kas kbs {pubs}"),
            ("e", f"ne {pubs}" + (" priv(kb)" if guess else ""))])
        scn.cell(f"v{eaves}f{forge}", rid, "1/2")
    return scn


def runenc():
    """The adversary's ciphertext 'x' encrypts a different nonce per run."""
    F = "#(a sees na)"
    scn = Scn("runenc", [
        "agents a b e", "symkeys kab ke", "nonces na nb n1 n2",
        "term enc(n1, ke)", "term enc(n2, ke)", "term enc((nb, b), kab)",
        "term enc((na, a), kab)", "formula a sees na", "orphans x",
        "horizon 4", "fresh 2", "dolev-yao a b e", "nonforging a b", "honest a b",
        "protocol a : na kab", "protocol b : nb kab", "protocol e : ke", "guesses e : n1 n2 kab"])
    for pick, eaves, guess in itertools.product((1, 2), (0, 1), (0, 1)):
        rid = f"n{pick}v{eaves}g{guess}"
        spy = "e" if eaves else None
        rounds = {}
        deliver(rounds, 1, "a", "b", f"[{F}]", spy)
        deliver(rounds, 1, "e", "a", "'x'")
        deliver(rounds, 2, "b", "a", "[enc((nb, b), kab)]", spy)
        deliver(rounds, 2, "a", "b", "'x'")
        deliver(rounds, 3, "a", "b", "[enc((na, a), kab)]", spy)
        if guess and eaves:
            deliver(rounds, 4, "e", "a", "'nb'")
        scn.run(rid, good=not guess, enc=[f"'n{pick}' ke = x"], rounds=rounds, init=[
            ("a", "na kab"), ("b", "nb kab"),
            ("e", f"ke n{pick}" + (" kab" if guess else ""))])
        scn.cell(f"v{eaves}", rid, {(1, 0): "3/8", (2, 0): "3/8", (1, 1): "1/8", (2, 1): "1/8"}[pick, guess])
    return scn


def said_first():
    """The forwarder holds a ciphertext it cannot open; another run encrypts
    a different nonce to the same string."""
    scn = Scn("said-first", [
        "agents a b c", "symkeys k", "nonces n1 n2", "term enc(n1, k)", "term enc(n2, k)",
        "orphans c1", "horizon 3", "fresh 0", "dolev-yao a b c", "nonforging a c",
        "protocol b : n1 k", "guesses b : n2"])
    for rid, enc, init_b in (("r", "'n1' k = c1", "n1 k"), ("rp", "'n2' k = c1", "n1 n2 k")):
        rounds = {}
        deliver(rounds, 1, "b", "a", "'n1'")
        deliver(rounds, 2, "b", "a", "'c1'")
        deliver(rounds, 3, "a", "c", "'c1'")
        scn.run(rid, enc=[enc], rounds=rounds, init=[("b", init_b)])
        scn.cell("c", rid, "1/2")
    return scn


def said_nested():
    """m2 = enc(n1, k2).  In r the server builds s = [m2]; in rp the
    adversary sends the same string s, which there encrypts its own nonce."""
    scn = Scn("said-nested", [
        "agents a b srv e", "symkeys k k2 ke", "nonces n1 ns ne",
        "term enc((enc(n1, k2), b), k)", "term enc(ne, ke)", "term ns",
        "orphans s y", "horizon 3", "fresh 0", "dolev-yao a b srv e", "nonforging a b",
        "protocol a : k", "protocol b : k", "protocol srv : ns k2", "protocol e : ke",
        "guesses srv : n1", "guesses e : ne"])
    rounds_r, rounds_rp = {}, {}
    deliver(rounds_r, 1, "srv", "b", "'s'")
    deliver(rounds_r, 1, "srv", "a", "'ns'")
    deliver(rounds_rp, 1, "e", "b", "'s'")
    for rounds in (rounds_r, rounds_rp):
        deliver(rounds, 2, "b", "a", "'y'")
    # each side holds its nonce only in the run where it builds s
    init = [("a", "k"), ("b", "k")]
    scn.run("r", enc=["'n1' k2 = s", "<'s', 'b'> k = y"], rounds=rounds_r,
            init=init + [("srv", "n1 ns k2"), ("e", "ke")])
    scn.run("rp", enc=["'ne' ke = s", "<'s', 'b'> k = y"], rounds=rounds_rp,
            init=init + [("srv", "ns k2"), ("e", "ne ke")])
    scn.cell("c", "r", "1/2")
    scn.cell("c", "rp", "1/2")
    return scn


def selfenc():
    """Receiver already holds the key and the body, so it derives the
    ciphertext before the sender has said anything."""
    scn = Scn("selfenc", [
        "agents a b e", "symkeys kab", "nonces na", "term enc((na, b), kab)",
        "horizon 2", "fresh 0", "dolev-yao a b e", "nonforging a b",
        "protocol a : na kab", "protocol b : na kab"])
    rounds = {}
    deliver(rounds, 1, "b", "a", "[enc((na, b), kab)]")
    scn.run("r", rounds=rounds, init=[("a", "na kab"), ("b", "na kab")])
    scn.cell("c", "r", "1")
    return scn


def mixed():
    """Small non-soundness fixture with one bad run."""
    scn = Scn("mixed", [
        "agents a b", "nonces na", "horizon 2", "fresh 0", "dolev-yao a b", "protocol a : na"])
    r2 = {}
    deliver(r2, 1, "a", "b", "'na'")
    scn.run("r1", init=[("a", "na")], props=[(1, "p")])
    scn.run("r2", good=False, rounds=r2, init=[("a", "na")])
    scn.cell("c", "r1", "1/2")
    scn.cell("c", "r2", "1/2")
    return scn


def zeroweight():
    """A cell containing a run of weight 0 that an agent can isolate."""
    scn = Scn("zeroweight", [
        "agents a b", "nonces na", "horizon 1", "fresh 0", "dolev-yao a b", "protocol a : na"])
    r2 = {}
    deliver(r2, 1, "a", "b", "'na'")
    scn.run("r1", init=[("a", "na")])
    scn.run("r2", rounds=r2, init=[("a", "na")])
    scn.cell("c", "r1", "1")
    scn.cell("c", "r2", "0")
    return scn


SOUNDNESS = (keyexchange, pubkey, runenc)
REGRESSION = (said_first, said_nested, selfenc, mixed, zeroweight)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", type=Path, default=OUT)
    args = ap.parse_args(argv)
    args.out.mkdir(parents=True, exist_ok=True)
    for fn in SOUNDNESS + REGRESSION:
        scn = fn()
        name = fn.__name__.replace("_", "-")
        path = args.out / f"{name}.scn"
        path.write_text(scn.text())
        print(f"wrote {path}")


if __name__ == "__main__":
    main()
