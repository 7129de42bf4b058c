"""Two-level message model: structured terms, concrete strings, encodings.

Agents send and receive concrete strings.  A run's encoding table says which
string represents which term; encryption on strings is run dependent, so two
runs may disagree about what a ciphertext string is the encryption of.
"""
from __future__ import annotations

from dataclasses import dataclass, fields
from typing import Dict, Iterable, Iterator, List, Mapping, Optional, Tuple


class UnknownTerm(KeyError):
    pass


def _cached_hash(self):
    h = self.__dict__.get("_h")
    if h is None:
        h = hash((type(self).__name__,) + tuple(getattr(self, f.name) for f in fields(self)))
        object.__setattr__(self, "_h", h)
    return h


def _dag_eq(self, other):
    # Formulas share subtrees heavily (nested E^good, translations); the
    # generated __eq__ would re-compare a shared child once per path to it.
    if self is other:
        return True
    if type(self) is not type(other):
        return NotImplemented
    if hash(self) != hash(other):
        return False
    proven = set()
    todo = [(self, other)]
    while todo:
        a, b = todo.pop()
        if a is b or (id(a), id(b)) in proven:
            continue
        if type(a) is not type(b):
            return False
        if isinstance(a, tuple):
            if len(a) != len(b):
                return False
            todo.extend(zip(a, b))
        elif hasattr(a, "__dataclass_fields__") and type(a).__eq__ is _dag_eq:
            if hash(a) != hash(b):
                return False
            todo.extend((getattr(a, f), getattr(b, f)) for f in a.__dataclass_fields__)
        elif a != b:
            return False
        proven.add((id(a), id(b)))
    return True


def node(cls):
    """Frozen dataclass whose (deep) hash is computed once."""
    cls = dataclass(frozen=True)(cls)
    cls.__hash__ = _cached_hash
    cls.__eq__ = _dag_eq
    return cls


# ---------------------------------------------------------------- terms

class MessageTerm:
    __slots__ = ()


@node
class Plaintext(MessageTerm):
    name: str


@node
class Nonce(MessageTerm):
    name: str


@node
class Agent(MessageTerm):
    name: str


KEY_KINDS = ("sym", "pub", "priv")


@node
class Key(MessageTerm):
    name: str
    kind: str = "sym"

    def __post_init__(self):
        if self.kind not in KEY_KINDS:
            raise ValueError(f"bad key kind {self.kind!r}")

    @property
    def symmetric(self) -> bool:
        return self.kind == "sym"

    @property
    def inverse(self) -> "Key":
        if self.kind == "sym":
            return self
        return Key(self.name, "priv" if self.kind == "pub" else "pub")

    @property
    def label(self) -> str:
        if self.kind == "sym":
            return self.name
        return f"{self.kind}({self.name})"


@node
class Pair(MessageTerm):
    left: object
    right: object


@node
class Enc(MessageTerm):
    body: object
    key: Key


@node
class FormulaMsg(MessageTerm):
    body: object  # a core Formula


BASE_TERMS = (Plaintext, Nonce, Agent, Key)


def subterms(m) -> Iterator:
    yield m
    if isinstance(m, Pair):
        yield from subterms(m.left)
        yield from subterms(m.right)
    elif isinstance(m, Enc):
        yield from subterms(m.body)
        yield m.key


def term_depth(m) -> int:
    if isinstance(m, Pair):
        return 1 + max(term_depth(m.left), term_depth(m.right))
    if isinstance(m, Enc):
        return 1 + term_depth(m.body)
    return 0


# ------------------------------------------------------ concrete strings

class ConcreteString:
    __slots__ = ()


@node
class Atom(ConcreteString):
    name: str

    def __str__(self):
        return self.name


@node
class Pairing(ConcreteString):
    left: object
    right: object

    def __str__(self):
        return f"<{self.left}, {self.right}>"


def components(s) -> Tuple:
    if isinstance(s, Pairing):
        return (s.left, s.right)
    return ()


def string_closure(strings: Iterable) -> frozenset:
    """Close a set of strings under taking pairing components."""
    out = set()
    todo = list(strings)
    while todo:
        s = todo.pop()
        if s in out:
            continue
        out.add(s)
        todo.extend(components(s))
    return frozenset(out)


FORMULA_PREFIX = "fm:"


def self_atom(m) -> Atom:
    """The atom a base term or formula-message represents itself by."""
    if isinstance(m, Key):
        return Atom(m.label)
    if isinstance(m, (Plaintext, Nonce, Agent)):
        return Atom(m.name)
    if isinstance(m, FormulaMsg):
        from .syntax import print_canonical
        return Atom(FORMULA_PREFIX + print_canonical(m.body))
    raise TypeError(f"{m!r} does not represent itself")


def default_enc_atom(s, k: Key) -> Atom:
    return Atom(f"{{{s}}}{k.label}")


# --------------------------------------------------------- encoding table

@dataclass(frozen=True)
class Diagnostic:
    code: str
    message: str
    witness: Tuple = ()

    def as_dict(self):
        return {"code": self.code, "message": self.message,
                "witness": [str(w) for w in self.witness]}


class EncodingTable:
    """Per-run map from terms to strings plus the run's encryption function.

    ``term_map`` is total over the declared term universe; ``enc_map`` maps
    (string, key) pairs to the ciphertext atom of this run.
    """

    def __init__(self, term_map: Mapping, enc_map: Mapping):
        self.term_map: Dict = dict(term_map)
        self.enc_map: Dict[Tuple[object, Key], Atom] = dict(enc_map)
        self._dec: Optional[Dict[object, List[Tuple[object, Key]]]] = None

    @classmethod
    def build(cls, terms: Iterable, enc_map: Optional[Mapping] = None) -> "EncodingTable":
        """Derive a coherent table for ``terms`` (and their subterms).

        Encryptions with no entry in ``enc_map`` get a run-independent
        default ciphertext atom.
        """
        enc = dict(enc_map or {})
        tmap: Dict = {}

        def go(m):
            if m in tmap:
                return tmap[m]
            if isinstance(m, Pair):
                s = Pairing(go(m.left), go(m.right))
            elif isinstance(m, Enc):
                body = go(m.body)
                go(m.key)
                s = enc.setdefault((body, m.key), default_enc_atom(body, m.key))
            else:
                s = self_atom(m)
            tmap[m] = s
            return s

        for m in terms:
            go(m)
        return cls(tmap, enc)

    def encode(self, m) -> ConcreteString:
        try:
            return self.term_map[m]
        except KeyError:
            raise UnknownTerm(m) from None

    def enc(self, s, k: Key) -> Optional[Atom]:
        return self.enc_map.get((s, k))

    def decryptions(self, c) -> List[Tuple[object, Key]]:
        """All (s, k) with enc(s, k) == c."""
        if self._dec is None:
            dec: Dict = {}
            for (s, k), out in self.enc_map.items():
                dec.setdefault(out, []).append((s, k))
            self._dec = dec
        return self._dec.get(c, [])

    def strings(self) -> frozenset:
        out = set(self.term_map.values())
        for (s, k), c in self.enc_map.items():
            out.update((s, c, self_atom(k)))
        return string_closure(out)

    def __eq__(self, other):
        return (isinstance(other, EncodingTable) and self.term_map == other.term_map
                and self.enc_map == other.enc_map)

    __hash__ = None


def encode(m, enc: EncodingTable) -> ConcreteString:
    return enc.encode(m)


def validate_encoding(enc: EncodingTable) -> List[Diagnostic]:
    diags: List[Diagnostic] = []
    tm = enc.term_map
    base_atoms = set()
    for m, s in tm.items():
        if isinstance(m, BASE_TERMS) or isinstance(m, FormulaMsg):
            want = self_atom(m)
            base_atoms.add(want)
            if s != want:
                diags.append(Diagnostic("self-representation", "self-representation violated", (m, s)))
        elif isinstance(m, Pair):
            if m.left in tm and m.right in tm and s != Pairing(tm[m.left], tm[m.right]):
                diags.append(Diagnostic("pairing", "pairing homomorphism violated", (m, s)))
        elif isinstance(m, Enc):
            if m.body in tm and s != enc.enc(tm[m.body], m.key):
                diags.append(Diagnostic("enc-coherence", "encryption coherence violated", (m, s)))
    seen: Dict = {}
    for (s, k), c in sorted(enc.enc_map.items(), key=lambda kv: repr(kv)):
        if c in seen:
            diags.append(Diagnostic("enc-unique", "encryption-uniqueness violated",
                                    (seen[c], (s, k), c)))
        else:
            seen[c] = (s, k)
        if c in base_atoms or isinstance(c, Pairing):
            diags.append(Diagnostic("enc-distinct",
                                    "ciphertext collides with a base atom or pairing", ((s, k), c)))
    by_string: Dict = {}
    for m, s in sorted(tm.items(), key=lambda kv: repr(kv)):
        if s in by_string and by_string[s] != m:
            diags.append(Diagnostic("unique-encoding", "two terms share an encoding",
                                    (by_string[s], m, s)))
        by_string.setdefault(s, m)
    return diags


class SubstringRelation:
    """The least reflexive, transitive relation closed under pairing
    injection and encryption-body injection for one run."""

    def __init__(self, enc: EncodingTable, universe: Optional[Iterable] = None):
        self.enc = enc
        self.universe = frozenset(universe) if universe is not None else enc.strings()
        self._below: Dict = {}

    def children(self, t) -> List:
        kids = list(components(t))
        kids.extend(s for s, _ in self.enc.decryptions(t))
        return kids

    def below(self, t) -> frozenset:
        """Every s with s ⊑ t."""
        hit = self._below.get(t)
        if hit is not None:
            return hit
        out = {t}
        stack = [t]
        while stack:
            for c in self.children(stack.pop()):
                if c not in out:
                    out.add(c)
                    stack.append(c)
        res = frozenset(out)
        self._below[t] = res
        return res

    def __contains__(self, pair) -> bool:
        s, t = pair
        return s in self.below(t)

    def pairs(self) -> frozenset:
        return frozenset((s, t) for t in self.universe for s in self.below(t))


def substring_rel(enc: EncodingTable, universe: Optional[Iterable] = None) -> SubstringRelation:
    return SubstringRelation(enc, universe)
