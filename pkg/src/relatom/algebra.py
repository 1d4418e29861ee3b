"""Complex-algebra elements and terms over a finite atom structure.

Elements are atom sets with dense bit-vector storage; the Boolean
operations work on the bits, composition and converse come from the
structure's P and C relations.  Terms are small ASTs over singleton
generators and the algebraic operations, with an s-expression text form
for CLI input (see :func:`parse_term`).

The splitting predicate sigma(a, x, y) holds when x, y are distinct
identity atoms and both a and its complement meet the block of atoms
running from x to y.  Everything downstream of it (split reports, the
identity-free composition property, the per-root witness check) is
computed exhaustively over identity-atom pairs.
"""

from __future__ import annotations

import random
import re
from dataclasses import dataclass

from .structures import (
    AtomLabel,
    FiniteAtomStructure,
    StructureError,
    ValidationReport,
)


class Element:
    """A subset of a structure's atoms.  Immutable; operators are set-wise.

    Two elements combine only over the same structure object.
    """

    __slots__ = ("structure", "bits")

    def __init__(self, structure, bits):
        object.__setattr__(self, "structure", structure)
        object.__setattr__(self, "bits", bits & structure._full_mask)

    def __setattr__(self, name, value):
        raise AttributeError("Element is immutable")

    def _check(self, other):
        if not isinstance(other, Element):
            raise TypeError(f"expected Element, got {type(other).__name__}")
        if other.structure is not self.structure:
            raise StructureError("elements belong to different structures")
        return other

    def __or__(self, other):
        return Element(self.structure, self.bits | self._check(other).bits)

    def __and__(self, other):
        return Element(self.structure, self.bits & self._check(other).bits)

    def __sub__(self, other):
        return Element(self.structure, self.bits & ~self._check(other).bits)

    def __invert__(self):
        return Element(self.structure, ~self.bits & self.structure._full_mask)

    def __eq__(self, other):
        return (
            isinstance(other, Element)
            and other.structure is self.structure
            and other.bits == self.bits
        )

    def __hash__(self):
        return hash((id(self.structure), self.bits))

    def __contains__(self, label):
        return bool(self.bits >> self.structure.index_of(label) & 1)

    def __iter__(self):
        bits = self.bits
        atoms = self.structure.atoms
        while bits:
            i = (bits & -bits).bit_length() - 1
            yield atoms[i]
            bits &= bits - 1

    def __len__(self):
        return bin(self.bits).count("1")

    def __repr__(self):
        return "Element({%s})" % ", ".join(str(a) for a in self)

    @property
    def is_empty(self):
        return self.bits == 0

    def atoms(self):
        return tuple(self)

    def compose(self, other):
        """{u : P(x, y, u) for some x in self, y in other}."""
        self._check(other)
        comp = self.structure.composition_table()
        out = 0
        xbits = self.bits
        while xbits:
            i = (xbits & -xbits).bit_length() - 1
            row = comp[i]
            ybits = other.bits
            while ybits:
                j = (ybits & -ybits).bit_length() - 1
                out |= row[j]
                ybits &= ybits - 1
            xbits &= xbits - 1
        return Element(self.structure, out)

    def converse(self):
        """{u : C(x, u) for some x in self}."""
        conv = self.structure._conv
        out = 0
        bits = self.bits
        while bits:
            i = (bits & -bits).bit_length() - 1
            out |= 1 << conv[i]
            bits &= bits - 1
        return Element(self.structure, out)


def element(structure, labels=()):
    bits = 0
    for a in labels:
        bits |= 1 << structure.index_of(a)
    return Element(structure, bits)


def singleton(structure, label):
    return Element(structure, 1 << structure.index_of(label))


def empty(structure):
    return Element(structure, 0)


def top(structure):
    return Element(structure, structure._full_mask)


def identity_element(structure):
    return Element(structure, structure._ident_mask)


def diversity_element(structure):
    return Element(structure, structure._full_mask & ~structure._ident_mask)


# -- terms -------------------------------------------------------------------


class Term:
    """Abstract syntax tree over singletons and the algebra operations."""

    __slots__ = ()

    @property
    def leaf_count(self):
        raise NotImplementedError

    def __str__(self):
        return print_term(self)


@dataclass(frozen=True)
class SingletonAtom(Term):
    atom: AtomLabel

    @property
    def leaf_count(self):
        return 1


@dataclass(frozen=True)
class IdentityConst(Term):
    @property
    def leaf_count(self):
        return 0


@dataclass(frozen=True)
class ZeroConst(Term):
    @property
    def leaf_count(self):
        return 0


@dataclass(frozen=True)
class OneConst(Term):
    @property
    def leaf_count(self):
        return 0


@dataclass(frozen=True)
class Plus(Term):
    left: Term
    right: Term

    @property
    def leaf_count(self):
        return self.left.leaf_count + self.right.leaf_count


@dataclass(frozen=True)
class Meet(Term):
    left: Term
    right: Term

    @property
    def leaf_count(self):
        return self.left.leaf_count + self.right.leaf_count


@dataclass(frozen=True)
class Compose(Term):
    left: Term
    right: Term

    @property
    def leaf_count(self):
        return self.left.leaf_count + self.right.leaf_count


@dataclass(frozen=True)
class Minus(Term):
    term: Term

    @property
    def leaf_count(self):
        return self.term.leaf_count


@dataclass(frozen=True)
class Converse(Term):
    term: Term

    @property
    def leaf_count(self):
        return self.term.leaf_count


def eval_term(structure, term):
    """Evaluate a term in the complex algebra of ``structure``."""
    if isinstance(term, SingletonAtom):
        if term.atom not in structure:
            raise StructureError(f"term leaf {term.atom} is foreign to the structure")
        return singleton(structure, term.atom)
    if isinstance(term, IdentityConst):
        return identity_element(structure)
    if isinstance(term, ZeroConst):
        return empty(structure)
    if isinstance(term, OneConst):
        return top(structure)
    if isinstance(term, Plus):
        return eval_term(structure, term.left) | eval_term(structure, term.right)
    if isinstance(term, Meet):
        return eval_term(structure, term.left) & eval_term(structure, term.right)
    if isinstance(term, Compose):
        return eval_term(structure, term.left).compose(eval_term(structure, term.right))
    if isinstance(term, Minus):
        return ~eval_term(structure, term.term)
    if isinstance(term, Converse):
        return eval_term(structure, term.term).converse()
    raise StructureError(f"unknown term node {term!r}")


# Term text form, one operator per node:
#   term  := 'top' | 'bot' | 'id' | LABEL
#          | '(+ ' term term ')' | '(* ' term term ')' | '(; ' term term ')'
#          | '(- ' term ')'      | '(^ ' term ')'
# LABEL is a canonical atom label such as r(1,1) or w(1,0,1,1); + is union,
# * is intersection, ; is composition, - is complement, ^ is converse.

_TOKEN_RE = re.compile(r"[A-Za-z'_]+\(\s*\d+(?:\s*,\s*\d+)*\s*\)|[()]|[^\s()]+")

_CONSTS = {"top": OneConst, "bot": ZeroConst, "id": IdentityConst}
_BINOPS = {"+": Plus, "*": Meet, ";": Compose}
_UNOPS = {"-": Minus, "^": Converse}


def parse_term(text):
    """Parse the s-expression term grammar documented above."""
    tokens = _TOKEN_RE.findall(text)
    if not tokens:
        raise StructureError("empty term")
    pos = 0

    def parse():
        nonlocal pos
        if pos >= len(tokens):
            raise StructureError("unexpected end of term")
        tok = tokens[pos]
        pos += 1
        if tok == ")":
            raise StructureError("unexpected ')'")
        if tok != "(":
            if tok in _CONSTS:
                return _CONSTS[tok]()
            return SingletonAtom(AtomLabel.parse(tok))
        if pos >= len(tokens):
            raise StructureError("unexpected end of term")
        op = tokens[pos]
        pos += 1
        if op in _BINOPS:
            node = _BINOPS[op](parse(), parse())
        elif op in _UNOPS:
            node = _UNOPS[op](parse())
        else:
            raise StructureError(f"unknown operator {op!r}")
        if pos >= len(tokens) or tokens[pos] != ")":
            raise StructureError("expected ')'")
        pos += 1
        return node

    term = parse()
    if pos != len(tokens):
        raise StructureError(f"trailing input after term: {tokens[pos]!r}")
    return term


def print_term(term):
    if isinstance(term, SingletonAtom):
        return str(term.atom)
    if isinstance(term, IdentityConst):
        return "id"
    if isinstance(term, ZeroConst):
        return "bot"
    if isinstance(term, OneConst):
        return "top"
    if isinstance(term, Plus):
        return f"(+ {print_term(term.left)} {print_term(term.right)})"
    if isinstance(term, Meet):
        return f"(* {print_term(term.left)} {print_term(term.right)})"
    if isinstance(term, Compose):
        return f"(; {print_term(term.left)} {print_term(term.right)})"
    if isinstance(term, Minus):
        return f"(- {print_term(term.term)})"
    if isinstance(term, Converse):
        return f"(^ {print_term(term.term)})"
    raise StructureError(f"unknown term node {term!r}")


# -- splitting ---------------------------------------------------------------


def cross(structure, x, y):
    """x;1 . 1;y — computed from the algebra, not from domain/range tables.

    Equality with {a : dm(a) = x and rg(a) = y} is a tested property, not
    an assumption.  Results are cached per structure.
    """
    for v in (x, y):
        if not structure.is_identity(v):
            raise StructureError(f"cross needs identity atoms, got {v}")
    cache = structure._cache.setdefault("cross", {})
    key = (x, y)
    if key not in cache:
        t = top(structure)
        cache[key] = singleton(structure, x).compose(t) & t.compose(
            singleton(structure, y)
        )
    return cache[key]


def sigma(structure, a, x, y):
    """The splitting predicate: x, y distinct identity atoms and both
    a . (x cross y) and -a . (x cross y) are nonzero."""
    if x == y or not structure.is_identity(x) or not structure.is_identity(y):
        return False
    if x not in structure or y not in structure:
        return False
    block = cross(structure, x, y)
    return bool(a.bits & block.bits) and bool(~a.bits & block.bits)


@dataclass
class SplitReport:
    """All identity pairs split by one element."""

    element: Element
    split_pairs: tuple

    def __len__(self):
        return len(self.split_pairs)


def splits_of(structure, a):
    """Exhaustive sigma scan over ordered pairs of identity atoms."""
    idents = sorted(structure.identity)
    pairs = tuple(
        (x, y)
        for x in idents
        for y in idents
        if x != y and sigma(structure, a, x, y)
    )
    return SplitReport(a, pairs)


def decompose(structure, a):
    """(a . 1', a . -1'): the identity part and the diversity part."""
    ident = identity_element(structure)
    return a & ident, a - ident


def check_star(structure, a, b):
    """For identity-free a, b: does a;b split nothing?

    Raises if either argument meets the identity set.
    """
    ident_bits = structure._ident_mask
    if a.bits & ident_bits or b.bits & ident_bits:
        raise StructureError("check_star needs identity-free elements")
    return not splits_of(structure, a.compose(b)).split_pairs


def diversity_product_formula_check(structure):
    """The six-variable implication: whenever a, b are diversity atoms,
    x != y are identity atoms, and c, d both run from x to y (via P),
    P(a,b,c) forces P(a,b,d).

    Checked for all assignments, with sorts pruned from the stored P:
    c ranges over the products of (a,b), then x, y, d are read off the
    identity triples.
    """
    rep = ValidationReport()
    atoms = structure.atoms
    n = len(atoms)
    ident = set(structure._ident_idx)
    comp = structure.composition_table()
    trip = structure._trip

    # left_of[x] = atoms d with P(x,d,d); right_of[y] = atoms d with P(d,y,d)
    left_of = {x: set() for x in ident}
    right_of = {y: set() for y in ident}
    for (i, j, k) in trip:
        if i in ident and j == k:
            left_of[i].add(j)
        if j in ident and i == k:
            right_of[j].add(i)

    diversity = [i for i in range(n) if i not in ident]
    checked = 0
    for a in diversity:
        row = comp[a]
        for b in diversity:
            prods = row[b]
            if not prods:
                continue
            m = prods
            while m:
                c = (m & -m).bit_length() - 1
                m &= m - 1
                xs = [x for x in ident if c in left_of[x]]
                ys = [y for y in ident if c in right_of[y]]
                for x in xs:
                    for y in ys:
                        if x == y:
                            continue
                        for d in left_of[x] & right_of[y]:
                            checked += 1
                            if not prods >> d & 1:
                                rep.fail(
                                    "diversity-product",
                                    (
                                        atoms[a],
                                        atoms[b],
                                        atoms[c],
                                        atoms[d],
                                        atoms[x],
                                        atoms[y],
                                    ),
                                )
    rep.stats["assignments"] = checked
    return rep


# -- the per-root witness sentence --------------------------------------------


def plant_witness(structure, x):
    """Union of the r-atoms with domain x; empty when x roots no plant."""
    if not structure.is_identity(x):
        raise StructureError(f"plant_witness needs an identity atom, got {x}")
    bits = 0
    for a in structure.atoms:
        if a.kind == "r" and structure.domain_of(a) == x:
            bits |= 1 << structure.index_of(a)
    return Element(structure, bits)


def _default_witness(structure, x):
    w = plant_witness(structure, x)
    if not w.is_empty:
        return w
    bits = 0
    for a in structure.atoms:
        if a.kind == "rc" and structure.domain_of(a) == x:
            bits |= 1 << structure.index_of(a)
    return Element(structure, bits)


def phi_details(structure, witness_fn=None):
    """Per identity atom x: the splitable pairs leaving x, the witness
    element chosen for the existential, and whether sigma verifies the
    witness on every such pair.

    The default witness for a plant root is the union of its r-atoms; for
    a leaf-end identity atom it is the rc-atom running back to the root.
    A verified witness soundly discharges the existential quantifier
    without scanning the full powerset.
    """
    if witness_fn is None:
        witness_fn = _default_witness
    pairs_from = {}
    for (x, y) in structure.splitable_pairs():
        pairs_from.setdefault(x, []).append(y)
    details = []
    for x in sorted(structure.identity):
        witness = witness_fn(structure, x)
        targets = pairs_from.get(x, [])
        ok = all(sigma(structure, witness, x, y) for y in targets)
        details.append(
            {"root": x, "witness": witness, "targets": tuple(targets), "verified": ok}
        )
    return details


def check_phi(structure, witness_fn=None):
    """For every atom x there is one element splitting all splitable pairs
    (x, y); evaluated with constructive witnesses (see phi_details).
    Quantification over non-identity x is vacuous because sigma guards its
    middle argument to identity atoms."""
    return all(d["verified"] for d in phi_details(structure, witness_fn))


# -- seeded term generator -----------------------------------------------------

# Node-kind weights for depths > 1 and leaf weights, in this fixed order.
# The generator draws with rng.randrange over the cumulative weights and
# recurses left child before right child, so a seed fully determines the
# term.
_NODE_KINDS = (
    ("plus", 3),
    ("meet", 2),
    ("compose", 3),
    ("converse", 2),
    ("minus", 2),
    ("leaf", 3),
)
_LEAF_KINDS = (
    ("singleton", 6),
    ("identity", 1),
    ("one", 1),
    ("zero", 1),
)


def _weighted_choice(rng, table):
    total = sum(w for _, w in table)
    roll = rng.randrange(total)
    for name, w in table:
        if roll < w:
            return name
        roll -= w
    raise AssertionError("unreachable")


def random_term(structure, max_depth, seed):
    """Deterministic pseudo-random term of depth <= max_depth."""
    if max_depth < 1:
        raise StructureError("max_depth must be >= 1")
    rng = random.Random(seed)

    def gen(depth):
        kind = "leaf" if depth <= 1 else _weighted_choice(rng, _NODE_KINDS)
        if kind == "leaf":
            leaf = _weighted_choice(rng, _LEAF_KINDS)
            if leaf == "singleton":
                return SingletonAtom(structure.atoms[rng.randrange(len(structure.atoms))])
            if leaf == "identity":
                return IdentityConst()
            if leaf == "one":
                return OneConst()
            return ZeroConst()
        if kind == "plus":
            return Plus(gen(depth - 1), gen(depth - 1))
        if kind == "meet":
            return Meet(gen(depth - 1), gen(depth - 1))
        if kind == "compose":
            return Compose(gen(depth - 1), gen(depth - 1))
        if kind == "converse":
            return Converse(gen(depth - 1))
        return Minus(gen(depth - 1))

    return gen(max_depth)
