"""Finite atom structures: ordered atoms with composition, converse, identity.

An atom structure is a finite relational structure ``<S, P, C, I>`` where
``P`` is a ternary composition relation, ``C`` a binary converse relation
(stored here as a total function on atoms), and ``I`` a unary identity
predicate.  The complex algebra of such a structure lives in
:mod:`relatom.algebra`; this module owns the structures themselves, the
``build_z`` constructor for the split-plant family, and the atom-level
relation-algebra axiom checker.

Structures are immutable after construction and all operations are pure,
so concurrent read-only use is safe.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field


class StructureError(ValueError):
    """Malformed structure, unknown atom, or invalid argument."""


_KIND_RANK = {"id": 0, "r": 1, "rc": 2, "w": 3, "opaque": 4}

_LABEL_RE = re.compile(r"^(id|r|rc|w)\((\d+(?:,\d+)*)\)$")

_ARITY = {"id": 2, "r": 2, "rc": 2, "w": 4}


@dataclass(frozen=True)
class AtomLabel:
    """Canonical name of an atom.

    Structured kinds::

        id(n,i)       identity atom, 0 <= i <= n
        r(n,k)        split diversity atom from id(n,0) to id(n,k), 1 <= k <= n
        rc(n,k)       converse of r(n,k)
        w(n,i,m,j)    filler diversity atom from id(n,i) to id(m,j)

    Opaque labels carry a free-form name for foreign structures and impose
    no index discipline.  Labels are totally ordered (kind rank, then
    payload) so structures enumerate deterministically.
    """

    kind: str
    args: tuple = ()
    name: str = ""

    def __post_init__(self):
        if self.kind == "opaque":
            if not self.name:
                raise StructureError("opaque label needs a nonempty name")
            if self.args:
                raise StructureError("opaque label takes no numeric payload")
            return
        arity = _ARITY.get(self.kind)
        if arity is None:
            raise StructureError(f"unknown label kind {self.kind!r}")
        if self.name:
            raise StructureError("structured label takes no name payload")
        if len(self.args) != arity or any(
            not isinstance(v, int) or v < 0 for v in self.args
        ):
            raise StructureError(f"{self.kind} label needs {arity} naturals")
        if self.kind == "id":
            n, i = self.args
            if i > n:
                raise StructureError(f"id({n},{i}): need i <= n")
        elif self.kind in ("r", "rc"):
            n, k = self.args
            if not 1 <= k <= n:
                raise StructureError(f"{self.kind}({n},{k}): need 1 <= k <= n")
        else:  # w
            n, i, m, j = self.args
            if i > n or j > m:
                raise StructureError(f"w({n},{i},{m},{j}): need i <= n, j <= m")

    @property
    def sort_key(self):
        return (_KIND_RANK[self.kind], self.args, self.name)

    def __lt__(self, other):
        if not isinstance(other, AtomLabel):
            return NotImplemented
        return self.sort_key < other.sort_key

    def __le__(self, other):
        if not isinstance(other, AtomLabel):
            return NotImplemented
        return self.sort_key <= other.sort_key

    def __gt__(self, other):
        if not isinstance(other, AtomLabel):
            return NotImplemented
        return self.sort_key > other.sort_key

    def __ge__(self, other):
        if not isinstance(other, AtomLabel):
            return NotImplemented
        return self.sort_key >= other.sort_key

    def __str__(self):
        if self.kind == "opaque":
            return self.name
        return f"{self.kind}({','.join(str(v) for v in self.args)})"

    def __repr__(self):
        return f"AtomLabel({str(self)!r})"

    @classmethod
    def parse(cls, text):
        """Parse a canonical label string; anything unstructured is opaque."""
        text = text.strip()
        if not text:
            raise StructureError("empty atom label")
        m = _LABEL_RE.match(text)
        if m:
            kind = m.group(1)
            args = tuple(int(v) for v in m.group(2).split(","))
            if len(args) == _ARITY[kind]:
                return cls(kind, args)
        return cls("opaque", (), text)


def id_atom(n, i):
    return AtomLabel("id", (n, i))


def r_atom(n, k):
    return AtomLabel("r", (n, k))


def rc_atom(n, k):
    return AtomLabel("rc", (n, k))


def w_atom(n, i, m, j):
    return AtomLabel("w", (n, i, m, j))


def opaque_atom(name):
    return AtomLabel("opaque", (), name)


@dataclass
class ValidationReport:
    """Outcome of a structure check: failure witnesses plus bookkeeping."""

    failures: list = field(default_factory=list)
    stats: dict = field(default_factory=dict)

    @property
    def passed(self):
        return not self.failures

    def fail(self, check, witness):
        self.failures.append((check, witness))

    def merge(self, other):
        self.failures.extend(other.failures)
        for key, value in other.stats.items():
            self.stats[key] = self.stats.get(key, 0) + value
        return self


class FiniteAtomStructure:
    """Immutable ``<S, P, C, I>`` with a lazily cached composition table.

    ``converse`` must assign exactly one image to every atom (a total
    function); it need not be an involution, so structures with an injected
    converse fault can still be built and then rejected by the axiom
    checker.  ``triples`` is the raw ternary relation P.
    """

    def __init__(self, atoms, identity, converse, triples):
        atoms = tuple(atoms)
        index = {}
        for pos, a in enumerate(atoms):
            if not isinstance(a, AtomLabel):
                raise StructureError(f"not an atom label: {a!r}")
            if a in index:
                raise StructureError(f"duplicate atom {a}")
            index[a] = pos
        self.atoms = atoms
        self._index = index

        identity = frozenset(identity)
        for a in identity:
            if a not in index:
                raise StructureError(f"identity references unknown atom {a}")
        self.identity = identity

        pairs = converse.items() if isinstance(converse, dict) else converse
        conv = [None] * len(atoms)
        conv_labels = {}
        for a, b in pairs:
            if a not in index or b not in index:
                raise StructureError(f"converse references unknown atom: ({a},{b})")
            if conv[index[a]] is not None and conv[index[a]] != index[b]:
                raise StructureError(f"converse assigns two images to {a}")
            conv[index[a]] = index[b]
            conv_labels[a] = b
        missing = [atoms[i] for i, v in enumerate(conv) if v is None]
        if missing:
            raise StructureError(f"converse not total, missing: {missing[0]}")
        self._conv = tuple(conv)
        self.converse_map = conv_labels

        trip = set()
        for t in triples:
            a, b, c = t
            if a not in index or b not in index or c not in index:
                raise StructureError(f"triple references unknown atom: {t}")
            trip.add((index[a], index[b], index[c]))
        self._trip = frozenset(trip)
        self.triples = frozenset(
            (atoms[i], atoms[j], atoms[k]) for (i, j, k) in trip
        )

        self._ident_idx = tuple(sorted(index[a] for a in identity))
        self._ident_mask = 0
        for i in self._ident_idx:
            self._ident_mask |= 1 << i
        self._full_mask = (1 << len(atoms)) - 1
        self._comp = None
        self._dm = None
        self._rg = None
        self._cache = {}

    # -- basic access ------------------------------------------------------

    def __len__(self):
        return len(self.atoms)

    def __contains__(self, label):
        return label in self._index

    def index_of(self, label):
        try:
            return self._index[label]
        except KeyError:
            raise StructureError(f"unknown atom {label}") from None

    def is_identity(self, label):
        return label in self.identity

    def p_holds(self, a, b, c):
        return (self.index_of(a), self.index_of(b), self.index_of(c)) in self._trip

    def c_holds(self, a, b):
        return self._conv[self.index_of(a)] == self.index_of(b)

    def converse_of(self, a):
        return self.atoms[self._conv[self.index_of(a)]]

    # -- derived tables ----------------------------------------------------

    def composition_table(self):
        """``table[i][j]`` = bitmask of k with P(atom_i, atom_j, atom_k)."""
        if self._comp is None:
            n = len(self.atoms)
            comp = [[0] * n for _ in range(n)]
            for (i, j, k) in self._trip:
                comp[i][j] |= 1 << k
            self._comp = comp
        return self._comp

    def _domain_range_candidates(self):
        if self._dm is None:
            n = len(self.atoms)
            dm = [[] for _ in range(n)]
            rg = [[] for _ in range(n)]
            ident = set(self._ident_idx)
            for (i, j, k) in self._trip:
                if i in ident and j == k:
                    dm[j].append(i)
                if j in ident and i == k:
                    rg[i].append(j)
            self._dm = [tuple(sorted(v)) for v in dm]
            self._rg = [tuple(sorted(v)) for v in rg]
        return self._dm, self._rg

    def domain_of(self, a):
        """The unique identity atom e with P(e, a, a)."""
        dm, _ = self._domain_range_candidates()
        cands = dm[self.index_of(a)]
        if len(cands) != 1:
            raise StructureError(
                f"atom {a} has {len(cands)} domain candidates, expected 1"
            )
        return self.atoms[cands[0]]

    def range_of(self, a):
        """The unique identity atom f with P(a, f, a)."""
        _, rg = self._domain_range_candidates()
        cands = rg[self.index_of(a)]
        if len(cands) != 1:
            raise StructureError(
                f"atom {a} has {len(cands)} range candidates, expected 1"
            )
        return self.atoms[cands[0]]

    # -- operations --------------------------------------------------------

    def peircean_transforms(self, triple):
        """Closure of one triple under (a,b,c) -> (a~,c,b) and (a,b,c) -> (c,b~,a).

        The closure has at most 6 members; degenerate triples collapse to
        fewer.
        """
        a, b, c = triple
        for v in (a, b, c):
            self.index_of(v)
        seen = set()
        work = [(a, b, c)]
        while work:
            t = work.pop()
            if t in seen:
                continue
            seen.add(t)
            x, y, z = t
            work.append((self.converse_of(x), z, y))
            work.append((z, self.converse_of(y), x))
        return frozenset(seen)

    def splitable_pairs(self):
        """Ordered pairs (x, y) of distinct identity atoms with >= 2 atoms from x to y."""
        counts = {}
        for a in self.atoms:
            key = (self.domain_of(a), self.range_of(a))
            counts[key] = counts.get(key, 0) + 1
        return sorted(
            (x, y)
            for (x, y), cnt in counts.items()
            if x != y and cnt >= 2 and x in self.identity and y in self.identity
        )

    def validate(self):
        """Structural well-formedness: converse involution, identity
        self-converse, unique domain and range for every atom."""
        rep = ValidationReport()
        for i, a in enumerate(self.atoms):
            j = self._conv[i]
            if self._conv[j] != i:
                rep.fail("converse-involution", (a, self.atoms[j], self.atoms[self._conv[j]]))
        for a in self.identity:
            if self.converse_of(a) != a:
                rep.fail("identity-self-converse", (a, self.converse_of(a)))
        dm, rg = self._domain_range_candidates()
        for i, a in enumerate(self.atoms):
            if len(dm[i]) != 1:
                rep.fail("domain-unique", (a, tuple(self.atoms[e] for e in dm[i])))
            if len(rg[i]) != 1:
                rep.fail("range-unique", (a, tuple(self.atoms[e] for e in rg[i])))
        rep.stats["atoms"] = len(self.atoms)
        rep.stats["triples"] = len(self._trip)
        return rep


def build_z(bound):
    """The split-plant atom structure restricted to plant indices <= bound.

    Universe: identity atoms id(n,i); split pairs r(n,k)/rc(n,k) running
    between id(n,0) and id(n,k); and filler atoms w(n,i,m,j) between every
    ordered pair of identity atoms.  P consists of the domain/range triples
    (dm(a),a,a) and (a,rg(a),a), the converse triples (a,a~,dm(a)), and all
    diversity triples (a,b,c) with dm(a)=dm(c), rg(a)=dm(b), rg(b)=rg(c).
    Restriction to indices <= bound is closed under all four clauses, so the
    result is again a well-formed structure.
    """
    if bound < 0:
        raise StructureError("plant bound must be >= 0")
    ids = [id_atom(n, i) for n in range(bound + 1) for i in range(n + 1)]
    rs = [r_atom(n, k) for n in range(1, bound + 1) for k in range(1, n + 1)]
    rcs = [rc_atom(n, k) for n in range(1, bound + 1) for k in range(1, n + 1)]
    ws = [
        w_atom(n, i, m, j)
        for n in range(bound + 1)
        for i in range(n + 1)
        for m in range(bound + 1)
        for j in range(m + 1)
    ]
    atoms = sorted(ids + rs + rcs + ws)

    conv = {}
    dm = {}
    rg = {}
    for x in ids:
        conv[x] = x
        dm[x] = x
        rg[x] = x
    for n in range(1, bound + 1):
        for k in range(1, n + 1):
            r, rc = r_atom(n, k), rc_atom(n, k)
            conv[r] = rc
            conv[rc] = r
            dm[r] = rg[rc] = id_atom(n, 0)
            rg[r] = dm[rc] = id_atom(n, k)
    for w in ws:
        n, i, m, j = w.args
        conv[w] = w_atom(m, j, n, i)
        dm[w] = id_atom(n, i)
        rg[w] = id_atom(m, j)

    triples = set()
    for a in atoms:
        triples.add((dm[a], a, a))
        triples.add((a, rg[a], a))
        triples.add((a, conv[a], dm[a]))
    diversity = [a for a in atoms if a.kind != "id"]
    by_dm = {}
    blocks = {}
    for a in diversity:
        by_dm.setdefault(dm[a], []).append(a)
        blocks.setdefault((dm[a], rg[a]), []).append(a)
    for a in diversity:
        for b in by_dm.get(rg[a], ()):
            for c in blocks.get((dm[a], rg[b]), ()):
                triples.add((a, b, c))

    return FiniteAtomStructure(atoms, ids, conv, triples)


def check_ra_axioms(structure):
    """Atom-level relation-algebra axioms, checked exhaustively.

    (a) converse is an involution;
    (b) composing with the identity set on either side reproduces exactly
        the atom itself;
    (c) P is closed under both rotation generators;
    (d) associativity, via the composition table: for all a,b,c the sets
        {d : exists e. P(a,b,e) and P(e,c,d)} and
        {d : exists f. P(b,c,f) and P(a,f,d)} coincide.
    Failures carry the offending atoms as witnesses.
    """
    rep = ValidationReport()
    atoms = structure.atoms
    n = len(atoms)
    conv = structure._conv

    involutive = True
    for i in range(n):
        j = conv[i]
        if conv[j] != i:
            involutive = False
            rep.fail("converse-involution", (atoms[i], atoms[j], atoms[conv[j]]))

    comp = structure.composition_table()
    ident = structure._ident_idx

    for a in range(n):
        right = 0
        left = 0
        for e in ident:
            right |= comp[a][e]
            left |= comp[e][a]
        expected = 1 << a
        if right != expected:
            rep.fail("identity-law-right", (atoms[a], _mask_atoms(structure, right)))
        if left != expected:
            rep.fail("identity-law-left", (atoms[a], _mask_atoms(structure, left)))

    if involutive:
        for (i, j, k) in structure._trip:
            if (conv[i], k, j) not in structure._trip:
                rep.fail("rotation", (atoms[i], atoms[j], atoms[k], "first generator"))
            if (k, conv[j], i) not in structure._trip:
                rep.fail("rotation", (atoms[i], atoms[j], atoms[k], "second generator"))
    else:
        rep.fail("rotation", ("skipped: converse not involutive",))

    checked = 0
    for a in range(n):
        comp_a = comp[a]
        for b in range(n):
            x = comp_a[b]
            row_b = comp[b]
            for c in range(n):
                y = row_b[c]
                if not x and not y:
                    continue
                checked += 1
                left_side = 0
                m = x
                while m:
                    e = (m & -m).bit_length() - 1
                    left_side |= comp[e][c]
                    m &= m - 1
                right_side = 0
                m = y
                while m:
                    f = (m & -m).bit_length() - 1
                    right_side |= comp_a[f]
                    m &= m - 1
                if left_side != right_side:
                    rep.fail(
                        "associativity",
                        (
                            atoms[a],
                            atoms[b],
                            atoms[c],
                            _mask_atoms(structure, left_side ^ right_side),
                        ),
                    )
    rep.stats["atoms"] = n
    rep.stats["associativity_triples"] = checked
    return rep


def _mask_atoms(structure, mask):
    out = []
    while mask:
        i = (mask & -mask).bit_length() - 1
        out.append(structure.atoms[i])
        mask &= mask - 1
    return tuple(out)
