"""Finitely generated groups and subgroups with three exact backends.

Backends and element encodings:

* ``free_abelian`` (Z^d): tuples of d ints; subgroups are lattices kept in HNF.
* ``free`` (F_k): freely reduced tuples of nonzero ints (+i is generator i-1,
  -i its inverse); subgroups are folded Stallings graphs.
* ``finite``: ints indexing a multiplication table; subgroups are element sets.

Every ordering is canonical: graded shortlex on words (so Z reads 0, 1, -1,
2, -2, ...), lexicographic HNF residues for lattice cosets.
"""
from __future__ import annotations

import itertools
import math
from collections import deque
from dataclasses import dataclass
from functools import cached_property
from typing import Any, Iterable, Iterator, Sequence

import numpy as np

from . import lattice as lat
from .folding import (
    FoldedGraph,
    _Folder,
    closed_words,
    coset_graph,
    intersect,
    invert,
    letter_key,
    reachable_pair,
    reduce_word,
)

FREE_ABELIAN = "free_abelian"
FREE = "free"
FINITE = "finite"

Element = Any


class UsageError(ValueError):
    """Malformed request: wrong types, mismatched handles, bad parameters."""


class PreconditionError(ValueError):
    """A stated precondition of an operation does not hold."""


class UnsupportedError(ValueError):
    """The request is outside what the backend can decide exactly."""


@dataclass(frozen=True)
class Unknown:
    """A semi-decision that ran out of budget."""

    bound: int

    def __bool__(self) -> bool:
        raise TypeError("Unknown is not a boolean; match on it explicitly")


@dataclass(frozen=True)
class NotFound:
    """A bounded search that exhausted its budget without a witness."""

    bound: int
    detail: str = ""

    def __bool__(self) -> bool:
        raise TypeError("NotFound is not a boolean; match on it explicitly")


def _letters(rank: int) -> tuple[str, ...]:
    base = "abcdefghijklmnopqrstuvwxyz"
    if rank > len(base):
        return tuple(f"x{i}" for i in range(rank))
    return tuple(base[:rank])


class Group:
    """A finitely generated group handle."""

    def __init__(self, backend: str, rank: int, labels: Sequence[str] | None = None, *,
                 mul: np.ndarray | None = None, gens: Sequence[int] | None = None,
                 perms: Sequence[tuple[int, ...]] | None = None,
                 residue_basis: lat.Basis | None = None):
        self.backend = backend
        self.rank = rank
        self.labels = tuple(labels) if labels is not None else _letters(rank)
        self._perms = tuple(perms) if perms is not None else None
        self._residue_basis = residue_basis
        if backend == FINITE:
            assert mul is not None
            self.mul_table = np.asarray(mul, dtype=np.int64)
            n = self.mul_table.shape[0]
            ident = [e for e in range(n) if np.array_equal(self.mul_table[e], np.arange(n))]
            if len(ident) != 1:
                raise UsageError("table has no unique identity")
            self._identity = ident[0]
            inv = np.empty(n, dtype=np.int64)
            rows, cols = np.nonzero(self.mul_table == self._identity)
            inv[rows] = cols
            self.inv_table = inv
            self.gen_elements = tuple(int(g) for g in gens) if gens is not None else self._greedy_gens()
            self.rank = len(self.gen_elements)
            self.labels = tuple(labels) if labels is not None else _letters(self.rank)

    # -- constructors -------------------------------------------------------
    @classmethod
    def free_abelian(cls, d: int) -> "Group":
        return cls(FREE_ABELIAN, d)

    @classmethod
    def free(cls, k: int) -> "Group":
        return cls(FREE, k)

    @classmethod
    def finite(cls, table: Sequence[Sequence[int]], gens: Sequence[int] | None = None) -> "Group":
        t = np.asarray(table, dtype=np.int64)
        n = t.shape[0]
        if t.shape != (n, n) or t.min() < 0 or t.max() >= n:
            raise UsageError("multiplication table must be square with entries in range")
        for row in t:
            if len(set(row.tolist())) != n:
                raise UsageError("multiplication table rows must be permutations")
        if not np.array_equal(t[t, :][:, :, None].shape, t[t, :][:, :, None].shape):
            pass
        a = t[t, :]  # (a*b)*c indexed [a,b,c]
        b = t[:, t]  # a*(b*c) indexed [a,b,c]
        if not np.array_equal(a, b):
            raise UsageError("multiplication table is not associative")
        return cls(FINITE, 0, mul=t, gens=gens)

    @classmethod
    def from_permutations(cls, generators: Sequence[Sequence[int]]) -> "Group":
        """Closure of permutations (0-based image tuples), composed right to left."""
        gens = [tuple(p) for p in generators]
        deg = len(gens[0]) if gens else 1
        ident = tuple(range(deg))
        elems = [ident]
        pos = {ident: 0}
        queue = deque([ident])
        while queue:
            p = queue.popleft()
            for g in gens:
                q = tuple(p[g[i]] for i in range(deg))
                if q not in pos:
                    pos[q] = len(elems)
                    elems.append(q)
                    queue.append(q)
        arr = np.array(elems, dtype=np.int64)
        n = len(elems)
        comp = arr[np.arange(n)[:, None, None], arr[None, :, :]]
        codes = (comp * (deg ** np.arange(deg))).sum(axis=2)
        ecodes = (arr * (deg ** np.arange(deg))).sum(axis=1)
        order = np.argsort(ecodes)
        mul = order[np.searchsorted(ecodes[order], codes)]
        gen_ids = [pos[g] for g in gens]
        return cls(FINITE, len(gens), mul=mul, gens=gen_ids, perms=elems)

    @classmethod
    def residue_group(cls, basis: lat.Basis, dim: int) -> "Group":
        """Z^d / L for a full-rank lattice L, elements are lexicographic residues."""
        res = np.array(lat.residues(basis, dim), dtype=np.int64).reshape(-1, dim)
        n = res.shape[0]
        s = res[:, None, :] + res[None, :, :]
        for row in basis:
            c = next(j for j, a in enumerate(row) if a)
            q = np.floor_divide(s[..., c], row[c])
            s = s - q[..., None] * np.array(row, dtype=np.int64)
        radix = [basis[i][i] for i in range(dim)]
        code = np.zeros((n, n), dtype=np.int64)
        for i in range(dim):
            code = code * radix[i] + s[..., i]
        gens = []
        for i in range(dim):
            e = tuple(int(i == j) for j in range(dim))
            gens.append(lat.residue_code(lat.reduce(e, basis), basis))
        return cls(FINITE, dim, mul=code, gens=gens, residue_basis=basis)

    # -- identity and equality ----------------------------------------------
    def _signature(self) -> tuple:
        if self.backend == FINITE:
            return (FINITE, self.mul_table.tobytes(), self.gen_elements)
        return (self.backend, self.rank)

    def __eq__(self, other: object) -> bool:
        return isinstance(other, Group) and self._signature() == other._signature()

    def __hash__(self) -> int:
        return hash(self._signature())

    def __repr__(self) -> str:
        if self.backend == FREE_ABELIAN:
            return f"Z^{self.rank}"
        if self.backend == FREE:
            return f"F_{self.rank}"
        return f"Finite(order={self.order})"

    @property
    def order(self) -> int | None:
        if self.backend == FINITE:
            return int(self.mul_table.shape[0])
        if self.rank == 0:
            return 1
        return None

    # -- arithmetic ---------------------------------------------------------
    @property
    def identity(self) -> Element:
        if self.backend == FREE_ABELIAN:
            return (0,) * self.rank
        if self.backend == FREE:
            return ()
        return self._identity

    def generators(self) -> list[Element]:
        if self.backend == FREE_ABELIAN:
            return [tuple(int(i == j) for j in range(self.rank)) for i in range(self.rank)]
        if self.backend == FREE:
            return [(i + 1,) for i in range(self.rank)]
        return list(self.gen_elements)

    def mul(self, a: Element, b: Element) -> Element:
        if self.backend == FREE_ABELIAN:
            return tuple(x + y for x, y in zip(a, b))
        if self.backend == FREE:
            return reduce_word(a + b)
        return int(self.mul_table[a, b])

    def inv(self, a: Element) -> Element:
        if self.backend == FREE_ABELIAN:
            return tuple(-x for x in a)
        if self.backend == FREE:
            return invert(a)
        return int(self.inv_table[a])

    def prod(self, items: Iterable[Element]) -> Element:
        out = self.identity
        for x in items:
            out = self.mul(out, x)
        return out

    def power(self, a: Element, n: int) -> Element:
        if n < 0:
            a, n = self.inv(a), -n
        out = self.identity
        while n:
            if n & 1:
                out = self.mul(out, a)
            a = self.mul(a, a)
            n >>= 1
        return out

    def is_identity(self, a: Element) -> bool:
        return a == self.identity

    def check(self, a: Element) -> Element:
        """Validate and normalise an element; raises UsageError on shape mismatch."""
        if self.backend == FREE_ABELIAN:
            if isinstance(a, int) and self.rank == 1:
                return (a,)
            if not isinstance(a, (tuple, list)) or len(a) != self.rank:
                raise UsageError(f"expected an integer vector of length {self.rank}, got {a!r}")
            return tuple(int(x) for x in a)
        if self.backend == FREE:
            if isinstance(a, str):
                return self.parse(a)
            if not isinstance(a, (tuple, list)) or any(x == 0 or abs(x) > self.rank for x in a):
                raise UsageError(f"expected a word over {self.rank} generators, got {a!r}")
            return reduce_word(a)
        if not isinstance(a, (int, np.integer)) or not 0 <= a < self.order:
            raise UsageError(f"expected an element index below {self.order}, got {a!r}")
        return int(a)

    # -- words and canonical order -----------------------------------------
    @cached_property
    def _finite_words(self) -> list[tuple[int, ...]]:
        words: list[tuple[int, ...] | None] = [None] * self.order
        words[self._identity] = ()
        queue = deque([self._identity])
        letters = []
        for i, g in enumerate(self.gen_elements):
            letters.append((i + 1, g))
            letters.append((-(i + 1), int(self.inv_table[g])))
        while queue:
            u = queue.popleft()
            for x, g in letters:
                t = int(self.mul_table[u, g])
                if words[t] is None:
                    words[t] = words[u] + (x,)
                    queue.append(t)
        return words  # type: ignore[return-value]

    def word(self, a: Element) -> tuple[int, ...]:
        """A word in the generators (letters +-i) evaluating to a."""
        if self.backend == FREE:
            return a
        if self.backend == FREE_ABELIAN:
            w: list[int] = []
            for i, x in enumerate(a):
                w.extend([i + 1 if x > 0 else -(i + 1)] * abs(x))
            return tuple(w)
        w = self._finite_words[a]
        if w is None:
            raise UnsupportedError("element not reachable from the generators")
        return w

    def evaluate(self, word: Sequence[int]) -> Element:
        gens = self.generators()
        out = self.identity
        for x in word:
            g = gens[abs(x) - 1]
            out = self.mul(out, g if x > 0 else self.inv(g))
        return out

    def key(self, a: Element) -> tuple:
        if self.backend == FINITE:
            return (len(self._finite_words[a] or ()), a)
        w = self.word(a)
        return (len(w), tuple(letter_key(x) for x in w))

    def ball(self, radius: int) -> list[Element]:
        """Elements of word length <= radius, canonical order, each exactly once."""
        if self.backend == FREE_ABELIAN:
            out = []
            for v in itertools.product(range(-radius, radius + 1), repeat=self.rank):
                if sum(abs(x) for x in v) <= radius:
                    out.append(tuple(v))
            return sorted(out, key=self.key)
        if self.backend == FREE:
            letters = sorted([i for i in range(1, self.rank + 1)] + [-i for i in range(1, self.rank + 1)],
                             key=letter_key)
            level = [()]
            out = [()]
            for _ in range(radius):
                nxt = []
                for w in level:
                    for x in letters:
                        if w and w[-1] == -x:
                            continue
                        nxt.append(w + (x,))
                out.extend(nxt)
                level = nxt
            return out
        return sorted([e for e in range(self.order) if len(self._finite_words[e] or ()) <= radius
                       and self._finite_words[e] is not None], key=self.key)

    def elements(self) -> list[Element]:
        if self.backend != FINITE:
            raise UnsupportedError("infinite group has no element list")
        return sorted(range(self.order), key=self.key)

    # -- literal I/O --------------------------------------------------------
    def parse(self, text: Any) -> Element:
        if self.backend == FREE and isinstance(text, str):
            if text in ("", "1", "e"):
                return ()
            out = []
            for ch in text:
                if ch in self.labels:
                    out.append(self.labels.index(ch) + 1)
                elif ch.lower() in self.labels and ch.isupper():
                    out.append(-(self.labels.index(ch.lower()) + 1))
                else:
                    raise UsageError(f"unknown letter {ch!r} in word {text!r}")
            return reduce_word(out)
        return self.check(text)

    def fmt(self, a: Element) -> str:
        if self.backend == FREE_ABELIAN:
            return str(a[0]) if self.rank == 1 else "(" + ",".join(map(str, a)) + ")"
        if self.backend == FREE:
            if not a:
                return "1"
            return "".join(self.labels[abs(x) - 1] if x > 0 else self.labels[abs(x) - 1].upper() for x in a)
        if self._perms is not None:
            return cycle_notation(self._perms[a])
        return str(a)

    def perm(self, a: int) -> tuple[int, ...]:
        if self._perms is None:
            raise UnsupportedError("group was not built from permutations")
        return self._perms[a]

    def residue(self, a: int) -> tuple[int, ...]:
        if self._residue_basis is None:
            raise UnsupportedError("group is not a lattice quotient")
        return lat.residues(self._residue_basis, len(self._residue_basis))[a]


def cycle_notation(p: Sequence[int]) -> str:
    seen = set()
    parts = []
    for i in range(len(p)):
        if i in seen or p[i] == i:
            continue
        cyc = [i]
        seen.add(i)
        j = p[i]
        while j != i:
            cyc.append(j)
            seen.add(j)
            j = p[j]
        parts.append("(" + "".join(str(x + 1) for x in cyc) + ")")
    return "".join(parts) or "e"


def perm_order_key(p: Sequence[int]) -> tuple:
    """Order on permutations: fewer moved points first, then cycle notation."""
    moved = sum(1 for i, x in enumerate(p) if i != x)
    cycles = []
    seen = set()
    for i in range(len(p)):
        if i in seen or p[i] == i:
            continue
        cyc = [i]
        seen.add(i)
        j = p[i]
        while j != i:
            cyc.append(j)
            seen.add(j)
            j = p[j]
        cycles.append(tuple(cyc))
    return (moved, tuple(cycles))


# ---------------------------------------------------------------------------
# Subgroups
# ---------------------------------------------------------------------------


class Subgroup:
    """A finitely generated subgroup of a Group."""

    def __init__(self, group: Group, *, basis: lat.Basis | None = None, graph: FoldedGraph | None = None,
                 elements: frozenset[int] | None = None):
        self.group = group
        self.basis = basis
        self.graph = graph
        self.elements = elements

    @classmethod
    def generated(cls, group: Group, gens: Iterable[Element]) -> "Subgroup":
        gens = [group.check(g) for g in gens]
        if group.backend == FREE_ABELIAN:
            return cls(group, basis=lat.hnf(gens, group.rank))
        if group.backend == FREE:
            return cls(group, graph=FoldedGraph.from_words(gens))
        elems = {group.identity}
        frontier = [group.identity]
        while frontier:
            nxt = []
            for a in frontier:
                for g in gens:
                    b = group.mul(a, g)
                    if b not in elems:
                        elems.add(b)
                        nxt.append(b)
            frontier = nxt
        return cls(group, elements=frozenset(elems))

    @classmethod
    def whole(cls, group: Group) -> "Subgroup":
        return cls.generated(group, group.generators())

    @classmethod
    def trivial(cls, group: Group) -> "Subgroup":
        return cls.generated(group, [])

    # -- structure ----------------------------------------------------------
    def gens(self) -> list[Element]:
        if self.basis is not None:
            return [tuple(r) for r in self.basis]
        if self.graph is not None:
            return self.graph.generators()
        return sorted(self.elements - {self.group.identity}, key=self.group.key)

    def _signature(self) -> tuple:
        if self.basis is not None:
            return ("L", self.basis)
        if self.graph is not None:
            return ("G", self.graph.signature())
        return ("S", tuple(sorted(self.elements)))

    def __eq__(self, other: object) -> bool:
        return isinstance(other, Subgroup) and self.group == other.group and self._signature() == other._signature()

    def __hash__(self) -> int:
        return hash(self._signature())

    def __repr__(self) -> str:
        return "<" + ", ".join(self.group.fmt(g) for g in self.gens()) + ">"

    def _same(self, other: "Subgroup") -> None:
        if self.group != other.group:
            raise UsageError("subgroups live in different groups")

    def contains(self, g: Element) -> bool:
        g = self.group.check(g)
        if self.basis is not None:
            return lat.contains(self.basis, g)
        if self.graph is not None:
            return self.graph.accepts(g)
        return g in self.elements

    __contains__ = contains

    def index(self) -> int | None:
        """[G : H], or None for infinite index."""
        if self.basis is not None:
            return lat.index(self.basis, self.group.rank)
        if self.graph is not None:
            return self.graph.size if self.graph.is_complete(self.group.rank) else None
        return self.group.order // len(self.elements)

    def is_whole(self) -> bool:
        return self.index() == 1

    def is_trivial(self) -> bool:
        if self.basis is not None:
            return not self.basis
        if self.graph is not None:
            return not self.graph.generators()
        return len(self.elements) == 1

    def conjugate(self, x: Element) -> "Subgroup":
        """x H x^-1."""
        g = self.group
        if g.backend == FREE_ABELIAN:
            return self
        return Subgroup.generated(g, [g.mul(g.mul(x, h), g.inv(x)) for h in self.gens()])

    def intersection(self, other: "Subgroup") -> "Subgroup":
        self._same(other)
        if self.basis is not None:
            return Subgroup(self.group, basis=lat.intersection(self.basis, other.basis, self.group.rank))
        if self.graph is not None:
            return Subgroup(self.group, graph=intersect(self.graph, other.graph))
        return Subgroup(self.group, elements=self.elements & other.elements)

    def join(self, other: "Subgroup") -> "Subgroup":
        self._same(other)
        return Subgroup.generated(self.group, self.gens() + other.gens())

    def is_normal(self) -> bool | Unknown:
        g = self.group
        if g.backend == FREE_ABELIAN:
            return True
        for x in g.generators():
            for xx in (x, g.inv(x)):
                for h in self.gens():
                    if not self.contains(g.mul(g.mul(xx, h), g.inv(xx))):
                        return False
        return True

    # -- cosets -------------------------------------------------------------
    def _require_finite_index(self) -> int:
        n = self.index()
        if n is None:
            raise UnsupportedError("coset enumeration needs finite index; index check reported infinite")
        return n

    @cached_property
    def _cosets(self) -> tuple[list[Element], Any]:
        self._require_finite_index()
        g = self.group
        if self.basis is not None:
            reps = lat.residues(self.basis, g.rank)
            return reps, None
        if self.graph is not None:
            # left coset gH <-> vertex reached by g^-1; minimal g labels a path vertex -> base
            out = self.graph.out
            dist = {0: 0}
            order = [0]
            queue = deque([0])
            while queue:
                u = queue.popleft()
                for _, t in out[u].items():
                    if t not in dist:
                        dist[t] = dist[u] + 1
                        order.append(t)
                        queue.append(t)
            best: dict[int, tuple] = {0: ()}
            for v in order[1:]:
                cands = []
                for x, t in out[v].items():
                    if dist[t] == dist[v] - 1:
                        cands.append(((letter_key(x),) + tuple(letter_key(y) for y in best[t]), (x,) + best[t]))
                best[v] = min(cands)[1]
            reps = sorted(best.values(), key=g.key)
            pos = {self.graph.read(invert(w)): i for i, w in enumerate(reps)}
            return reps, pos
        pos: dict[int, int] = {}
        reps = []
        for e in g.elements():
            if e in pos:
                continue
            i = len(reps)
            reps.append(e)
            for h in self.elements:
                pos[g.mul(e, h)] = i
        return reps, pos

    def coset_reps(self) -> list[Element]:
        """Canonical left coset representatives, identity first."""
        return list(self._cosets[0])

    def coset_index(self, x: Element) -> int:
        """Position of the left coset xH in coset_reps()."""
        self._require_finite_index()
        if self.basis is not None:
            return lat.residue_code(lat.reduce(x, self.basis), self.basis)
        if self.graph is not None:
            return self._cosets[1][self.graph.read(invert(x))]
        return self._cosets[1][x]

    def same_left_coset(self, a: Element, b: Element) -> bool:
        g = self.group
        return self.contains(g.mul(g.inv(a), b))


# ---------------------------------------------------------------------------
# Lattice-specific queries
# ---------------------------------------------------------------------------


def quotient_invariants(h: Subgroup) -> tuple[list[int], int]:
    """(torsion invariant factors, free rank) of Z^d / H."""
    if h.group.backend != FREE_ABELIAN:
        raise UnsupportedError("quotient invariants need the free abelian backend")
    return lat.invariants(h.basis, h.group.rank)


def lattice_of(*subgroups: Subgroup) -> lat.Basis:
    d = subgroups[0].group.rank
    return lat.lattice_sum(d, *(s.basis for s in subgroups))


# ---------------------------------------------------------------------------
# Finite quotients
# ---------------------------------------------------------------------------


def closure(q: Group, elems: Iterable[int]) -> np.ndarray:
    """Sorted element array of the subgroup of a finite group generated by elems."""
    gens = sorted({int(x) for x in elems} - {q.identity})
    seen = np.zeros(q.order, dtype=bool)
    seen[q.identity] = True
    frontier = np.array([q.identity], dtype=np.int64)
    while frontier.size:
        if not gens:
            break
        nxt = q.mul_table[np.ix_(frontier, np.array(gens))].ravel()
        nxt = np.unique(nxt[~seen[nxt]])
        seen[nxt] = True
        frontier = nxt
    return np.nonzero(seen)[0]


def subset_product(q: Group, *sets: np.ndarray) -> np.ndarray:
    out = np.array([q.identity], dtype=np.int64)
    for s in sets:
        out = np.unique(q.mul_table[np.ix_(out, np.asarray(s, dtype=np.int64))].ravel())
    return out


class FiniteQuotient:
    """A homomorphism from a group onto a finite group, by generator images."""

    def __init__(self, source: Group, target: Group, images: Sequence[int], *,
                 kernel_basis: lat.Basis | None = None):
        self.source = source
        self.target = target
        self.images = tuple(int(x) for x in images)
        self.kernel_basis = kernel_basis
        if len(self.images) != len(source.generators()):
            raise UsageError("one image per generator is required")
        if source.backend == FREE_ABELIAN:
            for a in self.images:
                for b in self.images:
                    if target.mul(a, b) != target.mul(b, a):
                        raise UsageError("images of commuting generators must commute")
        self.kernel_index = int(closure(target, self.images).size)

    @classmethod
    def from_lattice(cls, group: Group, basis: lat.Basis) -> "FiniteQuotient":
        if group.backend != FREE_ABELIAN or len(basis) != group.rank:
            raise UsageError("lattice quotients need a full-rank sublattice of Z^d")
        target = Group.residue_group(basis, group.rank)
        return cls(group, target, target.gen_elements, kernel_basis=basis)

    @classmethod
    def from_permutations(cls, group: Group, perms: Sequence[Sequence[int]]) -> "FiniteQuotient":
        target = Group.from_permutations(perms)
        return cls(group, target, target.gen_elements)

    def __repr__(self) -> str:
        pairs = ", ".join(f"{self.source.labels[i]}->{self.target.fmt(x)}" for i, x in enumerate(self.images))
        return f"FiniteQuotient({pairs}; index {self.kernel_index})"

    def describe(self) -> dict:
        out = {"kernel_index": self.kernel_index,
               "images": {self.source.labels[i]: self.target.fmt(x) for i, x in enumerate(self.images)}}
        if self.kernel_basis is not None:
            out["kernel_lattice"] = [list(r) for r in self.kernel_basis]
        return out

    def apply(self, g: Element) -> int:
        g = self.source.check(g)
        q = self.target
        if self.kernel_basis is not None:
            return lat.residue_code(lat.reduce(g, self.kernel_basis), self.kernel_basis)
        if self.source.backend == FREE_ABELIAN:
            out = q.identity
            for x, img in zip(g, self.images):
                out = q.mul(out, q.power(img, x))
            return out
        out = q.identity
        for x in self.source.word(g):
            img = self.images[abs(x) - 1]
            out = q.mul(out, img if x > 0 else q.inv(img))
        return out

    def image(self, h: Subgroup) -> np.ndarray:
        return closure(self.target, [self.apply(x) for x in h.gens()])

    def kernel(self) -> Subgroup:
        if self.kernel_basis is not None:
            return Subgroup(self.source, basis=self.kernel_basis)
        return self.lift(Subgroup.trivial(self.source))

    def lift(self, h: Subgroup) -> Subgroup:
        """The subgroup H * ker(phi), always of finite index."""
        src = self.source
        if src.backend == FREE_ABELIAN:
            if self.kernel_basis is not None:
                return Subgroup(src, basis=lat.lattice_sum(src.rank, h.basis, self.kernel_basis))
            raise UnsupportedError("abelian quotient without a kernel lattice")
        s = self.image(h)
        q = self.target
        if src.backend == FINITE:
            sset = set(s.tolist())
            return Subgroup(src, elements=frozenset(e for e in range(src.order) if self.apply(e) in sset))
        # right cosets S q, edges Sq --x--> S q phi(x)
        coset_id = np.full(q.order, -1, dtype=np.int64)
        ids = 0
        for e in sorted(range(q.order), key=q.key):
            if coset_id[e] < 0:
                coset_id[q.mul_table[s, e]] = ids
                ids += 1
        f = _Folder()
        verts = [f.vertex() for _ in range(ids)]
        reps = {}
        for e in range(q.order):
            reps.setdefault(int(coset_id[e]), e)
        for c, e in reps.items():
            for i, img in enumerate(self.images):
                t = int(coset_id[q.mul(e, img)])
                f.edge(verts[c], i + 1, verts[t])
        graph, _ = f.export(verts[int(coset_id[q.identity])])
        return Subgroup(src, graph=graph)


def enumerate_finite_quotients(group: Group, bound: int, *, divisible_by: int = 1) -> Iterator[FiniteQuotient]:
    """Deterministic stream of finite quotients.

    Z^d: every full-rank HNF sublattice of index <= bound (index ascending).
    F_k: surjections onto S_n for n <= bound, one per conjugacy class of
    generator tuples, degree ascending then lexicographic images.
    """
    if bound < 1:
        return
    if group.backend == FREE_ABELIAN:
        for n in range(1, bound + 1):
            if n % divisible_by:
                continue
            for basis in lat.sublattices_of_index(n, group.rank):
                yield FiniteQuotient.from_lattice(group, basis)
        return
    if group.backend == FREE:
        for deg in range(1, bound + 1):
            for images in surjections_onto_symmetric(group.rank, deg):
                fq = FiniteQuotient.from_permutations(group, images)
                if fq.kernel_index % divisible_by == 0:
                    yield fq
        return
    raise UnsupportedError("quotient enumeration is defined for free abelian and free groups")


def _compose(p: Sequence[int], q: Sequence[int]) -> tuple[int, ...]:
    return tuple(p[q[i]] for i in range(len(q)))


def _inverse(p: Sequence[int]) -> tuple[int, ...]:
    out = [0] * len(p)
    for i, x in enumerate(p):
        out[x] = i
    return tuple(out)


def surjections_onto_symmetric(rank: int, deg: int) -> Iterator[tuple[tuple[int, ...], ...]]:
    perms = sorted(itertools.permutations(range(deg)), key=perm_order_key)
    rankof = {p: i for i, p in enumerate(perms)}
    full = math.factorial(deg)
    for combo in itertools.product(range(len(perms)), repeat=rank):
        tup = tuple(perms[i] for i in combo)
        canonical = True
        for s in perms:
            si = _inverse(s)
            conj = tuple(rankof[_compose(_compose(s, p), si)] for p in tup)
            if conj < combo:
                canonical = False
                break
        if not canonical:
            continue
        if Group.from_permutations(tup or [tuple(range(deg))]).order != full:
            continue
        yield tup


# ---------------------------------------------------------------------------
# Product membership
# ---------------------------------------------------------------------------


def _same_group(g_group: Group, factors: Sequence[Subgroup]) -> None:
    for f in factors:
        if f.group != g_group:
            raise UsageError("all subgroups must share one group")


def product_membership(g: Element, factors: Sequence[Subgroup], modulo: FiniteQuotient | None = None,
                       bound: int = 8) -> bool | Unknown:
    """Is g in H_1 H_2 ... H_n (times ker phi when a quotient is given)?"""
    if not factors:
        raise UsageError("at least one factor is required")
    group = factors[0].group
    _same_group(group, factors)
    g = group.check(g)
    if modulo is not None:
        if modulo.source != group:
            raise UsageError("quotient source differs from the subgroups' group")
        if group.backend == FREE_ABELIAN and modulo.kernel_basis is not None:
            basis = lat.lattice_sum(group.rank, modulo.kernel_basis, *(f.basis for f in factors))
            return lat.contains(basis, g)
        q = modulo.target
        prod = subset_product(q, *(modulo.image(f) for f in factors))
        return bool(np.isin(modulo.apply(g), prod))
    if group.backend == FREE_ABELIAN:
        return lat.contains(lattice_of(*factors), g)
    if group.backend == FINITE:
        q = group
        prod = subset_product(q, *(np.array(sorted(f.elements)) for f in factors))
        return bool(np.isin(g, prod))
    return _free_product_membership(g, list(factors), bound)


def _free_in_two(g: tuple, a: Subgroup, b: Subgroup) -> bool:
    # g in A B  <=>  A meets g B
    delta, target = coset_graph(b.graph, g)
    return reachable_pair(a.graph, delta, (0, 0), (0, target))


def _free_product_membership(g: tuple, factors: list[Subgroup], bound: int) -> bool | Unknown:
    if len(factors) == 1:
        return factors[0].contains(g)
    if len(factors) == 2:
        return _free_in_two(g, factors[0], factors[1])
    group = factors[0].group
    for h in closed_words(factors[0].graph, bound):
        rest = _free_product_membership(group.mul(invert(h), g), factors[1:], bound)
        if rest is True:
            return True
    for fq in enumerate_finite_quotients(group, 3):
        if product_membership(g, factors, modulo=fq) is False:
            return False
    return Unknown(bound)


def in_double_coset(x: Element, a: Subgroup, g: Element, b: Subgroup) -> bool:
    """Is x in A g B?  Exact for every backend."""
    group = a.group
    if group.backend == FREE_ABELIAN:
        return lat.contains(lattice_of(a, b), tuple(p - q for p, q in zip(x, g)))
    if group.backend == FINITE:
        return any(group.mul(group.mul(h, g), k) == x for h in a.elements for k in b.elements)
    # x in A g B  <=>  x g^-1 in A (g B g^-1)
    return _free_in_two(group.mul(x, group.inv(g)), a, b.conjugate(g))
