"""Generalized pseudonorms on Γ × I².

A table N(g, i, j) is read as the distance from the base point x_i to g·x_j.
Partial tables are completed to the largest pseudonorm below them by taking
cheapest chains: g = g_1 ⋯ g_m with index path i = k_0, …, k_m = j costs
Σ P(g_t, k_{t-1}, k_t).  Chains are searched with a capped Dijkstra over
vertices (x, k) ∈ Γ × I.  Every edge costs at least the minimum positive
entry m, so a capped search touches only chains of at most ⌈cap/m⌉ hops and
the answer is exact.

Zero entries P(g, i, i) = 0 with g ≠ 1 declare g to fix x_i.  For free abelian
groups the vertex set is collapsed modulo the intersection of these kernels;
finite groups need no collapse; free groups with non-trivial zeros are not
supported.

All values are Fractions.
"""
from __future__ import annotations

import heapq
import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Hashable, Iterable, Mapping, Sequence

from . import lattice as lat
from .groups import (
    FREE,
    FREE_ABELIAN,
    Group,
    PreconditionError,
    Subgroup,
    UnsupportedError,
    UsageError,
)

Key = tuple[Any, Hashable, Hashable]

SPACE = "space"
SPHERE = "sphere"

BOUNDED = "bounded"
UNBOUNDED = "unbounded"
ABOVE = "above"
BELOW_IO = "below-io"


def q(x: Any) -> Fraction:
    """Exact rational from int, Fraction, 'p/q' text or a decimal float literal."""
    if isinstance(x, Fraction):
        return x
    if isinstance(x, bool):
        raise UsageError(f"not a rational: {x!r}")
    if isinstance(x, int):
        return Fraction(x)
    if isinstance(x, float):
        return Fraction(repr(x))
    if isinstance(x, str):
        try:
            return Fraction(x.strip())
        except ValueError:
            raise UsageError(f"not a rational: {x!r}") from None
    raise UsageError(f"not a rational: {x!r}")


def fmt_q(x: Fraction) -> str:
    return str(x.numerator) if x.denominator == 1 else f"{x.numerator}/{x.denominator}"


# ---------------------------------------------------------------------------
# Tables
# ---------------------------------------------------------------------------


@dataclass
class PartialGPN:
    group: Group
    labels: list[Hashable]
    table: dict[Key, Fraction]
    cap: Fraction | None = None

    def __post_init__(self):
        self.labels = list(self.labels)
        if len(set(self.labels)) != len(self.labels):
            raise UsageError("repeated index label")
        known = set(self.labels)
        clean = {}
        for (g, i, j), v in self.table.items():
            if i not in known or j not in known:
                raise UsageError(f"entry ({g!r}, {i!r}, {j!r}) uses an unknown index")
            clean[(self.group.check(g), i, j)] = q(v)
        self.table = clean
        if self.cap is not None:
            self.cap = q(self.cap)

    @classmethod
    def symmetric(cls, group: Group, labels: Sequence[Hashable], entries: Mapping[Key, Any],
                  cap: Any = None) -> "PartialGPN":
        """Build a table and add every mirror entry (g⁻¹, j, i)."""
        table: dict[Key, Fraction] = {}
        for (g, i, j), v in entries.items():
            g = group.check(g)
            v = q(v)
            for key in ((g, i, j), (group.inv(g), j, i)):
                if key in table and table[key] != v:
                    raise UsageError(f"entry {key!r} given two values {table[key]} and {v}")
                table[key] = v
        return cls(group, list(labels), table, cap)

    @classmethod
    def single(cls, group: Group, values: Mapping[Any, Any], label: Hashable = 1) -> "PartialGPN":
        """One orbit: values[g] = N(g, label, label), mirrored, with N(1) = 0."""
        entries = {(g, label, label): v for g, v in values.items()}
        entries[(group.identity, label, label)] = 0
        return cls.symmetric(group, [label], entries)

    def domain(self) -> list[Key]:
        return sorted(self.table, key=self._entry_key)

    def _entry_key(self, k: Key) -> tuple:
        g, i, j = k
        return (self.labels.index(i), self.labels.index(j), self.group.key(g))

    def domain_elements(self) -> list[Any]:
        return sorted({g for g, _, _ in self.table}, key=self.group.key)

    def with_entries(self, extra: Mapping[Key, Any]) -> "PartialGPN":
        entries = dict(self.table)
        entries.update({k: q(v) for k, v in extra.items()})
        return PartialGPN.symmetric(self.group, self.labels, entries, self.cap)

    def scaled(self, t: Fraction) -> dict[Key, Fraction]:
        return {k: t * v for k, v in self.table.items()}

    def describe(self) -> list[str]:
        out = []
        for g, i, j in self.domain():
            out.append(f"N({self.group.fmt(g)},{i},{j}) = {fmt_q(self.table[(g, i, j)])}")
        return out


@dataclass(frozen=True)
class Step:
    g: Any
    i: Hashable
    j: Hashable
    value: Fraction
    kernel: bool = False


@dataclass(frozen=True)
class AboveCap:
    cap: Fraction

    def __bool__(self) -> bool:
        raise TypeError("AboveCap has no truth value")


@dataclass
class GPNValue:
    query: Key
    value: Fraction | AboveCap
    chain: list[Step]
    fill: bool = False

    @property
    def found(self) -> bool:
        return not isinstance(self.value, AboveCap)


@dataclass
class Violation:
    kind: str
    entry: Key | None
    detail: str
    chain: list[Step] = field(default_factory=list)


@dataclass
class GPNReport:
    ok: bool
    violations: list[Violation] = field(default_factory=list)
    checked: int = 0

    def __bool__(self) -> bool:
        return self.ok

    def lines(self) -> list[str]:
        return [f"{v.kind}: {v.detail}" for v in self.violations]


# ---------------------------------------------------------------------------
# Chain search
# ---------------------------------------------------------------------------


def zero_kernels(p: PartialGPN) -> dict[Hashable, Subgroup]:
    """Per index, the subgroup generated by elements stored with value 0 on the diagonal."""
    grp = p.group
    zeros: dict[Hashable, list] = {i: [] for i in p.labels}
    for (g, i, j), v in p.table.items():
        if v == 0 and i == j and not grp.is_identity(g):
            zeros[i].append(g)
    return {i: Subgroup.generated(grp, zs) for i, zs in zeros.items()}


class _Chains:
    def __init__(self, p: PartialGPN):
        self.p = p
        grp = self.grp = p.group
        self.kernels = zero_kernels(p)
        self.collapse: list | None = None
        nontrivial = [i for i, k in self.kernels.items() if not k.is_trivial()]
        if nontrivial:
            if grp.backend == FREE:
                raise UnsupportedError("zero entries away from the identity are not supported in free groups")
            if grp.backend == FREE_ABELIAN:
                basis = None
                for k in self.kernels.values():
                    basis = k.basis if basis is None else lat.intersection(basis, k.basis, grp.rank)
                for i, k in self.kernels.items():
                    if len(k.basis) != len(basis):
                        raise UnsupportedError(f"kernel at index {i!r} has infinite index over the common kernel")
                self.collapse = basis
        self.common = (Subgroup(grp, basis=self.collapse) if self.collapse is not None
                       else Subgroup.trivial(grp))
        self.edges: dict[Hashable, list[tuple[Any, Hashable, Fraction]]] = {i: [] for i in p.labels}
        seen = set()
        for (g, i, j), v in p.table.items():
            for key, val in (((g, i, j), v), ((grp.inv(g), j, i), v)):
                if key in seen:
                    continue
                seen.add(key)
                if grp.is_identity(key[0]) and key[1] == key[2]:
                    continue
                self.edges[key[1]].append((key[0], key[2], val))
        for i in self.edges:
            self.edges[i].sort(key=lambda e: (p.labels.index(e[1]), grp.key(e[0])))
        positive = [v for v in p.table.values() if v > 0]
        self.m = min(positive) if positive else None

    def norm(self, x: Any) -> Any:
        if self.collapse:
            return lat.reduce(x, self.collapse)
        return x

    def search(self, i: Hashable, targets: Iterable[tuple[Any, Hashable]] | None, cap: Fraction | None,
               strict: bool = False) -> tuple[dict, dict]:
        """Dijkstra from (1, i); stops once every target is settled or the cap is passed.

        With strict=True only distances < cap are settled."""
        grp = self.grp
        start = (self.norm(grp.identity), i)
        want = None if targets is None else {(self.norm(x), j) for x, j in targets}
        dist = {start: Fraction(0)}
        parent: dict = {start: None}
        done = set()
        counter = itertools.count()
        heap = [(Fraction(0), next(counter), start)]
        while heap:
            d, _, u = heapq.heappop(heap)
            if u in done:
                continue
            if cap is not None and (d > cap or (strict and d >= cap)):
                break
            done.add(u)
            if want is not None:
                want.discard(u)
                if not want:
                    break
            x, k = u
            for g, j, v in self.edges[k]:
                nd = d + v
                if cap is not None and nd > cap:
                    continue
                w = (self.norm(grp.mul(x, g)), j)
                if w not in dist or nd < dist[w]:
                    dist[w] = nd
                    parent[w] = (u, g, k, j, v)
                    heapq.heappush(heap, (nd, next(counter), w))
        return {u: dist[u] for u in done}, parent

    def chain(self, parent: dict, g: Any, j: Hashable) -> list[Step]:
        grp = self.grp
        u = (self.norm(g), j)
        steps = []
        while parent[u] is not None:
            prev, h, k, l, v = parent[u]
            steps.append(Step(h, k, l, v))
            u = prev
        steps.reverse()
        got = grp.prod([s.g for s in steps]) if steps else grp.identity
        corr = grp.mul(grp.inv(got), g)
        if not grp.is_identity(corr):
            steps.append(Step(corr, j, j, Fraction(0), kernel=True))
        return steps

    def value(self, g: Any, i: Hashable, j: Hashable, cap: Fraction | None, strict: bool = False
              ) -> tuple[Fraction | None, list[Step]]:
        g = self.grp.check(g)
        settled, parent = self.search(i, [(g, j)], cap, strict)
        u = (self.norm(g), j)
        if u not in settled:
            return None, []
        return settled[u], self.chain(parent, g, j)


def check_chain(p: PartialGPN, query: Key, value: Fraction, chain: Sequence[Step]) -> bool:
    """The chain composes to g, walks i → j, uses stored entries and costs value."""
    grp = p.group
    g, i, j = query
    kernels = None
    at = i
    total = Fraction(0)
    for s in chain:
        if s.i != at:
            return False
        if s.kernel:
            kernels = kernels or zero_kernels(p)
            if s.i != s.j or s.value != 0 or not kernels[s.i].contains(s.g):
                return False
        else:
            stored = p.table.get((s.g, s.i, s.j))
            mirror = p.table.get((grp.inv(s.g), s.j, s.i))
            if s.value not in (stored, mirror):
                return False
        total += s.value
        at = s.j
    if at != j and chain:
        return False
    got = grp.prod([s.g for s in chain]) if chain else grp.identity
    if not chain and not (i == j and grp.is_identity(g)):
        return False
    return grp.check(got) == grp.check(g) and total == value


# ---------------------------------------------------------------------------
# Validation and sufficiency
# ---------------------------------------------------------------------------


def validate_partial_gpn(p: PartialGPN) -> GPNReport:
    grp = p.group
    viol: list[Violation] = []
    for (g, i, j), v in p.table.items():
        if v < 0:
            viol.append(Violation("positivity", (g, i, j), f"negative value {fmt_q(v)}"))
        elif grp.is_identity(g) and i == j and v != 0:
            viol.append(Violation("identity", (g, i, j), f"N(1,{i},{i}) = {fmt_q(v)} is not 0"))
        elif v == 0 and i != j:
            viol.append(Violation("positivity", (g, i, j), f"zero between distinct indices {i!r}, {j!r}"))
        if p.cap is not None and v > p.cap:
            viol.append(Violation("cap", (g, i, j), f"value {fmt_q(v)} exceeds the cap {fmt_q(p.cap)}"))
        m = p.table.get((grp.inv(g), j, i))
        if m is not None and m != v:
            viol.append(Violation("symmetry", (g, i, j),
                                  f"N({grp.fmt(g)},{i},{j}) = {fmt_q(v)} but the mirror is {fmt_q(m)}"))
    if viol:
        return GPNReport(False, viol, len(p.table))
    try:
        ch = _Chains(p)
    except UnsupportedError as exc:
        return GPNReport(False, [Violation("unsupported", None, str(exc))], len(p.table))
    for key in p.domain():
        g, i, j = key
        v = p.table[key]
        if v == 0:
            continue
        got, chain = ch.value(g, i, j, v, strict=True)
        if got is not None:
            names = " + ".join(f"N({grp.fmt(s.g)},{s.i},{s.j})" for s in chain)
            viol.append(Violation("triangle", key,
                                  f"N({grp.fmt(g)},{i},{j}) = {fmt_q(v)} > {names} = {fmt_q(got)}", chain))
    return GPNReport(not viol, viol, len(p.table))


@dataclass
class Sufficiency:
    sufficient: bool
    components: list[list[Hashable]]
    loop_subgroup: Subgroup
    transversal: dict[Hashable, Any]

    def __bool__(self) -> bool:
        return self.sufficient


def is_sufficient(p: PartialGPN) -> Sufficiency:
    """Connectivity of the domain graph on Γ × I.

    Indices are joined along a spanning forest with transversal elements t_k;
    the vertices reachable from (1, i₀) are (h t_k, k) for h in the subgroup
    generated by t_k g t_l⁻¹ over the entries (g, k, l).
    """
    grp = p.group
    adj: dict[Hashable, list[tuple[Any, Hashable]]] = {i: [] for i in p.labels}
    for (g, i, j) in p.domain():
        adj[i].append((g, j))
        adj[j].append((grp.inv(g), i))
    comps = []
    trans: dict[Hashable, Any] = {}
    for root in p.labels:
        if root in trans:
            continue
        trans[root] = grp.identity
        comp = [root]
        k = 0
        while k < len(comp):
            u = comp[k]
            k += 1
            for g, w in adj[u]:
                if w not in trans:
                    trans[w] = grp.mul(trans[u], g)
                    comp.append(w)
        comps.append(comp)
    first = comps[0] if comps else []
    member = set(first)
    loops = []
    for (g, i, j) in p.domain():
        if i in member:
            loops.append(grp.mul(grp.mul(trans[i], g), grp.inv(trans[j])))
    h = Subgroup.generated(grp, loops)
    ok = len(comps) == 1 and h.is_whole()
    return Sufficiency(ok, comps, h, trans)


# ---------------------------------------------------------------------------
# Maximal extension
# ---------------------------------------------------------------------------


def extend_max(p: PartialGPN, queries: Iterable[Key], cap: Any = None, fill: Any = None,
               check: bool = True) -> list[GPNValue]:
    """Values of the largest pseudonorm below P (or below P padded by the constant fill).

    Without fill, P must be sufficient; queries beyond the cap get AboveCap.
    With fill M every non-domain triple is bounded by M, so the answer is
    min(M, cheapest table chain).
    """
    grp = p.group
    queries = [(grp.check(g), i, j) for g, i, j in queries]
    for _, i, j in queries:
        if i not in p.labels or j not in p.labels:
            raise UsageError(f"query index {i!r} or {j!r} is not a label")
    cap = None if cap is None else q(cap)
    fill = None if fill is None else q(fill)
    if fill is None and check and not is_sufficient(p):
        raise PreconditionError("partial pseudonorm is not sufficient; pass a fill value or more entries")
    ch = _Chains(p)
    limit = fill if fill is not None else cap
    if limit is None and ch.m is None:
        limit = Fraction(0)
    out = []
    by_source: dict[Hashable, list[Key]] = {}
    for key in queries:
        by_source.setdefault(key[1], []).append(key)
    answers: dict[Key, GPNValue] = {}
    for i, keys in by_source.items():
        settled, parent = ch.search(i, [(g, j) for g, _, j in keys], limit)
        for key in keys:
            g, _, j = key
            u = (ch.norm(g), j)
            if u in settled and (fill is None or settled[u] <= fill):
                answers[key] = GPNValue(key, settled[u], ch.chain(parent, g, j))
            elif fill is not None:
                if grp.is_identity(g) and i == j:
                    answers[key] = GPNValue(key, Fraction(0), [])
                else:
                    answers[key] = GPNValue(key, fill, [Step(g, i, j, fill)], fill=True)
            else:
                answers[key] = GPNValue(key, AboveCap(limit), [])
    for key in queries:
        out.append(answers[key])
    return out


def gpn_value(p: PartialGPN, g: Any, i: Hashable, j: Hashable, **kw) -> Fraction | AboveCap:
    return extend_max(p, [(g, i, j)], **kw)[0].value


# ---------------------------------------------------------------------------
# Distances, convexity, bridges, turbulence
# ---------------------------------------------------------------------------


def _tables(n1: PartialGPN | Mapping, n2: PartialGPN | Mapping) -> tuple[dict, dict]:
    t1 = n1.table if isinstance(n1, PartialGPN) else dict(n1)
    t2 = n2.table if isinstance(n2, PartialGPN) else dict(n2)
    if set(t1) != set(t2):
        raise UsageError("tables are defined on different windows")
    return t1, t2


def gpn_distance(n1: PartialGPN | Mapping, n2: PartialGPN | Mapping) -> Fraction:
    t1, t2 = _tables(n1, n2)
    return max((abs(q(t1[k]) - q(t2[k])) for k in t1), default=Fraction(0))


@dataclass
class Combination:
    table: PartialGPN
    t: Fraction
    d12: Fraction
    d13: Fraction
    d23: Fraction
    identities: bool
    report: GPNReport


def convex_combine(n1: PartialGPN, n2: PartialGPN, t: Any) -> Combination:
    """N3 = t·N1 + (1−t)·N2 with the two distance identities audited."""
    t = q(t)
    if not 0 < t < 1:
        raise UsageError("t must lie strictly between 0 and 1")
    if n1.group != n2.group or n1.labels != n2.labels:
        raise UsageError("tables live over different groups or index sets")
    t1, t2 = _tables(n1, n2)
    n3 = PartialGPN(n1.group, n1.labels, {k: t * t1[k] + (1 - t) * t2[k] for k in t1}, n1.cap)
    d12 = gpn_distance(n1, n2)
    d13 = gpn_distance(n1, n3)
    d23 = gpn_distance(n2, n3)
    ident = d13 == (1 - t) * d12 and d23 == t * d12
    return Combination(n3, t, d12, d13, d23, ident, validate_partial_gpn(n3))


def _identity_entries(p: PartialGPN) -> dict[Key, Fraction]:
    grp = p.group
    return {k: v for k, v in p.table.items() if grp.is_identity(k[0])}


def bridge_chain(levels: Sequence[PartialGPN], delta: Any) -> PartialGPN:
    """Stack level copies on L × {0..k} and join (i, j) to (i, j+1) at 1 with value δ."""
    delta = q(delta)
    if delta <= 0:
        raise UsageError("bridge value must be positive")
    if not levels:
        raise UsageError("no levels")
    base = levels[0]
    for lv in levels[1:]:
        if lv.group != base.group or lv.labels != base.labels:
            raise UsageError("levels live over different groups or index sets")
        _tables(base, lv)
    for a, (p0, p1) in enumerate(zip(levels, levels[1:])):
        d = gpn_distance(p0, p1)
        if d > delta:
            raise PreconditionError(f"levels {a} and {a + 1} are {fmt_q(d)} apart, more than the bridge {fmt_q(delta)}")
        if _identity_entries(p0) != _identity_entries(p1):
            raise PreconditionError(f"levels {a} and {a + 1} disagree on entries at the identity")
    grp = base.group
    labels = [(i, a) for a in range(len(levels)) for i in base.labels]
    entries: dict[Key, Fraction] = {}
    for a, lv in enumerate(levels):
        for (g, i, j), v in lv.table.items():
            entries[(g, (i, a), (j, a))] = v
    one = grp.identity
    for a in range(len(levels) - 1):
        for i in base.labels:
            entries[(one, (i, a), (i, a + 1))] = delta
            entries[(one, (i, a + 1), (i, a))] = delta
    caps = {lv.cap for lv in levels}
    return PartialGPN(grp, labels, entries, caps.pop() if len(caps) == 1 else None)


@dataclass
class TurbulencePath:
    distance: Fraction
    delta: Fraction | None
    k: int
    levels: list[PartialGPN]
    consecutive: list[Fraction]
    combined: PartialGPN
    report: GPNReport

    @property
    def audit(self) -> bool:
        if self.k == 0:
            return self.report.ok
        want = self.distance / self.k
        return (self.report.ok and all(d == want for d in self.consecutive)
                and self.delta * (self.k - 1) == self.distance)


def turbulence_path(pa: PartialGPN, pb: PartialGPN, eps: Any) -> TurbulencePath:
    """Convex levels P_j = ((k−j)/k)·Pα + (j/k)·Pβ bridged at δ = M/(k−1) < ε.

    k is the smallest integer ≥ 2 making δ < ε."""
    eps = q(eps)
    if eps <= 0:
        raise UsageError("epsilon must be positive")
    if pa.group != pb.group or pa.labels != pb.labels:
        raise UsageError("tables live over different groups or index sets")
    ta, tb = _tables(pa, pb)
    if _identity_entries(pa) != _identity_entries(pb):
        raise PreconditionError("tables disagree on entries at the identity")
    dist = gpn_distance(pa, pb)
    if dist == 0:
        combined = bridge_chain([pa], 1)
        return TurbulencePath(dist, None, 0, [pa], [], combined, validate_partial_gpn(combined))
    k = math.floor(dist / eps) + 2
    delta = dist / (k - 1)
    levels = []
    for j in range(k + 1):
        a, b = Fraction(k - j, k), Fraction(j, k)
        levels.append(PartialGPN(pa.group, pa.labels, {key: a * ta[key] + b * tb[key] for key in ta}, pa.cap))
    consecutive = [gpn_distance(x, y) for x, y in zip(levels, levels[1:])]
    combined = bridge_chain(levels, delta)
    return TurbulencePath(dist, delta, k, levels, consecutive, combined, validate_partial_gpn(combined))


# ---------------------------------------------------------------------------
# Avoidance gadgets
# ---------------------------------------------------------------------------


@dataclass
class Tail:
    """What is promised about λ outside the supplied ball.

    bounded: λ ≤ bound everywhere; unbounded: λ is unbounded;
    above: λ > 3/4 off a finite set; below-io: λ ≤ 3/4 infinitely often."""
    kind: str
    bound: Fraction | None = None

    def __post_init__(self):
        if self.kind not in (BOUNDED, UNBOUNDED, ABOVE, BELOW_IO):
            raise UsageError(f"unknown tail kind {self.kind!r}")
        if self.kind == BOUNDED:
            if self.bound is None:
                raise UsageError("bounded tail needs a bound")
            self.bound = q(self.bound)


@dataclass
class Avoidance:
    mode: str
    branch: str
    fill: Fraction
    table: PartialGPN
    witness: Any
    witness_value: Fraction
    lam_value: Fraction
    lam_exact: bool
    margin: Fraction
    hop_distance: int | None = None
    restriction_ok: bool | None = None
    far_witness: Any = None
    far_margin: Fraction | None = None
    notes: list[str] = field(default_factory=list)

    def value(self, g: Any, i: Hashable, j: Hashable) -> Fraction:
        return extend_max(self.table, [(g, i, j)], fill=self.fill)[0].value


def hop_distances(p: PartialGPN, radius: int) -> dict[Any, int]:
    """Least number of domain elements whose product is g, for g reachable within radius."""
    grp = p.group
    gens = [g for g in p.domain_elements() if not grp.is_identity(g)]
    dist = {grp.identity: 0}
    frontier = [grp.identity]
    for r in range(1, radius + 1):
        nxt = []
        for x in frontier:
            for g in gens:
                y = grp.mul(x, g)
                if y not in dist:
                    dist[y] = r
                    nxt.append(y)
        frontier = nxt
    return dist


def _candidates(grp: Group, lam: Mapping[Any, Fraction]) -> list[Any]:
    return sorted((g for g in lam if not grp.is_identity(g)), key=grp.key)


def avoid_pseudonorm(lam: Mapping[Any, Any], tail: Tail, window: PartialGPN, mode: str = SPACE,
                     label: Hashable | None = None, search_radius: int = 12) -> Avoidance:
    """Extend the window so that some g has |λ(g) − N(g,x,x)| > 1/4 at the first index.

    λ is given on a finite set of group elements plus a tail declaration.
    Candidates are compared by margin; a far witness outside the ball is tried
    first and the best ball element is used when it does better.
    """
    grp = window.group
    lam = {grp.check(g): q(v) for g, v in lam.items()}
    x = window.labels[0] if label is None else label
    if x not in window.labels:
        raise UsageError(f"unknown label {x!r}")
    rep = validate_partial_gpn(window)
    if not rep.ok:
        raise PreconditionError("window is not a partial pseudonorm: " + "; ".join(rep.lines()[:3]))
    entries = window.table.values()
    mprime = max(entries, default=Fraction(0))
    if mode == SPACE:
        return _avoid_space(lam, tail, window, x, mprime, search_radius)
    if mode == SPHERE:
        if any(v > 1 for v in entries) or any(v > 1 for v in lam.values()):
            raise UsageError("sphere mode needs every value at most 1")
        return _avoid_sphere(lam, tail, window, x, search_radius)
    raise UsageError(f"unknown mode {mode!r}")


def _far_elements(window: PartialGPN, x: Hashable, fill: Fraction, radius: int) -> Iterable[tuple[Any, Fraction]]:
    """Ball elements g (canonical order) with their extension value N(g, x, x)."""
    grp = window.group
    ball = [g for g in grp.ball(radius) if not grp.is_identity(g)]
    vals = extend_max(window, [(g, x, x) for g in ball], fill=fill)
    return [(g, v.value) for g, v in zip(ball, vals)]


def _avoid_space(lam, tail, window, x, mprime, radius) -> Avoidance:
    grp = window.group
    if tail.kind == BOUNDED:
        bad = [g for g, v in lam.items() if v > tail.bound]
        if bad:
            raise PreconditionError(f"λ({grp.fmt(bad[0])}) exceeds the declared bound {fmt_q(tail.bound)}")
        fill = max(mprime, tail.bound + Fraction(1, 4))
    elif tail.kind == UNBOUNDED:
        fill = mprime
    else:
        raise UsageError("space mode takes a bounded or unbounded tail")
    notes = []
    values = dict(_far_elements(window, x, fill, radius))
    best = None
    if tail.kind == BOUNDED:
        far = [g for g, v in values.items() if v == fill]
        if not far:
            raise PreconditionError("no element within the search radius reaches the fill value")
        # a far element outside the λ-ball only has the bound to go on
        for g in far:
            lv, exact = (lam[g], True) if g in lam else (tail.bound, False)
            cand = (fill - lv, g, lv, exact)
            if best is None or cand[0] > best[0]:
                best = cand
        notes.append(f"far witness margin {fmt_q(best[0])} (fill {fmt_q(fill)} against bound {fmt_q(tail.bound)})")
    else:
        high = [g for g in _candidates(grp, lam) if lam[g] > fill + Fraction(1, 4)]
        if not high:
            raise PreconditionError(f"unbounded tail declared but no supplied λ value exceeds {fmt_q(fill + Fraction(1, 4))}")
        for g in high:
            v = values.get(g)
            if v is None:
                v = extend_max(window, [(g, x, x)], fill=fill)[0].value
            cand = (lam[g] - v, g, lam[g], True)
            if best is None or cand[0] > best[0]:
                best = cand
    far_margin, far_g = best[0], best[1]
    for g in _candidates(grp, lam):
        v = values.get(g)
        if v is None:
            continue
        cand = (abs(lam[g] - v), g, lam[g], True)
        if cand[0] > best[0]:
            notes.append(f"ball element {grp.fmt(g)} beats the far witness")
            best = cand
    margin, g, lv, exact = best
    wv = values.get(g)
    if wv is None:
        wv = extend_max(window, [(g, x, x)], fill=fill)[0].value
    return Avoidance(SPACE, tail.kind, fill, window, g, wv, lv, exact, margin,
                     far_witness=far_g, far_margin=far_margin, notes=notes)


def _avoid_sphere(lam, tail, window, x, radius) -> Avoidance:
    grp = window.group
    positive = [v for (g, i, j), v in window.table.items() if v > 0]
    if not positive:
        raise PreconditionError("window has no positive entry")
    m = min(positive)
    hops = math.ceil(1 / m) + 1
    fill = Fraction(1)
    if tail.kind == BELOW_IO:
        values = dict(_far_elements(window, x, fill, radius))
        low = [g for g in _candidates(grp, lam) if lam[g] <= Fraction(3, 4) and g in values]
        if not low:
            raise PreconditionError("tail promises λ ≤ 3/4 infinitely often but no supplied value is that small")
        g = low[0]
        for h in low[1:]:
            if abs(lam[h] - values[h]) > abs(lam[g] - values[g]):
                g = h
        margin = abs(lam[g] - values[g])
        return Avoidance(SPHERE, BELOW_IO, fill, window, g, values[g], lam[g], True, margin,
                         restriction_ok=True, notes=[f"m = {fmt_q(m)}, M = {hops}"])
    if tail.kind != ABOVE:
        raise UsageError("sphere mode takes an above or below-io tail")
    dist = hop_distances(window, hops - 1)
    far = [g for g in _candidates(grp, lam) if lam[g] > Fraction(3, 4) and g not in dist]
    if not far:
        raise PreconditionError(f"no supplied element with λ > 3/4 needs {hops} or more domain factors")
    g = far[0]
    for h in far[1:]:
        if lam[h] > lam[g]:
            g = h
    table = window.with_entries({(g, x, x): Fraction(1, 2)})
    vals = extend_max(table, window.domain() + [(g, x, x)], fill=fill)
    restriction = all(v.value == window.table[k] for k, v in zip(window.domain(), vals))
    wv = vals[-1].value
    if not restriction:
        raise PreconditionError("extension changed the window; the hop bound did not hold")
    return Avoidance(SPHERE, ABOVE, fill, table, g, wv, lam[g], True, lam[g] - wv, hop_distance=hops,
                     restriction_ok=restriction, far_witness=g, far_margin=lam[g] - wv, notes=[f"m = {fmt_q(m)}, M = {hops}"])


# ---------------------------------------------------------------------------
# Metric realization
# ---------------------------------------------------------------------------


@dataclass
class MetricWindow:
    group: Group
    points: list[tuple[Hashable, Any]]
    dist: list[list[Fraction]]
    base: dict[Hashable, int]
    moves: list[list[int]]
    kernels: dict[Hashable, Subgroup]
    notes: list[str] = field(default_factory=list)
    report: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.report

    def labels(self) -> list[str]:
        return [f"{i}:{self.group.fmt(g)}" for i, g in self.points]


def realize_metric(p: PartialGPN, radius: int, fill: Any = None) -> MetricWindow:
    """Points g·x_i for g in the ball, collapsed modulo the point stabilizers."""
    grp = p.group
    fill = None if fill is None else q(fill)
    if fill is None and not is_sufficient(p):
        raise PreconditionError("table is not sufficient and no fill value was given")
    notes = []
    kernels = zero_kernels(p)
    ball = grp.ball(radius)
    points: list[tuple[Hashable, Any]] = []
    where: dict[tuple[Hashable, Any], int] = {}
    for i in p.labels:
        reps: list[Any] = []
        for g in ball:
            hit = None
            for r in reps:
                if kernels[i].contains(grp.mul(grp.inv(r), g)):
                    hit = r
                    break
            if hit is None:
                reps.append(g)
                where[(i, g)] = len(points)
                points.append((i, g))
            else:
                where[(i, g)] = where[(i, hit)]
    n = len(points)
    queries = sorted({(grp.mul(grp.inv(a), b), i, j) for (i, a) in points for (j, b) in points},
                     key=lambda k: (p.labels.index(k[1]), p.labels.index(k[2]), grp.key(k[0])))
    vals = {k: v.value for k, v in zip(queries, extend_max(p, queries, fill=fill, check=False))}
    dist = [[Fraction(0)] * n for _ in range(n)]
    for s, (i, a) in enumerate(points):
        for t, (j, b) in enumerate(points):
            v = vals[(grp.mul(grp.inv(a), b), i, j)]
            if isinstance(v, AboveCap):
                raise PreconditionError("distance beyond the search cap")
            dist[s][t] = v
    moves = []
    for s_gen in grp.generators():
        row = []
        for (i, a) in points:
            row.append(where.get((i, grp.mul(s_gen, a)), -1))
        moves.append(row)
    base = {i: where[(i, grp.identity)] for i in p.labels}
    mw = MetricWindow(grp, points, dist, base, moves, kernels, notes)
    mw.report = audit_metric(mw, p, fill)
    return mw


def audit_metric(mw: MetricWindow, p: PartialGPN, fill: Fraction | None = None) -> list[str]:
    """Metric axioms, equivariance on window moves, and the kernel audit."""
    grp = mw.group
    d = mw.dist
    n = len(d)
    bad = []
    for a in range(n):
        if d[a][a] != 0:
            bad.append(f"d(p{a},p{a}) != 0")
        for b in range(n):
            if d[a][b] != d[b][a]:
                bad.append(f"asymmetric at {a},{b}")
            if a != b and d[a][b] <= 0:
                bad.append(f"distinct points {a},{b} at distance {fmt_q(d[a][b])}")
    for a, b, c in itertools.product(range(n), repeat=3):
        if d[a][c] > d[a][b] + d[b][c]:
            bad.append(f"triangle fails on {a},{b},{c}")
    for row in mw.moves:
        for a in range(n):
            for b in range(n):
                if row[a] >= 0 and row[b] >= 0 and d[row[a]][row[b]] != d[a][b]:
                    bad.append(f"move changes d({a},{b})")
    for (i, g) in mw.points:
        v = extend_max(p, [(g, i, i)], fill=fill, check=False)[0].value
        if (v == 0) != mw.kernels[i].contains(g):
            bad.append(f"kernel audit fails at {i}:{grp.fmt(g)}")
    return bad
