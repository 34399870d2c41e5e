"""Goodness tests and separability witnesses over finite quotients.

A subgroup H is *good* when there are no g outside H and h inside H with
g h g in H.  Witness searches scan finite quotients in a fixed order, and
every certificate they return can be re-checked from its stored data.
"""
from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from typing import Any, Iterator, Sequence

import numpy as np

from . import lattice as lat
from .groups import (
    FREE,
    FREE_ABELIAN,
    FINITE,
    FiniteQuotient,
    Group,
    NotFound,
    PreconditionError,
    Subgroup,
    Unknown,
    UnsupportedError,
    UsageError,
    enumerate_finite_quotients,
    product_membership,
    subset_product,
)
from .folding import closed_words

GOOD = "good"
NOT_GOOD = "not-good"
UNKNOWN = "unknown"


@dataclass(frozen=True)
class GoodnessVerdict:
    status: str
    method: str
    witness: tuple | None = None
    radius: int | None = None

    @property
    def good(self) -> bool:
        return self.status == GOOD

    def __bool__(self) -> bool:
        raise TypeError("inspect .status instead of truth-testing a verdict")


# ---------------------------------------------------------------------------
# Goodness
# ---------------------------------------------------------------------------


def _abelian_good(h: Subgroup) -> GoodnessVerdict:
    d = h.group.rank
    diag, _, vinv = lat.smith(h.basis, d)
    for k, s in enumerate(diag):
        if s % 2 == 0:
            g = tuple((s // 2) * x for x in vinv[k])
            return GoodnessVerdict(NOT_GOOD, "abelian-invariants", (g, h.group.identity))
    return GoodnessVerdict(GOOD, "abelian-invariants")


def _finite_index_good(h: Subgroup) -> GoodnessVerdict:
    # H acts on Γ/H; g is a witness iff the coset g^-1 H lies in the H-orbit of gH.
    grp = h.group
    reps = h.coset_reps()
    gens = h.gens()
    gens = gens + [grp.inv(x) for x in gens]
    seen = [False] * len(reps)
    seen[0] = True
    for start, g in enumerate(reps):
        if seen[start]:
            continue
        target = h.coset_index(grp.inv(g))
        via: dict[int, Any] = {start: grp.identity}
        queue = deque([start])
        seen[start] = True
        while queue:
            c = queue.popleft()
            if c == target:
                return GoodnessVerdict(NOT_GOOD, "finite-index-double-coset", (g, via[c]))
            for x in gens:
                t = h.coset_index(grp.mul(x, reps[c]))
                if t not in via:
                    via[t] = grp.mul(x, via[c])
                    seen[t] = True
                    queue.append(t)
    return GoodnessVerdict(GOOD, "finite-index-double-coset")


def _ball_good(h: Subgroup, radius: int) -> GoodnessVerdict:
    grp = h.group
    hs = closed_words(h.graph, radius) if h.graph is not None else [grp.identity]
    for g in grp.ball(radius):
        if h.contains(g):
            continue
        for x in hs:
            if h.contains(grp.mul(grp.mul(g, x), g)):
                return GoodnessVerdict(NOT_GOOD, "ball-search", (g, x), radius)
    return GoodnessVerdict(UNKNOWN, "ball-search", None, radius)


def is_good(h: Subgroup, search_radius: int = 4) -> GoodnessVerdict:
    grp = h.group
    if grp.backend == FREE_ABELIAN:
        return _abelian_good(h)
    if h.index() is not None:
        return _finite_index_good(h)
    if grp.backend == FREE and h.is_trivial():
        # free groups are torsion free, so g g = 1 forces g = 1
        return GoodnessVerdict(GOOD, "torsion-free")
    return _ball_good(h, search_radius)


def finite_is_good(q: Group, s: np.ndarray) -> tuple[int, int] | None:
    """Goodness of a subgroup S of a finite group; returns a witness (g, h) or None."""
    ids = double_coset_ids(q, s, s)
    inside = np.zeros(q.order, dtype=bool)
    inside[s] = True
    bad = np.nonzero((ids == ids[q.inv_table]) & ~inside)[0]
    if not bad.size:
        return None
    g = int(bad[0])
    for h in s:
        if inside[q.mul_table[q.mul_table[g, h], g]]:
            return g, int(h)
    raise AssertionError("double coset bookkeeping disagrees with the direct check")


def double_coset_ids(q: Group, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Label every element of q by its double coset A x B (labels in canonical order)."""
    ids = np.full(q.order, -1, dtype=np.int64)
    a = np.asarray(a, dtype=np.int64)
    b = np.asarray(b, dtype=np.int64)
    k = 0
    for e in q.elements():
        if ids[e] >= 0:
            continue
        ids[q.mul_table[np.ix_(q.mul_table[a, e], b)].ravel()] = k
        k += 1
    return ids


@dataclass(frozen=True)
class IntersectionVerdict:
    verdict: GoodnessVerdict
    intersection: Subgroup
    failed_inputs: tuple[int, ...]


def intersection_good_check(hs: Sequence[Subgroup], search_radius: int = 4) -> IntersectionVerdict:
    if not hs:
        raise UsageError("need at least one subgroup")
    grp = hs[0].group
    if grp.backend != FREE_ABELIAN and any(h.index() is None for h in hs):
        raise UnsupportedError("intersection check needs all inputs of finite index or a free abelian group")
    verdicts = [is_good(h, search_radius) for h in hs]
    inter = hs[0]
    for h in hs[1:]:
        inter = inter.intersection(h)
    out = is_good(inter, search_radius)
    failed = tuple(i for i, v in enumerate(verdicts) if v.status != GOOD)
    if not failed and out.status != GOOD:
        raise AssertionError("intersection of good subgroups reported not good")
    return IntersectionVerdict(out, inter, failed)


# ---------------------------------------------------------------------------
# Demands and certificates
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Demand:
    """Requirement that target lies outside (factor_1 ... factor_n) K.

    Factors are subgroups or single elements.
    """

    target: Any
    factors: tuple
    label: str = "separation"

    def describe(self, grp: Group) -> str:
        parts = [repr(f) if isinstance(f, Subgroup) else grp.fmt(f) for f in self.factors]
        return f"{grp.fmt(self.target)} not in {' '.join(parts)} K"


def _is_subgroup(x: Any) -> bool:
    return isinstance(x, Subgroup)


def demand_holds(fq: FiniteQuotient, d: Demand) -> bool:
    """Exact test of the demand modulo ker(fq)."""
    grp = fq.source
    if grp.backend == FREE_ABELIAN and fq.kernel_basis is not None:
        shift = d.target
        bases = [fq.kernel_basis]
        for f in d.factors:
            if _is_subgroup(f):
                bases.append(f.basis)
            else:
                shift = grp.mul(shift, grp.inv(f))
        return not lat.contains(lat.lattice_sum(grp.rank, *bases), shift)
    q = fq.target
    sets = [fq.image(f) if _is_subgroup(f) else np.array([fq.apply(f)]) for f in d.factors]
    return not bool(np.isin(fq.apply(d.target), subset_product(q, *sets)))


def demand_in_group(grp: Group, d: Demand, bound: int = 6) -> bool | Unknown:
    """Does the demand already hold in the group itself (no kernel)?"""
    if grp.backend == FREE_ABELIAN:
        shift = d.target
        bases = []
        for f in d.factors:
            if _is_subgroup(f):
                bases.append(f.basis)
            else:
                shift = grp.mul(shift, grp.inv(f))
        return not lat.contains(lat.lattice_sum(grp.rank, *bases), shift)
    # move element factors to the right by conjugating the subgroups past them
    subs: list[Subgroup] = []
    tail = grp.identity
    for f in reversed(d.factors):
        if _is_subgroup(f):
            subs.append(f.conjugate(grp.inv(tail)) if tail != grp.identity else f)
        else:
            tail = grp.mul(f, tail)
    subs.reverse()
    rest = grp.mul(d.target, grp.inv(tail))
    if not subs:
        return rest != grp.identity
    res = product_membership(rest, subs, bound=bound)
    if isinstance(res, Unknown):
        return res
    return not res


@dataclass
class Condition:
    kind: str  # "separation" or "goodness"
    demand: Demand | None = None
    subgroup: Subgroup | None = None
    passed: bool = False
    transcript: str = ""

    def verify(self, fq: FiniteQuotient) -> bool:
        if self.kind == "separation":
            return demand_holds(fq, self.demand)
        return quotient_good(fq, self.subgroup)


def quotient_good(fq: FiniteQuotient, m: Subgroup) -> bool:
    """Is M ker(fq) good?  Exact: equivalent to goodness of the image in the quotient."""
    if fq.kernel_basis is not None:
        return _abelian_good(fq.lift(m)).status == GOOD
    return finite_is_good(fq.target, fq.image(m)) is None


@dataclass
class WitnessCertificate:
    kernel: FiniteQuotient
    conditions: list[Condition] = field(default_factory=list)
    flags: list[str] = field(default_factory=list)

    def reverify(self) -> bool:
        return all(c.verify(self.kernel) for c in self.conditions)

    def describe(self) -> dict:
        return {
            "kernel": self.kernel.describe(),
            "conditions": [{"kind": c.kind, "passed": c.passed, "transcript": c.transcript} for c in self.conditions],
            "flags": list(self.flags),
        }


def _certify(fq: FiniteQuotient, demands: Sequence[Demand], goods: Sequence[Subgroup],
             flags: Sequence[str] = ()) -> WitnessCertificate | None:
    conds = []
    grp = fq.source
    for d in demands:
        if not demand_holds(fq, d):
            return None
        conds.append(Condition("separation", demand=d, passed=True, transcript=d.describe(grp)))
    for m in goods:
        if not quotient_good(fq, m):
            return None
        conds.append(Condition("goodness", subgroup=m, passed=True, transcript=f"{m!r} K is good"))
    return WitnessCertificate(fq, conds, list(flags))


def candidate_kernels(grp: Group, bound: int, *, prefer_odd: bool = False) -> Iterator[FiniteQuotient]:
    """Non-trivial finite quotients in scan order.

    Z^d with prefer_odd: c Z^d for odd c >= 3 then even c >= 2, all c <= bound.
    Otherwise the enumerate_finite_quotients order, skipping the index-1 quotient.
    """
    if grp.backend == FREE_ABELIAN and prefer_odd:
        order = sorted(range(2, bound + 1), key=lambda c: (c % 2 == 0, c))
        for c in order:
            yield FiniteQuotient.from_lattice(grp, lat.scaled_identity(c, grp.rank))
        return
    if grp.backend == FINITE:
        yield FiniteQuotient(grp, grp, grp.gen_elements)
        return
    for fq in enumerate_finite_quotients(grp, bound):
        if fq.kernel_index > 1:
            yield fq


# ---------------------------------------------------------------------------
# Witness searches
# ---------------------------------------------------------------------------


def _require_good(h: Subgroup, what: str) -> None:
    v = is_good(h)
    if v.status != GOOD:
        raise PreconditionError(f"{what} = {h!r} is not certified good ({v.status}, {v.method})")


def _generator(h: Subgroup) -> int:
    return h.basis[0][0] if h.basis else 0


def tournament_2rz_witness(triples: Sequence[tuple[Any, Subgroup, Subgroup]], goods: Sequence[Subgroup],
                           bound: int = 4) -> WitnessCertificate | NotFound:
    """Finite-index normal N with g_i outside K_i H_i N and every M_j N good."""
    grp = goods[0].group if goods else (triples[0][1].group if triples else None)
    if grp is None:
        raise UsageError("nothing to witness: give at least one triple or good subgroup")
    demands = []
    for idx, (g, k, h) in enumerate(triples):
        g = grp.check(g)
        _require_good(k, f"K_{idx}")
        _require_good(h, f"H_{idx}")
        res = product_membership(g, [k, h])
        if isinstance(res, Unknown):
            raise PreconditionError(f"triple {idx}: membership of {grp.fmt(g)} in K H is undecided")
        if res:
            raise PreconditionError(f"triple {idx}: {grp.fmt(g)} lies in K H")
        demands.append(Demand(g, (k, h)))
    for j, m in enumerate(goods):
        _require_good(m, f"M_{j}")

    if grp.backend == FREE_ABELIAN and grp.rank == 1:
        mods = [_generator(m) for m in goods]
        mods += [_generator(Subgroup.generated(grp, k.gens() + h.gens())) for _, k, h in triples]
        base = 1
        for x in mods:
            if x:
                base = math.lcm(base, x)
        top = max([abs(grp.check(g)[0]) for g, _, _ in triples], default=0)
        if base % 2 == 0:
            raise PreconditionError("an even modulus appeared; good inputs should make them all odd")
        c = base
        while c <= top or c <= 1:
            c += 2 * base
        fq = FiniteQuotient.from_lattice(grp, lat.scaled_identity(c, 1))
        cert = _certify(fq, demands, goods)
        if cert is None:
            raise AssertionError("fast-path modulus failed re-verification")
        return cert

    for fq in candidate_kernels(grp, bound):
        cert = _certify(fq, demands, goods)
        if cert is not None:
            return cert
    return NotFound(bound, "no quotient within the bound separates every triple with good products")


def rz_witness(g: Any, factors: Sequence[Subgroup], bound: int = 4, *,
               assume_outside: bool = False) -> WitnessCertificate | NotFound:
    """Finite-index normal K with g outside H_1 ... H_n K."""
    if not factors:
        raise UsageError("at least one factor is required")
    grp = factors[0].group
    g = grp.check(g)
    flags = []
    res = product_membership(g, list(factors), bound=bound + 4)
    if isinstance(res, Unknown):
        if not assume_outside:
            raise PreconditionError(f"membership of {grp.fmt(g)} in the product is undecided")
        flags.append(f"non-membership assumed (search bound {res.bound})")
    elif res:
        raise PreconditionError(f"{grp.fmt(g)} lies in the product")
    demand = Demand(g, tuple(factors))

    if grp.backend == FREE_ABELIAN:
        d = grp.rank
        basis = lat.lattice_sum(d, *(f.basis for f in factors))
        diag, v, _ = lat.smith(basis, d)
        exponent = 1
        for s in diag:
            exponent = math.lcm(exponent, s)
        y = lat.to_smith_coords(g, v)
        free = [abs(x) for x in y[len(diag):]]
        if free:
            m = max(3, max(free) + 1)
            if m % 2 == 0:
                m += 1
        else:
            m = 1
        for _ in range(64):
            c = exponent * m
            fq = FiniteQuotient.from_lattice(grp, lat.scaled_identity(c, d))
            cert = _certify(fq, [demand], [], flags)
            if cert is not None:
                return cert
            m += 2 if free else 1
        raise AssertionError("lattice witness failed to verify")

    for fq in candidate_kernels(grp, bound):
        cert = _certify(fq, [demand], [], flags)
        if cert is not None:
            return cert
    return NotFound(bound, "no quotient within the bound separates the element")


def rz3_graph_witness(grp: Group, demands: Sequence[Demand], bound: int = 30,
                      check_preconditions: bool = True) -> WitnessCertificate | NotFound:
    """Finite-index normal K satisfying every listed emptiness demand."""
    flags = []
    if check_preconditions:
        for d in demands:
            res = demand_in_group(grp, d)
            if isinstance(res, Unknown):
                flags.append(f"unchecked in the group: {d.describe(grp)}")
            elif not res:
                raise PreconditionError(f"demand already violated in the group: {d.describe(grp)}")
    for fq in candidate_kernels(grp, bound, prefer_odd=True):
        cert = _certify(fq, demands, [], flags)
        if cert is not None:
            return cert
    return NotFound(bound, f"{len(demands)} demands, no kernel within the bound satisfies all")


@dataclass(frozen=True)
class ProbeResult:
    kind: str  # "no-counterexample" or "counterexample"
    radius: int
    witness: tuple | None = None


def good_product_probe(h: Subgroup, n: Subgroup, search_radius: int = 4) -> ProbeResult:
    """Bounded evidence on whether HN is good for good H and good normal N."""
    _require_good(h, "H")
    _require_good(n, "N")
    normal = n.is_normal()
    if normal is not True:
        raise PreconditionError("N is not normal")
    hn = h.join(n)
    v = is_good(hn, search_radius)
    if v.status == NOT_GOOD:
        return ProbeResult("counterexample", search_radius, v.witness)
    return ProbeResult("no-counterexample", search_radius)
