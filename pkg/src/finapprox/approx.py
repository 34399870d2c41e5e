"""Finite approximation of actions on tournaments and K_n-free graphs.

Both constructions pick a finite-index normal subgroup N (or K) from a witness
search, then read the finite structure off the quotient Q = Γ/N.  Orbits
become Q/φ(M_j); the relation is decided by (double) coset labels computed in
Q with array operations.  Every result is validated from scratch before it is
returned.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Any, Callable, Sequence

import numpy as np

from . import lattice as lat
from .actions import (
    GRAPH,
    TOURNAMENT,
    CosetActionSpec,
    FiniteActionWindow,
    Report,
    find_cliques,
    validate_clique_free,
    validate_tournament,
)
from .groups import (
    FREE_ABELIAN,
    FiniteQuotient,
    Group,
    NotFound,
    PreconditionError,
    Subgroup,
    UnsupportedError,
    UsageError,
)
from .profinite import (
    GOOD,
    Demand,
    WitnessCertificate,
    _abelian_good,
    _certify,
    candidate_kernels,
    double_coset_ids,
    is_good,
    rz3_graph_witness,
    tournament_2rz_witness,
)


class InternalInvariantError(RuntimeError):
    """A constructed approximation failed its own validation (a bug certificate)."""


@dataclass
class ApproximationResult:
    window: FiniteActionWindow
    embedding: list[tuple[int, Any, int]]  # (orbit, element g, vertex of g x_j)
    certificate: WitnessCertificate | None
    transcript: dict = field(default_factory=dict)
    stabilizers: list[Subgroup] = field(default_factory=list)
    audit: list[str] = field(default_factory=list)

    def vertex_of(self, j: int, g: Any) -> int:
        for i, h, v in self.embedding:
            if i == j and h == g:
                return v
        raise KeyError((j, g))


class _QuotientOrbits:
    """Orbits Q/S_j of a finite quotient, with canonical Γ representatives."""

    def __init__(self, fq: FiniteQuotient, stabilizers: Sequence[Subgroup]):
        self.fq = fq
        self.q = q = fq.target
        self.subs = [fq.image(m) for m in stabilizers]
        self.lifts = [fq.lift(m) for m in stabilizers]
        self.reps = [l.coset_reps() for l in self.lifts]
        self.qreps = [np.array([fq.apply(r) for r in reps], dtype=np.int64) for reps in self.reps]
        self.cid = []
        for s, qr in zip(self.subs, self.qreps):
            c = np.full(q.order, -1, dtype=np.int64)
            for k, x in enumerate(qr):
                c[q.mul_table[x, s]] = k
            self.cid.append(c)
        self.offsets = np.cumsum([0] + [len(r) for r in self.reps]).tolist()
        self._dc: dict[tuple[int, int], np.ndarray] = {}

    def dc(self, i: int, j: int) -> np.ndarray:
        if (i, j) not in self._dc:
            self._dc[(i, j)] = double_coset_ids(self.q, self.subs[i], self.subs[j])
        return self._dc[(i, j)]

    @property
    def size(self) -> int:
        return self.offsets[-1]

    def vertex(self, j: int, g: Any) -> int:
        return self.offsets[j] + int(self.cid[j][self.fq.apply(g)])

    def vertices(self) -> list[tuple[int, Any]]:
        return [(j, r) for j, reps in enumerate(self.reps) for r in reps]

    def block_products(self, i: int, j: int) -> np.ndarray:
        """X[u, v] = q_u^-1 q_v for u in orbit i, v in orbit j."""
        q = self.q
        return q.mul_table[q.inv_table[self.qreps[i]][:, None], self.qreps[j][None, :]]

    def moves(self) -> np.ndarray:
        q = self.q
        out = np.empty((len(self.fq.images), self.size), dtype=np.int64)
        for s, y in enumerate(self.fq.images):
            parts = [self.offsets[j] + self.cid[j][q.mul_table[y, qr]] for j, qr in enumerate(self.qreps)]
            out[s] = np.concatenate(parts) if parts else np.empty(0, dtype=np.int64)
        return out


def _points(spec: CosetActionSpec) -> list[list[Any]]:
    """Points of the partial data, per orbit, deduplicated by left coset."""
    grp = spec.group
    pts: list[list[Any]] = [[grp.identity] for _ in spec.orbits]
    extra = [(j, f) for j, fs in enumerate(spec.in_arrows) for f in fs]
    extra += [(j, f) for (i, j), fs in sorted(spec.cross.items()) for f in fs]
    for j, f in extra:
        if not any(spec.orbits[j].same_left_coset(f, p) for p in pts[j]):
            pts[j].append(f)
    return pts


def tournament_triples(spec: CosetActionSpec) -> list[tuple[Any, Subgroup, Subgroup]]:
    grp = spec.group
    triples = []
    seen = set()

    def add(g: Any, k: Subgroup, h: Subgroup) -> None:
        key = (g, k, h)
        if key not in seen:
            seen.add(key)
            triples.append((g, k, h))

    for j, fs in enumerate(spec.in_arrows):
        m = spec.orbits[j]
        for f in fs:
            for g in fs:
                add(grp.mul(g, f), m.conjugate(g), m)
    for (i, j), fs in sorted(spec.cross.items()):
        if i > j:
            continue
        for f in fs:
            for g in spec.cross.get((j, i), []):
                add(grp.mul(g, f), spec.orbits[i].conjugate(g), spec.orbits[j])
    # keep distinct points of the data distinct in the quotient
    trivial = Subgroup.trivial(grp)
    for j, pts in enumerate(_points(spec)):
        for a, b in itertools.permutations(pts, 2):
            add(grp.mul(grp.inv(a), b), trivial, spec.orbits[j])
    return triples


def approximate_tournament(partial: CosetActionSpec, bound: int = 4,
                           oracle: Callable[..., WitnessCertificate | NotFound] = tournament_2rz_witness,
                           ) -> ApproximationResult | NotFound:
    if partial.kind != TOURNAMENT:
        raise UsageError("approximate_tournament needs tournament data")
    grp = partial.group
    if not partial.orbits:
        empty = FiniteActionWindow(grp, [], np.zeros((0, 0), dtype=bool),
                                   np.zeros((len(grp.generators()), 0), dtype=np.int64))
        return ApproximationResult(empty, [], None, {"F_in": [], "F_cross": {}})
    problems = partial.check_invariants()
    if problems:
        raise PreconditionError("partial data violates its invariants: " + "; ".join(problems[:5]))
    for j, m in enumerate(partial.orbits):
        v = is_good(m)
        if v.status != GOOD:
            raise PreconditionError(f"stabilizer M_{j} = {m!r} is not certified good ({v.status})")

    triples = tournament_triples(partial)
    cert = oracle(triples, list(partial.orbits), bound)
    if isinstance(cert, NotFound):
        detail = "; ".join(f"{grp.fmt(g)} outside {k!r}{h!r}N" for g, k, h in triples)
        return NotFound(cert.bound, f"{cert.detail}; triples: {detail}")
    fq = cert.kernel
    qo = _QuotientOrbits(fq, partial.orbits)
    q = qo.q
    m = partial.size

    # maximal in-orbit arrow sets, greedy over canonical coset representatives
    f_in: list[list[Any]] = []
    arrow_mask: list[np.ndarray] = []
    for j in range(m):
        dc = qo.dc(j, j)
        cid = qo.cid[j]
        chosen = list(partial.in_arrows[j])
        dcs = {int(dc[fq.apply(f)]) for f in chosen}
        cosets = {int(cid[fq.apply(f)]) for f in chosen}
        home = int(cid[q.identity])
        for r in qo.reps[j]:
            x = fq.apply(r)
            c = int(cid[x])
            if c in cosets or c == home:
                continue
            back = int(dc[q.inv_table[x]])
            if back in dcs or back == int(dc[x]):
                continue
            chosen.append(r)
            dcs.add(int(dc[x]))
            cosets.add(c)
        mask = np.zeros(len(qo.reps[j]), dtype=bool)
        mask[list(cosets)] = True
        f_in.append(chosen)
        arrow_mask.append(mask)

    # cross arrows: one representative per uncovered double coset
    f_cross: dict[tuple[int, int], list[Any]] = {}
    fwd_mask: dict[tuple[int, int], np.ndarray] = {}
    for i in range(m):
        for j in range(i + 1, m):
            dc = qo.dc(i, j)
            chosen = list(partial.cross.get((i, j), []))
            fwd = {int(dc[fq.apply(f)]) for f in chosen}
            covered = set(fwd) | {int(dc[q.inv_table[fq.apply(g)]]) for g in partial.cross.get((j, i), [])}
            for r in qo.reps[j]:
                d = int(dc[fq.apply(r)])
                if d not in covered:
                    chosen.append(r)
                    covered.add(d)
                    fwd.add(d)
            mask = np.zeros(int(dc.max()) + 1, dtype=bool)
            mask[list(fwd)] = True
            f_cross[(i, j)] = chosen
            fwd_mask[(i, j)] = mask

    n = qo.size
    adj = np.zeros((n, n), dtype=bool)
    off = qo.offsets
    for i in range(m):
        x = qo.block_products(i, i)
        adj[off[i]:off[i + 1], off[i]:off[i + 1]] = arrow_mask[i][qo.cid[i][x]]
        for j in range(i + 1, m):
            t = fwd_mask[(i, j)][qo.dc(i, j)[qo.block_products(i, j)]]
            adj[off[i]:off[i + 1], off[j]:off[j + 1]] = t
            adj[off[j]:off[j + 1], off[i]:off[i + 1]] = ~t.T
    window = FiniteActionWindow(grp, qo.vertices(), adj, qo.moves(), TOURNAMENT)

    embedding, audit = _embed_and_audit(partial, qo, window)
    report = validate_tournament(window)
    if not report.ok:
        raise InternalInvariantError("quotient tournament failed validation: " + "; ".join(report.violations[:5]))
    audit.append(f"tournament on {n} vertices: exactly one arrow per pair, generator invariant")
    transcript = {"F_in": f_in, "F_cross": f_cross, "kernel_index": fq.kernel_index,
                  "triples": len(triples)}
    return ApproximationResult(window, embedding, cert, transcript, qo.lifts, audit)


def _embed_and_audit(spec: CosetActionSpec, qo: _QuotientOrbits,
                     window: FiniteActionWindow) -> tuple[list[tuple[int, Any, int]], list[str]]:
    grp = spec.group
    fq = qo.fq
    pts = _points(spec)
    embedding = [(j, g, qo.vertex(j, g)) for j, ps in enumerate(pts) for g in ps]
    targets = [v for _, _, v in embedding]
    if len(set(targets)) != len(targets):
        raise InternalInvariantError("embedding is not injective")
    adj = window.adj
    # every relation the data decides between its points must survive
    for (i, a, u), (j, b, v) in itertools.permutations(embedding, 2):
        r = spec.related(i, grp.mul(grp.inv(a), b), j)
        if r is None:
            continue
        if bool(adj[u, v]) != r:
            raise InternalInvariantError(
                f"relation between {i}:{grp.fmt(a)} and {j}:{grp.fmt(b)} not preserved")
    # equivariance on the data's window F (and the generators)
    scope = {grp.identity}
    for fs in list(spec.in_arrows) + list(spec.cross.values()):
        scope.update(fs)
    scope |= {grp.inv(x) for x in scope}
    scope.update(grp.generators())
    for gamma in sorted(scope, key=grp.key):
        for j, a, u in embedding:
            ga = grp.mul(gamma, a)
            for j2, b, v in embedding:
                if j2 == j and spec.orbits[j].same_left_coset(ga, b):
                    moved = qo.offsets[j] + int(qo.cid[j][qo.q.mul_table[fq.apply(gamma), fq.apply(a)]])
                    if moved != v:
                        raise InternalInvariantError("embedding is not equivariant")
    for s, x in enumerate(grp.generators()):
        for j, a, u in embedding:
            if window.moves[s, u] != qo.vertex(j, grp.mul(x, a)):
                raise InternalInvariantError("generator move disagrees with the embedding")
    # stabilizers grow: M_j fixes the image of x_j
    for j, m in enumerate(spec.orbits):
        base = qo.vertex(j, grp.identity)
        for h in m.gens():
            if qo.vertex(j, h) != base:
                raise InternalInvariantError(f"generator of M_{j} moves the base point")
        if not all(qo.lifts[j].contains(h) for h in m.gens()):
            raise InternalInvariantError("M_j not contained in M_j N")
    audit = [f"embedding of {len(embedding)} points: injective, relation preserving, equivariant",
             "stabilizer containment M_j <= M_j N verified"]
    return embedding, audit


# ---------------------------------------------------------------------------
# Triangle-free and K_n-free graphs
# ---------------------------------------------------------------------------


def _window_elements(spec: CosetActionSpec, window: Sequence[Any] | None) -> list[Any]:
    grp = spec.group
    fset = {grp.identity}
    if window is None:
        for fs in list(spec.in_arrows) + list(spec.cross.values()):
            fset.update(fs)
        fset.update(spec.window)
    else:
        fset.update(grp.check(x) for x in window)
    fset |= {grp.inv(x) for x in fset}
    return sorted(fset, key=grp.key)


def _dedupe_double(grp: Group, items: list[Any], a: Subgroup, b: Subgroup) -> list[Any]:
    from .groups import in_double_coset
    out: list[Any] = []
    for u in items:
        if not any(in_double_coset(u, a, v, b) for v in out):
            out.append(u)
    return out


def graph_demands(spec: CosetActionSpec, fwin: Sequence[Any]) -> tuple[list[Demand], dict]:
    """Separation, non-edge and (for n = 3) triangle demands for the graph window."""
    grp = spec.group
    m = spec.size
    w = sorted({grp.mul(grp.inv(a), b) for a in fwin for b in fwin}, key=grp.key)
    edges: dict[tuple[int, int], list[Any]] = {}
    nonedges: dict[tuple[int, int], list[Any]] = {}
    for i in range(m):
        for j in range(m):
            e, ne = [], []
            for u in w:
                if i == j and spec.orbits[i].contains(u):
                    continue
                (e if spec.related(i, u, j) else ne).append(u)
            edges[(i, j)] = _dedupe_double(grp, e, spec.orbits[i], spec.orbits[j])
            nonedges[(i, j)] = _dedupe_double(grp, ne, spec.orbits[i], spec.orbits[j])
    demands = []
    for j in range(m):
        mj = spec.orbits[j]
        sep = [u for u in w if not mj.contains(u)]
        for u in _dedupe_double(grp, sep, mj, mj):
            demands.append(Demand(u, (mj,), "separation"))
    for (i, j), ne in nonedges.items():
        for u in ne:
            for e in edges[(i, j)]:
                demands.append(Demand(u, (spec.orbits[i], e, spec.orbits[j]), "non-edge"))
    if spec.clique == 3:
        for x, y, z in itertools.product(range(m), repeat=3):
            for e1 in edges[(x, y)]:
                for e2 in edges[(x, z)]:
                    for e3 in edges[(y, z)]:
                        demands.append(Demand(e3, (spec.orbits[y], grp.inv(e1), spec.orbits[x], e2,
                                                   spec.orbits[z]), "triangle"))
    return demands, edges


def _graph_window_adj(spec: CosetActionSpec, pts: list[tuple[int, Any]]) -> np.ndarray:
    grp = spec.group
    n = len(pts)
    adj = np.zeros((n, n), dtype=bool)
    for u, v in itertools.combinations(range(n), 2):
        (i, a), (j, b) = pts[u], pts[v]
        if spec.related(i, grp.mul(grp.inv(a), b), j):
            adj[u, v] = adj[v, u] = True
    return adj


def _graph_points(spec: CosetActionSpec, fwin: Sequence[Any]) -> list[tuple[int, Any]]:
    pts: list[tuple[int, Any]] = []
    for j, mj in enumerate(spec.orbits):
        mine: list[Any] = []
        for f in fwin:
            if not any(mj.same_left_coset(f, g) for g in mine):
                mine.append(f)
        pts.extend((j, f) for f in mine)
    return pts


def _build_graph(spec: CosetActionSpec, fq: FiniteQuotient, edges: dict) -> tuple[_QuotientOrbits, FiniteActionWindow]:
    qo = _QuotientOrbits(fq, spec.orbits)
    n = qo.size
    adj = np.zeros((n, n), dtype=bool)
    off = qo.offsets
    for i in range(spec.size):
        for j in range(spec.size):
            dc = qo.dc(i, j)
            mask = np.zeros(int(dc.max()) + 1, dtype=bool)
            for e in edges[(i, j)]:
                mask[dc[fq.apply(e)]] = True
            adj[off[i]:off[i + 1], off[j]:off[j + 1]] = mask[dc[qo.block_products(i, j)]]
    return qo, FiniteActionWindow(spec.group, qo.vertices(), adj, qo.moves(), GRAPH, spec.clique)


def approximate_triangle_free(partial: CosetActionSpec, bound: int = 30, window: Sequence[Any] | None = None,
                              oracle: Callable[..., WitnessCertificate | NotFound] = rz3_graph_witness,
                              ) -> ApproximationResult | NotFound:
    """Finite K_n-free graph (n = partial.clique) approximating the window F.x of a graph action."""
    if partial.kind != GRAPH:
        raise UsageError("approximate_triangle_free needs graph data")
    if partial.clique < 3:
        raise UsageError("clique bound must be at least 3")
    grp = partial.group
    if not partial.orbits:
        empty = FiniteActionWindow(grp, [], np.zeros((0, 0), dtype=bool),
                                   np.zeros((len(grp.generators()), 0), dtype=np.int64), GRAPH, partial.clique)
        return ApproximationResult(empty, [], None, {})
    fwin = _window_elements(partial, window)
    pts = _graph_points(partial, fwin)
    xadj = _graph_window_adj(partial, pts)
    found = find_cliques(xadj, partial.clique, limit=1)
    if found:
        raise PreconditionError("the input window already contains a clique of the forbidden size")
    demands, edges = graph_demands(partial, fwin)

    if partial.clique == 3:
        cert = oracle(grp, demands, bound)
        if isinstance(cert, NotFound):
            return cert
        qo, y = _build_graph(partial, cert.kernel, edges)
    else:
        # cliques of size >= 4 are screened directly on each candidate quotient
        cert = None
        for fq in candidate_kernels(grp, bound, prefer_odd=True):
            c = _certify(fq, demands, [])
            if c is None:
                continue
            qo, y = _build_graph(partial, fq, edges)
            if not find_cliques(y.adj, partial.clique, limit=1):
                cert = c
                break
        if cert is None:
            return NotFound(bound, f"no kernel within the bound gives a K_{partial.clique}-free quotient")

    report = validate_clique_free(y, partial.clique)
    if not report.ok:
        raise InternalInvariantError("quotient graph failed validation: " + "; ".join(report.violations[:5]))
    embedding = [(j, f, qo.vertex(j, f)) for j, f in pts]
    targets = [v for _, _, v in embedding]
    if len(set(targets)) != len(targets):
        raise InternalInvariantError("graph embedding is not injective")
    for u, v in itertools.combinations(range(len(pts)), 2):
        if bool(xadj[u, v]) != bool(y.adj[targets[u], targets[v]]):
            raise InternalInvariantError(f"pair {pts[u]}, {pts[v]} changed adjacency")
    for s, x in enumerate(grp.generators()):
        for j, f, u in embedding:
            if y.moves[s, u] != qo.vertex(j, grp.mul(x, f)):
                raise InternalInvariantError("graph embedding is not equivariant")
    audit = [f"graph on {y.size} vertices has no {partial.clique}-clique",
             f"embedding of {len(pts)} window points preserves edges and non-edges"]
    transcript = {"demands": len(demands), "kernel_index": cert.kernel.kernel_index,
                  "edges": {k: v for k, v in edges.items() if v}}
    return ApproximationResult(y, embedding, cert, transcript, qo.lifts, audit)


# ---------------------------------------------------------------------------
# The Z^2 obstruction
# ---------------------------------------------------------------------------


def z2_counterexample() -> CosetActionSpec:
    """Two orbits of Z^2 with stabilizers <b> and <2a - b>; no finite approximation exists."""
    grp = Group.free_abelian(2)
    hx = Subgroup.generated(grp, [(0, 1)])
    hy = Subgroup.generated(grp, [(2, -1)])
    a = (1, 0)

    def rule(i: int, g: Any, j: int) -> bool:
        p, q = g
        if i == j == 0:
            return p > 0
        if i == j == 1:
            return p + 2 * q > 0
        if (i, j) == (1, 0):
            return p % 2 == 0
        return p % 2 == 1

    spec = CosetActionSpec(grp, [hx, hy], [[a], [a]], {(1, 0): [(0, 0)], (0, 1): [a]},
                           kind=TOURNAMENT, rule=rule, labels=["x", "y"])
    spec.notes.append("marked relations: R(y, x) and R(x, a.y)")
    return spec


Z2_MARKED = [(1, (0, 0), 0), (0, (1, 0), 1)]


@dataclass
class RefutationCertificate:
    bound: int
    entries: list[tuple[tuple, str]]
    exhaustive: bool
    parity_audit: list[tuple[tuple, bool]] = field(default_factory=list)

    @property
    def candidates(self) -> int:
        return len(self.entries)

    def reasons(self) -> dict[str, int]:
        out: dict[str, int] = {}
        for _, r in self.entries:
            key = r.split(":")[0]
            out[key] = out.get(key, 0) + 1
        return out


@dataclass
class FoundApproximation:
    candidate: tuple
    window: FiniteActionWindow
    report: Report


def overgroups(h: Subgroup, bound: int) -> list[tuple]:
    d = h.group.rank
    out = []
    for n in range(1, bound + 1):
        for b in lat.sublattices_of_index(n, d):
            if all(lat.contains(b, g) for g in h.gens()):
                out.append(b)
    return out


def _facts(spec: CosetActionSpec, marked: Sequence[tuple[int, Any, int]]) -> list[tuple[int, Any, int]]:
    facts = [(i, spec.group.check(g), j) for i, g, j in marked]
    for j, fs in enumerate(spec.in_arrows):
        facts.extend((j, f, j) for f in fs)
    for (i, j), fs in spec.cross.items():
        facts.extend((i, f, j) for f in fs)
    return facts


def refute_approximation(spec: CosetActionSpec, marked: Sequence[tuple[int, Any, int]], index_bound: int,
                         audit_element: Any = None) -> RefutationCertificate | FoundApproximation:
    """Exhaust finite-index overgroups K_j of the stabilizers, recording why each fails."""
    grp = spec.group
    if grp.backend != FREE_ABELIAN:
        raise UnsupportedError("refutation search enumerates lattice overgroups; free abelian groups only")
    if not spec.orbits:
        raise UsageError("spec needs at least one orbit")
    d = grp.rank
    facts = _facts(spec, marked)
    for i, g, j in marked:
        if spec.related(i, g, j) is False:
            raise UsageError(f"marked relation R({i}, {grp.fmt(g)}, {j}) is not an arrow of the spec")
    per_orbit = [overgroups(m, index_bound) for m in spec.orbits]
    good_cache: dict[tuple, bool] = {}

    def good(b: tuple) -> bool:
        if b not in good_cache:
            good_cache[b] = _abelian_good(Subgroup(grp, basis=b)).status == GOOD
        return good_cache[b]

    entries = []
    parity = []
    for combo in itertools.product(*per_orbit):
        reason = None
        bad = [j for j, b in enumerate(combo) if not good(b)]
        if bad:
            reason = f"not good: K_{spec.orbit_label(bad[0])}"
        elif audit_element is not None:
            parity.append((combo, lat.contains(lat.lattice_sum(d, *combo), audit_element)))
        if reason is None:
            for i, g, j in facts:
                if i == j and lat.contains(combo[j], g):
                    reason = f"collapse: {grp.fmt(g)} in K_{spec.orbit_label(j)}"
                    break
        if reason is None:
            reason = _conflict(grp, combo, facts, spec)
        if reason is None:
            window = _orient_quotient(spec, combo, facts)
            report = validate_tournament(window)
            if report.ok:
                return FoundApproximation(combo, window, report)
            reason = "construction failed: " + report.violations[0]
        entries.append((combo, reason))
    return RefutationCertificate(index_bound, entries, True, parity)


def _pair_class(grp: Group, combo: tuple, i: int, g: Any, j: int) -> tuple[int, int, tuple, bool]:
    """Normalise R(x_i, g x_j) to (min orbit, max orbit, residue class, forward?)."""
    d = grp.rank
    if i <= j:
        return i, j, lat.reduce(g, lat.lattice_sum(d, combo[i], combo[j])), True
    return j, i, lat.reduce(grp.inv(g), lat.lattice_sum(d, combo[i], combo[j])), False


def _conflict(grp: Group, combo: tuple, facts: list, spec: CosetActionSpec) -> str | None:
    seen: dict[tuple, tuple[bool, tuple]] = {}
    for i, g, j in facts:
        keys = [_pair_class(grp, combo, i, g, j)]
        if i == j:
            keys.append((i, i, lat.reduce(grp.inv(g), combo[i]), False))
        for a, b, cls, fwd in keys:
            prev = seen.get((a, b, cls))
            if prev is not None and prev[0] != fwd:
                return (f"relation conflict: R({spec.orbit_label(i)}, {grp.fmt(g)}, {spec.orbit_label(j)}) "
                        f"against R({spec.orbit_label(prev[1][0])}, {grp.fmt(prev[1][1])}, "
                        f"{spec.orbit_label(prev[1][2])})")
            seen[(a, b, cls)] = (fwd, (i, g, j))
    return None


def _orient_quotient(spec: CosetActionSpec, combo: tuple, facts: list) -> FiniteActionWindow:
    grp = spec.group
    d = grp.rank
    oriented: dict[tuple, bool] = {}
    for i, g, j in facts:
        a, b, cls, fwd = _pair_class(grp, combo, i, g, j)
        oriented[(a, b, cls)] = fwd
        if i == j:
            oriented[(i, i, lat.reduce(grp.inv(g), combo[i]))] = not fwd
    vertices = [(j, r) for j, b in enumerate(combo) for r in lat.residues(b, d)]
    n = len(vertices)
    adj = np.zeros((n, n), dtype=bool)
    for u, v in itertools.combinations(range(n), 2):
        (i, x), (j, y) = vertices[u], vertices[v]
        g = tuple(p - q for p, q in zip(y, x))
        a, b, cls, fwd = _pair_class(grp, combo, i, g, j)
        if (a, b, cls) not in oriented:
            if i == j:
                neg = lat.reduce(grp.inv(g), combo[i])
                oriented[(a, b, cls)] = cls < neg
                oriented[(a, b, neg)] = not (cls < neg)
            else:
                oriented[(a, b, cls)] = True
        forward = oriented[(a, b, cls)] == fwd
        adj[u, v] = forward
        adj[v, u] = not forward
    index = {(j, lat.reduce(r, combo[j])): k for k, (j, r) in enumerate(vertices)}
    gens = grp.generators()
    moves = np.array([[index[(j, lat.reduce(grp.mul(s, r), combo[j]))] for j, r in vertices] for s in gens],
                     dtype=np.int64).reshape(len(gens), n)
    return FiniteActionWindow(grp, vertices, adj, moves, TOURNAMENT)
