"""Group actions on tournaments and graphs presented by coset data.

An orbit is Γ/M for a stabilizer M with base point x = M.  Arrows (or edges)
are recorded as lists of group elements: f in F_j means R(x_j, f x_j), and
f in F_{i,j} means R(x_i, f x_j).  Since the relation is invariant, such data
determines R on whole (double) cosets.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Any, Callable, Iterable, Sequence

import numpy as np

from .groups import (
    Group,
    PreconditionError,
    Subgroup,
    Unknown,
    UnsupportedError,
    UsageError,
    in_double_coset,
    product_membership,
)
from .profinite import GOOD, is_good

TOURNAMENT = "tournament"
GRAPH = "graph"
SET = "set"

Rule = Callable[[int, Any, int], bool]


@dataclass
class CosetActionSpec:
    group: Group
    orbits: list[Subgroup]
    in_arrows: list[list[Any]]
    cross: dict[tuple[int, int], list[Any]] = field(default_factory=dict)
    kind: str = TOURNAMENT
    clique: int = 3
    # complete=True: a cross pair not covered by F_{i,j} (i<j) is oriented j -> i
    complete: bool = False
    rule: Rule | None = None
    labels: list[str] | None = None
    notes: list[str] = field(default_factory=list)
    # extra group elements whose translates of the base points belong to the window
    window: list[Any] = field(default_factory=list)

    def __post_init__(self) -> None:
        for m in self.orbits:
            if m.group != self.group:
                raise UsageError("orbit stabilizers must live in the spec's group")
        if len(self.in_arrows) != len(self.orbits):
            raise UsageError("one in-orbit arrow list per orbit is required")
        self.in_arrows = [[self.group.check(f) for f in fs] for fs in self.in_arrows]
        self.cross = {k: [self.group.check(f) for f in v] for k, v in self.cross.items()}
        self.window = [self.group.check(f) for f in self.window]
        for (i, j) in self.cross:
            if i == j or not (0 <= i < len(self.orbits) and 0 <= j < len(self.orbits)):
                raise UsageError(f"cross arrow key {(i, j)} is not a pair of distinct orbits")

    @property
    def size(self) -> int:
        return len(self.orbits)

    def orbit_label(self, j: int) -> str:
        return self.labels[j] if self.labels else str(j)

    def related(self, i: int, g: Any, j: int) -> bool | None:
        """R(x_i, g x_j) as decided by the data; None when the data is silent."""
        grp = self.group
        if self.rule is not None:
            return self.rule(i, g, j)
        mi, mj = self.orbits[i], self.orbits[j]
        if i == j:
            if mi.contains(g):
                return False
            fwd = any(in_double_coset(g, mi, f, mi) for f in self.in_arrows[i])
            back = any(in_double_coset(grp.inv(g), mi, f, mi) for f in self.in_arrows[i])
        else:
            fwd = any(in_double_coset(g, mi, f, mj) for f in self.cross.get((i, j), []))
            back = any(in_double_coset(grp.inv(g), mj, f, mi) for f in self.cross.get((j, i), []))
        if self.kind != TOURNAMENT:
            return fwd or back
        if fwd or back:
            return fwd
        if self.complete and i != j:
            return i > j
        return None

    def check_invariants(self) -> list[str]:
        """Type invariants of the coset data; returns violation messages."""
        grp = self.group
        out = []
        for j, fs in enumerate(self.in_arrows):
            m = self.orbits[j]
            for a, b in itertools.combinations(range(len(fs)), 2):
                if m.same_left_coset(fs[a], fs[b]):
                    out.append(f"F_{j} meets a left coset twice: {grp.fmt(fs[a])}, {grp.fmt(fs[b])}")
            if self.kind == TOURNAMENT:
                for f in fs:
                    for g in fs:
                        # f M g meets M  <=>  g in M f^-1 M
                        if in_double_coset(g, m, grp.inv(f), m):
                            out.append(f"F_{j}: f M g meets M for f={grp.fmt(f)}, g={grp.fmt(g)}")
        for (i, j), fs in self.cross.items():
            mi, mj = self.orbits[i], self.orbits[j]
            for a, b in itertools.combinations(range(len(fs)), 2):
                if in_double_coset(fs[b], mi, fs[a], mj):
                    out.append(f"F_{i},{j} meets a double coset twice")
            if self.kind == TOURNAMENT and i < j:
                for f in fs:
                    for g in self.cross.get((j, i), []):
                        # f M_j meets M_i g^-1  <=>  f in M_i g^-1 M_j
                        if in_double_coset(f, mi, grp.inv(g), mj):
                            out.append(f"F_{i},{j} and F_{j},{i} clash at f={grp.fmt(f)}, g={grp.fmt(g)}")
        return out


@dataclass
class FiniteActionWindow:
    """Vertices, relation matrix and recorded generator moves (-1 = leaves window)."""

    group: Group
    vertices: list[tuple[int, Any]]
    adj: np.ndarray
    moves: np.ndarray
    kind: str = TOURNAMENT
    clique: int = 3

    @property
    def size(self) -> int:
        return len(self.vertices)

    def label(self, v: int) -> str:
        j, g = self.vertices[v]
        return f"{j}:{self.group.fmt(g)}"

    def arrows(self) -> list[tuple[int, int]]:
        if self.kind == TOURNAMENT:
            return [(int(a), int(b)) for a, b in zip(*np.nonzero(self.adj))]
        return [(int(a), int(b)) for a, b in zip(*np.nonzero(np.triu(self.adj, 1)))]

    def is_total(self) -> bool:
        return bool(np.all(self.moves >= 0))


@dataclass
class Report:
    ok: bool
    violations: list[str] = field(default_factory=list)
    checked: int = 0

    def __bool__(self) -> bool:
        return self.ok


def _window_from_relation(grp: Group, vertices: list[tuple[int, Any]], rel: Callable[[int, int], bool | None],
                          locate: Callable[[int, Any], int | None], kind: str, clique: int = 3) -> FiniteActionWindow:
    n = len(vertices)
    adj = np.zeros((n, n), dtype=bool)
    for u in range(n):
        for v in range(n):
            if u != v and rel(u, v):
                adj[u, v] = True
    gens = grp.generators()
    moves = np.full((len(gens), n), -1, dtype=np.int64)
    for s, x in enumerate(gens):
        for u, (j, g) in enumerate(vertices):
            t = locate(j, grp.mul(x, g))
            if t is not None:
                moves[s, u] = t
    return FiniteActionWindow(grp, vertices, adj, moves, kind, clique)


def materialize_window(spec: CosetActionSpec, radius: int | None = None) -> FiniteActionWindow:
    """Expand coset data into an explicit window (full when radius is None)."""
    grp = spec.group
    vertices: list[tuple[int, Any]] = []
    index: dict[tuple[int, int], int] = {}
    if radius is None:
        for j, m in enumerate(spec.orbits):
            if m.index() is None:
                raise UnsupportedError(f"orbit {j} has infinite index; full materialization is impossible")
            for k, r in enumerate(m.coset_reps()):
                index[(j, k)] = len(vertices)
                vertices.append((j, r))

        def locate(j: int, g: Any) -> int | None:
            return index[(j, spec.orbits[j].coset_index(g))]
    else:
        ball = grp.ball(radius)
        for j, m in enumerate(spec.orbits):
            reps: list[Any] = []
            for g in ball:
                if not any(m.same_left_coset(r, g) for r in reps):
                    reps.append(g)
            vertices.extend((j, r) for r in reps)

        def locate(j: int, g: Any) -> int | None:
            m = spec.orbits[j]
            for v, (i, r) in enumerate(vertices):
                if i == j and m.same_left_coset(r, g):
                    return v
            return None

    def rel(u: int, v: int) -> bool | None:
        (i, a), (j, b) = vertices[u], vertices[v]
        return spec.related(i, grp.mul(grp.inv(a), b), j)

    return _window_from_relation(grp, vertices, rel, locate, spec.kind, spec.clique)


# ---------------------------------------------------------------------------
# Validators
# ---------------------------------------------------------------------------


def validate_tournament(w: FiniteActionWindow, require_total: bool = True) -> Report:
    if w.kind != TOURNAMENT:
        raise UsageError("window is not a tournament")
    viol = []
    a = w.adj
    n = w.size
    if np.any(np.diag(a)):
        viol.append("loop arrow present")
    both = np.argwhere(np.triu(a & a.T, 1))
    for u, v in both[:20]:
        viol.append(f"both arrows between {w.label(u)} and {w.label(v)}")
    if len(both) > 20:
        viol.append(f"... {len(both) - 20} more doubled pairs")
    if require_total:
        missing = np.argwhere(np.triu(~(a | a.T), 1))
        for u, v in missing[:20]:
            viol.append(f"no arrow between {w.label(u)} and {w.label(v)}")
        if len(missing) > 20:
            viol.append(f"... {len(missing) - 20} more missing pairs")
    viol.extend(_invariance_violations(w, require_total))
    return Report(not viol, viol, n * (n - 1) // 2)


def _invariance_violations(w: FiniteActionWindow, strict: bool) -> list[str]:
    out = []
    for s in range(w.moves.shape[0]):
        mv = w.moves[s]
        inside = np.nonzero(mv >= 0)[0]
        sub = w.adj[np.ix_(inside, inside)]
        img = w.adj[np.ix_(mv[inside], mv[inside])]
        if strict:
            bad = np.argwhere(sub != img)
        else:
            # only flag a move that turns an arrow around
            bad = np.argwhere(sub & img.T)
        for p, q in bad[:10]:
            u, v = inside[p], inside[q]
            out.append(f"generator {s} does not preserve the pair ({w.label(u)}, {w.label(v)})")
        if len(bad) > 10:
            out.append(f"... {len(bad) - 10} more invariance failures for generator {s}")
    return out


def find_cliques(adj: np.ndarray, n: int, limit: int | None = None) -> list[tuple[int, ...]]:
    """Every n-clique of a symmetric adjacency matrix (exhaustive, extends along edges)."""
    size = adj.shape[0]
    nbrs = [set(np.nonzero(adj[v])[0].tolist()) for v in range(size)]
    found: list[tuple[int, ...]] = []

    def grow(clique: list[int], cands: set[int]) -> bool:
        if len(clique) == n:
            found.append(tuple(clique))
            return limit is not None and len(found) >= limit
        for v in sorted(cands):
            if v <= clique[-1]:
                continue
            if grow(clique + [v], cands & nbrs[v]):
                return True
        return False

    for v in range(size):
        if grow([v], nbrs[v]):
            break
    return found


def validate_clique_free(w: FiniteActionWindow, n: int) -> Report:
    if n < 3:
        raise UsageError("clique size must be at least 3")
    if w.kind != GRAPH:
        raise UsageError("window is not a graph")
    viol = []
    a = w.adj
    if not np.array_equal(a, a.T) or np.any(np.diag(a)):
        viol.append("adjacency is not a simple undirected graph")
    cliques = find_cliques(a, n, limit=50)
    for c in cliques:
        viol.append("clique " + ", ".join(w.label(v) for v in c))
    viol.extend(_invariance_violations(w, True))
    return Report(not viol, viol, w.size)


# ---------------------------------------------------------------------------
# Constructors
# ---------------------------------------------------------------------------


def tournament_from_good(h: Subgroup, radius: int | None = None) -> tuple[CosetActionSpec, FiniteActionWindow]:
    """Invariant tournament on Γ/H for a good H, by a greedy maximal arrow set."""
    grp = h.group
    v = is_good(h)
    if v.status != GOOD:
        raise PreconditionError(f"subgroup {h!r} is not certified good ({v.status})")
    if radius is None:
        if h.index() is None:
            raise UnsupportedError("infinite-index stabilizer needs a window radius")
        cands = sorted(h.coset_reps(), key=grp.key)
    else:
        cands = grp.ball(2 * radius)
    chosen: list[Any] = []
    for g in cands:
        if h.contains(g):
            continue
        if any(in_double_coset(g, h, f, h) for f in chosen):
            continue
        # refuse g when f h g lands in H for some f in F + {g}, i.e. g in H f^-1 H
        if any(in_double_coset(g, h, grp.inv(f), h) for f in chosen + [g]):
            continue
        chosen.append(g)
    spec = CosetActionSpec(grp, [h], [chosen], kind=TOURNAMENT)
    return spec, materialize_window(spec, radius)


def two_subgroup_graph(h1: Subgroup, h2: Subgroup, g: Any) -> CosetActionSpec:
    """Triangle-free gadget on Γ/H_1 + Γ/H_2: fH_1 ~ kH_2 iff the cosets meet."""
    grp = h1.group
    g = grp.check(g)
    spec = CosetActionSpec(grp, [h1, h2], [[], []], {(0, 1): [grp.identity], (1, 0): [grp.identity]},
                           kind=GRAPH, clique=3, window=[g])
    res = product_membership(g, [h1, h2])
    if isinstance(res, Unknown):
        spec.notes.append(f"precondition undecided: membership of {grp.fmt(g)} in H1 H2 unknown")
    elif res:
        spec.notes.append(f"precondition flag: {grp.fmt(g)} lies in H1 H2, so d(H1, g H2) = 1")
    else:
        spec.notes.append(f"d(H1, {grp.fmt(g)} H2) = 2")
    return spec


def restrict_to_partial(spec: CosetActionSpec, window: Iterable[Any],
                        orbit_subset: Sequence[int] | None = None) -> CosetActionSpec:
    """Keep only arrow data expressible inside the (symmetrised) window F."""
    grp = spec.group
    fset = {grp.check(x) for x in window}
    fset |= {grp.inv(x) for x in fset}
    fset.add(grp.identity)
    keep = list(orbit_subset) if orbit_subset is not None else list(range(spec.size))
    pos = {j: k for k, j in enumerate(keep)}
    in_arrows = []
    for j in keep:
        m = spec.orbits[j]
        out: list[Any] = []
        for f in spec.in_arrows[j]:
            if f in fset and not any(m.same_left_coset(f, g) for g in out):
                out.append(f)
        in_arrows.append(out)
    cross = {}
    for (i, j), fs in spec.cross.items():
        if i not in pos or j not in pos:
            continue
        out = []
        for f in fs:
            if f in fset and not any(in_double_coset(f, spec.orbits[i], g, spec.orbits[j]) for g in out):
                out.append(f)
        cross[(pos[i], pos[j])] = out
    return CosetActionSpec(grp, [spec.orbits[j] for j in keep], in_arrows, cross, spec.kind, spec.clique,
                           spec.complete, None, [spec.orbit_label(j) for j in keep],
                           window=[f for f in spec.window if f in fset])


def circulant(n: int, connection: Iterable[int]) -> FiniteActionWindow:
    """Z acting on Z/n with x -> x + c for c in the connection set (test fixture)."""
    grp = Group.free_abelian(1)
    conn = {c % n for c in connection}
    adj = np.zeros((n, n), dtype=bool)
    for x in range(n):
        for c in conn:
            adj[x, (x + c) % n] = True
    moves = np.array([[(x + 1) % n for x in range(n)]], dtype=np.int64)
    return FiniteActionWindow(grp, [(0, (x,)) for x in range(n)], adj, moves, TOURNAMENT)
