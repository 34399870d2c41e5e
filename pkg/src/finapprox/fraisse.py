"""Independent amalgamation of finite actions and a Fraisse-style chain builder.

A finite action is a FiniteActionWindow whose generator moves are total
permutations.  The builder keeps a FIFO queue of extension requests (β ⊆ β′
plus an embedding of β into the current window) and satisfies each one either
by finding an extension already present or by amalgamating β′ in.

Only finite extension-property evidence is produced; genericity of a limit is
not something a finite run can certify.
"""
from __future__ import annotations

import itertools
from collections import deque
from dataclasses import dataclass
from typing import Iterator, Sequence

import numpy as np

from .actions import GRAPH, SET, TOURNAMENT, FiniteActionWindow, Report, find_cliques, validate_tournament
from .groups import FREE, FREE_ABELIAN, Group, Subgroup, UnsupportedError, UsageError

FiniteAction = FiniteActionWindow


def empty_action(grp: Group, kind: str) -> FiniteAction:
    return FiniteActionWindow(grp, [], np.zeros((0, 0), dtype=bool),
                              np.zeros((len(grp.generators()), 0), dtype=np.int64), kind)


def _inverse_moves(moves: np.ndarray) -> np.ndarray:
    inv = np.empty_like(moves)
    for s in range(moves.shape[0]):
        inv[s, moves[s]] = np.arange(moves.shape[1])
    return inv


def orbits(a: FiniteAction) -> list[list[int]]:
    """Orbit partition, each orbit listed in BFS order from its least point."""
    inv = _inverse_moves(a.moves)
    seen = [False] * a.size
    out = []
    for p in range(a.size):
        if seen[p]:
            continue
        orb = [p]
        seen[p] = True
        k = 0
        while k < len(orb):
            u = orb[k]
            k += 1
            for mv in list(a.moves) + list(inv):
                t = int(mv[u])
                if not seen[t]:
                    seen[t] = True
                    orb.append(t)
        out.append(orb)
    return out


def validate_action(a: FiniteAction) -> Report:
    viol = []
    for s in range(a.moves.shape[0]):
        if sorted(a.moves[s].tolist()) != list(range(a.size)):
            viol.append(f"generator {s} is not a permutation")
    if viol:
        return Report(False, viol)
    if a.kind == TOURNAMENT:
        return validate_tournament(a)
    if a.kind == GRAPH:
        if not np.array_equal(a.adj, a.adj.T) or np.any(np.diag(a.adj)):
            viol.append("graph adjacency is not symmetric and loopless")
    elif np.any(a.adj):
        viol.append("pure set carries a relation")
    for s in range(a.moves.shape[0]):
        mv = a.moves[s]
        if not np.array_equal(a.adj, a.adj[np.ix_(mv, mv)]):
            viol.append(f"generator {s} does not preserve the relation")
    return Report(not viol, viol, a.size)


# ---------------------------------------------------------------------------
# Embeddings
# ---------------------------------------------------------------------------


class _Embedder:
    """Backtracking search for injective, equivariant, relation-preserving maps."""

    def __init__(self, a: FiniteAction, b: FiniteAction):
        if a.moves.shape[0] != b.moves.shape[0]:
            raise UsageError("actions of different groups")
        self.a, self.b = a, b
        self.a_orbits = orbits(a)
        self.a_steps = list(a.moves) + list(_inverse_moves(a.moves))
        self.b_steps = list(b.moves) + list(_inverse_moves(b.moves))

    def _place(self, img: list[int], used: set[int], start: int, target: int) -> list[int] | None:
        """Send start -> target and propagate along the orbit; returns the points assigned."""
        assigned = []
        stack = [(start, target)]
        while stack:
            p, t = stack.pop()
            if img[p] >= 0:
                if img[p] != t:
                    return self._undo(img, used, assigned)
                continue
            if t in used:
                return self._undo(img, used, assigned)
            img[p] = t
            used.add(t)
            assigned.append(p)
            for ma, mb in zip(self.a_steps, self.b_steps):
                stack.append((int(ma[p]), int(mb[t])))
        a, b = self.a.adj, self.b.adj
        done = [p for p in range(self.a.size) if img[p] >= 0]
        for p in assigned:
            for q in done:
                if a[p, q] != b[img[p], img[q]] or a[q, p] != b[img[q], img[p]]:
                    return self._undo(img, used, assigned)
        return assigned

    @staticmethod
    def _undo(img: list[int], used: set[int], assigned: list[int]) -> None:
        for p in assigned:
            used.discard(img[p])
            img[p] = -1
        return None

    def search(self, fixed: dict[int, int] | None = None,
               allowed: Sequence[set[int] | None] | None = None) -> Iterator[tuple[int, ...]]:
        """All embeddings extending `fixed`; allowed[k] restricts the base image of orbit k."""
        img = [-1] * self.a.size
        used: set[int] = set()
        for p, t in (fixed or {}).items():
            if img[p] < 0 and self._place(img, used, p, t) is None:
                return
            if img[p] != t:
                return
        orbs = self.a_orbits

        def rec(k: int) -> Iterator[tuple[int, ...]]:
            if k == len(orbs):
                yield tuple(img)
                return
            base = orbs[k][0]
            if img[base] >= 0:
                yield from rec(k + 1)
                return
            cands = range(self.b.size)
            if allowed is not None and allowed[k] is not None:
                cands = sorted(allowed[k])
            for t in cands:
                if t in used:
                    continue
                assigned = self._place(img, used, base, t)
                if assigned is None:
                    continue
                yield from rec(k + 1)
                self._undo(img, used, assigned)

        yield from rec(0)


def embeddings(a: FiniteAction, b: FiniteAction, fixed: dict[int, int] | None = None) -> Iterator[tuple[int, ...]]:
    return _Embedder(a, b).search(fixed)


def embeddings_touching(a: FiniteAction, b: FiniteAction, new_points: set[int]) -> Iterator[tuple[int, ...]]:
    """Embeddings of a into b whose image meets new_points, each exactly once."""
    emb = _Embedder(a, b)
    old = set(range(b.size)) - new_points
    k = len(emb.a_orbits)
    for first in range(k):
        allowed: list[set[int] | None] = [old] * first + [new_points] + [None] * (k - first - 1)
        yield from emb.search(allowed=allowed)


def is_embedding(a: FiniteAction, b: FiniteAction, e: Sequence[int]) -> bool:
    if len(e) != a.size or len(set(e)) != len(e) or any(not 0 <= t < b.size for t in e):
        return False
    e = np.asarray(e, dtype=np.int64)
    if a.size and not np.array_equal(b.moves[:, e], e[a.moves]):
        return False
    return bool(np.array_equal(a.adj, b.adj[np.ix_(e, e)]))


def isomorphic(a: FiniteAction, b: FiniteAction, fixed: dict[int, int] | None = None) -> bool:
    if a.size != b.size:
        return False
    return next(embeddings(a, b, fixed), None) is not None


# ---------------------------------------------------------------------------
# Amalgamation
# ---------------------------------------------------------------------------


def amalgamate_actions(a0: FiniteAction, a1: FiniteAction, a2: FiniteAction, e1: Sequence[int], e2: Sequence[int],
                       kind: str | None = None) -> tuple[FiniteAction, list[int]]:
    """Independent amalgam of a1 and a2 over a0.

    Points: those of a1 first, then a2 minus the image of a0.  Returns the
    amalgam and the map a2 -> amalgam (a1 embeds by the identity).
    """
    kind = kind or a1.kind
    if not (a0.kind == a1.kind == a2.kind == kind):
        raise UsageError("structure kinds differ")
    if not is_embedding(a0, a1, e1):
        raise UsageError("first map is not an embedding of the base")
    if not is_embedding(a0, a2, e2):
        raise UsageError("second map is not an embedding of the base")
    n1 = a1.size
    over = {int(e2[k]): int(e1[k]) for k in range(a0.size)}
    fresh = [p for p in range(a2.size) if p not in over]
    place = dict(over)
    for k, p in enumerate(fresh):
        place[p] = n1 + k
    to_new = [place[p] for p in range(a2.size)]
    n = n1 + len(fresh)
    adj = np.zeros((n, n), dtype=bool)
    adj[:n1, :n1] = a1.adj
    idx = np.array(to_new, dtype=np.int64)
    sub = a2.adj
    for p in range(a2.size):
        for q in range(a2.size):
            if p in over and q in over:
                continue
            adj[idx[p], idx[q]] = sub[p, q]
    if kind == TOURNAMENT and fresh:
        left = [p for p in range(n1) if p not in set(e1)]
        adj[np.ix_(left, list(range(n1, n)))] = True
    moves = np.empty((a1.moves.shape[0], n), dtype=np.int64)
    moves[:, :n1] = a1.moves
    for k, p in enumerate(fresh):
        moves[:, n1 + k] = idx[a2.moves[:, p]]
    grp = a1.group
    vertices = list(a1.vertices) + [a2.vertices[p] for p in fresh]
    out = FiniteActionWindow(grp, vertices, adj, moves, kind)
    rep = validate_action(out)
    if not rep.ok:
        raise AssertionError("amalgam failed validation: " + "; ".join(rep.violations[:3]))
    return out, to_new


# ---------------------------------------------------------------------------
# Catalogs
# ---------------------------------------------------------------------------


def _relations_hold(grp: Group, perms: Sequence[tuple[int, ...]]) -> bool:
    if grp.backend == FREE:
        return True
    if grp.backend == FREE_ABELIAN:
        for p, q in itertools.combinations(perms, 2):
            if tuple(p[x] for x in q) != tuple(q[x] for x in p):
                return False
        return True
    raise UnsupportedError("catalogs are generated for free and free abelian groups")


def transitive_actions(grp: Group, cap: int) -> list[tuple[int, tuple[tuple[int, ...], ...]]]:
    """Transitive permutation actions of degree <= cap, one per isomorphism class."""
    k = len(grp.generators())
    out = []
    for n in range(1, cap + 1):
        perms = list(itertools.permutations(range(n)))
        found: list[tuple[tuple[int, ...], ...]] = []
        for tup in itertools.product(perms, repeat=k):
            if not _relations_hold(grp, tup):
                continue
            reach = {0}
            frontier = [0]
            while frontier:
                x = frontier.pop()
                for p in tup:
                    for y in (p[x], p.index(x)):
                        if y not in reach:
                            reach.add(y)
                            frontier.append(y)
            if len(reach) != n:
                continue
            conj = False
            for s in perms:
                sinv = tuple(s.index(i) for i in range(n))
                c = tuple(tuple(s[p[sinv[i]]] for i in range(n)) for p in tup)
                if c in found:
                    conj = True
                    break
            if not conj:
                found.append(tup)
        out.extend((n, t) for t in found)
    return out


def _action_from_perms(grp: Group, blocks: Sequence[tuple[int, tuple[tuple[int, ...], ...]]],
                       kind: str) -> FiniteAction:
    k = len(grp.generators())
    n = sum(size for size, _ in blocks)
    moves = np.empty((k, n), dtype=np.int64)
    vertices = []
    off = 0
    for j, (size, b) in enumerate(blocks):
        for s in range(k):
            moves[s, off:off + size] = np.array(b[s]) + off
        vertices.extend((j, (x,)) for x in range(size))
        off += size
    return FiniteActionWindow(grp, vertices, np.zeros((n, n), dtype=bool), moves, kind)


def _pair_orbits(a: FiniteAction, pairs: list[tuple[int, int]]) -> list[list[tuple[int, int]]]:
    pos = {p: i for i, p in enumerate(pairs)}
    seen = [False] * len(pairs)
    out = []
    steps = list(a.moves) + list(_inverse_moves(a.moves))
    for i, p in enumerate(pairs):
        if seen[i]:
            continue
        orb = [p]
        seen[i] = True
        k = 0
        while k < len(orb):
            u, v = orb[k]
            k += 1
            for mv in steps:
                q = (int(mv[u]), int(mv[v]))
                if q in pos and not seen[pos[q]]:
                    seen[pos[q]] = True
                    orb.append(q)
        out.append(orb)
    return out


def invariant_structures(a: FiniteAction, kind: str, free_pairs: Sequence[tuple[int, int]] | None = None,
                         clique: int = 3) -> Iterator[FiniteAction]:
    """Every invariant relation on a extending a.adj, choosing only on free_pairs (u < v)."""
    n = a.size
    if free_pairs is None:
        free_pairs = [(u, v) for u in range(n) for v in range(u + 1, n)]
    if kind == SET:
        yield FiniteActionWindow(a.group, a.vertices, a.adj.copy(), a.moves, kind)
        return
    if kind == TOURNAMENT:
        ordered = [(u, v) for u, v in free_pairs] + [(v, u) for u, v in free_pairs]
        orbs = _pair_orbits(a, ordered)
        choice_sets = []
        done: set[int] = set()
        for i, orb in enumerate(orbs):
            if i in done:
                continue
            rev = {(v, u) for u, v in orb}
            j = next(k for k, o in enumerate(orbs) if set(o) == rev or (set(o) & rev))
            if j == i:
                return  # a pair orbit swapped with its reverse: no invariant tournament
            done.update({i, j})
            choice_sets.append((orb, orbs[j]))
        for bits in itertools.product((0, 1), repeat=len(choice_sets)):
            adj = a.adj.copy()
            for bit, (o1, o2) in zip(bits, choice_sets):
                for u, v in (o1 if bit == 0 else o2):
                    adj[u, v] = True
            yield FiniteActionWindow(a.group, a.vertices, adj, a.moves, kind)
        return
    unordered = _pair_orbits(a, [(u, v) for u, v in free_pairs] + [(v, u) for u, v in free_pairs])
    classes: list[set[frozenset]] = []
    for orb in unordered:
        s = {frozenset(p) for p in orb}
        if s not in classes:
            classes.append(s)
    for bits in itertools.product((0, 1), repeat=len(classes)):
        adj = a.adj.copy()
        for bit, cls in zip(bits, classes):
            if bit:
                for pr in cls:
                    u, v = tuple(pr)
                    adj[u, v] = adj[v, u] = True
        if not find_cliques(adj, clique, limit=1):
            yield FiniteActionWindow(a.group, a.vertices, adj, a.moves, kind)


@dataclass
class CatalogPair:
    base: FiniteAction
    ext: FiniteAction
    inclusion: tuple[int, ...]

    @property
    def size(self) -> int:
        return self.ext.size


def _sum(a: FiniteAction, b: FiniteAction) -> FiniteAction:
    n1, n = a.size, a.size + b.size
    moves = np.concatenate([a.moves, b.moves + n1], axis=1)
    adj = np.zeros((n, n), dtype=bool)
    adj[:n1, :n1] = a.adj
    adj[n1:, n1:] = b.adj
    shift = max([j for j, _ in a.vertices], default=-1) + 1
    vertices = list(a.vertices) + [(j + shift, g) for j, g in b.vertices]
    return FiniteActionWindow(a.group, vertices, adj, moves, a.kind)


def build_catalog(grp: Group, kind: str, orbit_cap: int, base_orbits: int = 1, clique: int = 3,
                  size_cap: int | None = None) -> list[CatalogPair]:
    """One-orbit extensions β ⊆ β′ with β of at most base_orbits orbits, up to isomorphism."""
    blocks = [_action_from_perms(grp, [t], kind) for t in transitive_actions(grp, orbit_cap)]
    blocks = [b for b in blocks if next(invariant_structures(b, kind, clique=clique), None) is not None]
    bases: list[FiniteAction] = [empty_action(grp, kind)]
    layer = [empty_action(grp, kind)]
    for _ in range(base_orbits):
        nxt = []
        for b in layer:
            for blk in blocks:
                raw = _sum(b, blk)
                if size_cap is not None and raw.size > size_cap:
                    continue
                new = [(u, v) for u in range(raw.size) for v in range(max(u + 1, b.size), raw.size)]
                for s in invariant_structures(raw, kind, new, clique):
                    if not any(isomorphic(s, t) for t in bases + nxt):
                        nxt.append(s)
        bases.extend(nxt)
        layer = nxt
    pairs = []
    for b in bases:
        exts: list[FiniteAction] = []
        for blk in blocks:
            raw = _sum(b, blk)
            if size_cap is not None and raw.size > size_cap:
                continue
            new = [(u, v) for u in range(raw.size) for v in range(max(u + 1, b.size), raw.size)]
            for s in invariant_structures(raw, kind, new, clique):
                fixed = {p: p for p in range(b.size)}
                if not any(isomorphic(s, t, fixed) for t in exts):
                    exts.append(s)
        pairs.extend(CatalogPair(b, e, tuple(range(b.size))) for e in exts)
    return pairs


# ---------------------------------------------------------------------------
# Builder
# ---------------------------------------------------------------------------


@dataclass
class Request:
    rid: int
    pair: int
    embedding: tuple[int, ...]
    enqueued_at: int
    satisfied_at: int | None = None
    how: str = ""


@dataclass
class BuildResult:
    chain: list[FiniteAction]
    ledger: list[Request]
    pending: list[Request]
    catalog: list[CatalogPair]
    steps: int
    header: str = ("finite extension-property evidence only; genericity of the limit is not certified "
                   "by a finite run")

    @property
    def last(self) -> FiniteAction | None:
        return self.chain[-1] if self.chain else None


def _extends(pair: CatalogPair, window: FiniteAction, e: Sequence[int]) -> bool:
    fixed = {pair.inclusion[k]: int(e[k]) for k in range(pair.base.size)}
    return next(embeddings(pair.ext, window, fixed), None) is not None


def build_generic(grp: Group, kind: str, step_budget: int, orbit_cap: int = 3, base_orbits: int = 1,
                  clique: int = 3, catalog: list[CatalogPair] | None = None,
                  size_cap: int | None = None) -> BuildResult:
    """FIFO-scheduled chain of amalgamations toward a generic action."""
    if kind == GRAPH and clique < 3:
        raise UsageError("clique bound must be at least 3")
    cat = catalog if catalog is not None else build_catalog(grp, kind, orbit_cap, base_orbits, clique, size_cap)
    window = empty_action(grp, kind)
    chain: list[FiniteAction] = []
    ledger: list[Request] = []
    queue: deque[Request] = deque()

    def enqueue(new_points: set[int] | None, step: int) -> None:
        for k, pair in enumerate(cat):
            if new_points is None:
                embs = embeddings(pair.base, window)
            elif pair.base.size == 0:
                continue
            else:
                embs = embeddings_touching(pair.base, window, new_points)
            for e in embs:
                r = Request(len(ledger), k, e, step)
                ledger.append(r)
                queue.append(r)

    enqueue(None, 0)
    step = 0
    while queue and step < step_budget:
        step += 1
        r = queue.popleft()
        pair = cat[r.pair]
        if _extends(pair, window, r.embedding):
            r.satisfied_at, r.how = step, "present"
            continue
        before = window.size
        window, _ = amalgamate_actions(pair.base, window, pair.ext, r.embedding, pair.inclusion, kind)
        chain.append(window)
        r.satisfied_at, r.how = step, "amalgamated"
        enqueue(set(range(before, window.size)), step)
    return BuildResult(chain, ledger, list(queue), cat, step)


def one_point_extensions(grp: Group, kind: str, max_size: int, clique: int = 3) -> list[CatalogPair]:
    """Catalog of all (A, B) with B = A plus one fixed point, |B| <= max_size (fixed-point actions)."""
    return build_catalog(grp, kind, 1, max_size - 1, clique, size_cap=max_size)


def extension_property_check(w: FiniteAction, catalog: Sequence[CatalogPair], k: int) -> Report:
    viol = []
    checked = 0
    for idx, pair in enumerate(catalog):
        if pair.size > k:
            continue
        for e in embeddings(pair.base, w):
            checked += 1
            if not _extends(pair, w, e):
                viol.append(f"pair {idx} (|A|={pair.base.size}, |B|={pair.size}) has no extension over {e}")
    return Report(not viol, viol, checked)


def audit_requests(result: BuildResult, enqueued_by: int) -> Report:
    """Ledger audit: every request enqueued by the given step is satisfied in the final window."""
    viol = []
    last = result.last if result.last is not None else None
    checked = 0
    for r in result.ledger:
        if r.enqueued_at > enqueued_by:
            continue
        checked += 1
        if r.satisfied_at is None:
            viol.append(f"request {r.rid} (enqueued at step {r.enqueued_at}) still pending")
        elif last is not None and not _extends(result.catalog[r.pair], last, r.embedding):
            viol.append(f"request {r.rid} is not satisfied in the final window")
    return Report(not viol, viol, checked)


def build_generic_permutation(grp: Group, subgroups: Sequence[Subgroup], multiplicity: int) -> FiniteAction:
    """Disjoint sum of the coset actions Γ/H, each H repeated `multiplicity` times."""
    gens = grp.generators()
    blocks = []
    for h in subgroups:
        if h.group != grp:
            raise UsageError("subgroup from a different group")
        if h.index() is None:
            raise UnsupportedError(f"subgroup {h!r} has infinite index")
        reps = h.coset_reps()
        perm = [tuple(h.coset_index(grp.mul(s, r)) for r in reps) for s in gens]
        blocks.extend([(h, reps, perm)] * multiplicity)
    n = sum(len(r) for _, r, _ in blocks)
    moves = np.empty((len(gens), n), dtype=np.int64)
    vertices = []
    off = 0
    for j, (h, reps, perm) in enumerate(blocks):
        for s in range(len(gens)):
            moves[s, off:off + len(reps)] = np.array(perm[s], dtype=np.int64) + off
        vertices.extend((j, r) for r in reps)
        off += len(reps)
    out = FiniteActionWindow(grp, vertices, np.zeros((n, n), dtype=bool), moves, SET)
    for j, (h, reps, _) in enumerate(blocks):
        if not stabilizer_matches(out, vertices.index((j, grp.identity)), h):
            raise AssertionError("stabilizer audit failed")
    return out


def stabilizer_matches(a: FiniteAction, point: int, h: Subgroup) -> bool:
    """Orbit-stabilizer audit: H fixes the point and the orbit has size [Γ:H]."""
    grp = a.group
    gens = grp.generators()
    for x in h.gens():
        p = point
        for letter in grp.word(x):
            s = abs(letter) - 1
            mv = a.moves[s] if letter > 0 else _inverse_moves(a.moves)[s]
            p = int(mv[p])
        if p != point:
            return False
    orb = next(o for o in orbits(a) if point in o)
    return len(orb) == h.index() and len(gens) == a.moves.shape[0]


def cycle_text(a: FiniteAction) -> str:
    """Each generator's permutation in cycle notation, one line per generator."""
    from .groups import cycle_notation
    lines = []
    labels = a.group.labels
    for s in range(a.moves.shape[0]):
        lines.append(f"{labels[s]}: {cycle_notation(a.moves[s].tolist())}")
    return "\n".join(lines)
