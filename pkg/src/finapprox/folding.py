"""Folded subgroup graphs (Stallings graphs) for subgroups of a free group.

Letters are nonzero ints: +k is generator k-1, -k its inverse.  A graph stores,
for every vertex, a dict letter -> vertex covering both orientations of each
edge, so reading a word is a walk along dict lookups.
"""
from __future__ import annotations

from collections import deque
from typing import Iterable, Sequence

Word = tuple[int, ...]


def letter_key(x: int) -> tuple[int, int]:
    return (abs(x), 0 if x > 0 else 1)


def reduce_word(w: Iterable[int]) -> Word:
    out: list[int] = []
    for x in w:
        if out and out[-1] == -x:
            out.pop()
        else:
            out.append(x)
    return tuple(out)


def invert(w: Sequence[int]) -> Word:
    return tuple(-x for x in reversed(w))


class _Folder:
    def __init__(self) -> None:
        self.parent: list[int] = []
        self.out: list[dict[int, int]] = []
        self.merges: list[tuple[int, int]] = []

    def vertex(self) -> int:
        self.parent.append(len(self.parent))
        self.out.append({})
        return len(self.parent) - 1

    def find(self, a: int) -> int:
        root = a
        while self.parent[root] != root:
            root = self.parent[root]
        while self.parent[a] != root:
            self.parent[a], a = root, self.parent[a]
        return root

    def _half(self, s: int, x: int, t: int) -> None:
        s, t = self.find(s), self.find(t)
        w = self.out[s].get(x)
        if w is None:
            self.out[s][x] = t
        else:
            w = self.find(w)
            if w != t:
                self.merges.append((w, t))

    def edge(self, u: int, x: int, v: int) -> None:
        self._half(u, x, v)
        self._half(v, -x, u)
        self.settle()

    def path(self, u: int, word: Sequence[int], v: int) -> None:
        cur = u
        for i, x in enumerate(word):
            nxt = v if i == len(word) - 1 else self.vertex()
            self.edge(cur, x, nxt)
            cur = nxt
        if not word and self.find(u) != self.find(v):
            self.merges.append((u, v))
            self.settle()

    def settle(self) -> None:
        while self.merges:
            a, b = self.merges.pop()
            a, b = self.find(a), self.find(b)
            if a == b:
                continue
            self.parent[b] = a
            items = list(self.out[b].items())
            self.out[b] = {}
            for x, t in items:
                self._half(a, x, t)
                self._half(t, -x, a)

    def export(self, base: int) -> tuple["FoldedGraph", dict[int, int]]:
        """Relabel the component of base by canonical BFS; returns graph and old->new map."""
        root = self.find(base)
        label = {root: 0}
        order = [root]
        queue = deque([root])
        while queue:
            u = queue.popleft()
            for x in sorted(self.out[u], key=letter_key):
                t = self.find(self.out[u][x])
                if t not in label:
                    label[t] = len(order)
                    order.append(t)
                    queue.append(t)
        out = tuple(
            {x: label[self.find(t)] for x, t in sorted(self.out[u].items(), key=lambda it: letter_key(it[0]))}
            for u in order
        )
        mapping = {v: label[self.find(v)] for v in range(len(self.parent)) if self.find(v) in label}
        return FoldedGraph(out), mapping


class FoldedGraph:
    """Deterministic labelled graph with base vertex 0."""

    __slots__ = ("out",)

    def __init__(self, out: tuple[dict[int, int], ...]):
        self.out = out

    @classmethod
    def from_words(cls, words: Iterable[Sequence[int]]) -> "FoldedGraph":
        f = _Folder()
        base = f.vertex()
        for w in words:
            w = reduce_word(w)
            if w:
                f.path(base, w, base)
        return f.export(base)[0]

    @property
    def size(self) -> int:
        return len(self.out)

    def read(self, word: Sequence[int], start: int = 0) -> int | None:
        v = start
        for x in word:
            v = self.out[v].get(x)
            if v is None:
                return None
        return v

    def accepts(self, word: Sequence[int]) -> bool:
        return self.read(word) == 0

    def is_complete(self, rank: int) -> bool:
        return all(len(d) == 2 * rank for d in self.out)

    def spanning_paths(self) -> list[Word]:
        """Shortest-then-shortlex path label from the base to each vertex."""
        paths: list[Word | None] = [None] * self.size
        paths[0] = ()
        queue = deque([0])
        while queue:
            u = queue.popleft()
            for x, t in self.out[u].items():
                if paths[t] is None:
                    paths[t] = paths[u] + (x,)
                    queue.append(t)
        return paths  # type: ignore[return-value]

    def generators(self) -> list[Word]:
        """Free basis of the subgroup read off a spanning tree."""
        paths = self.spanning_paths()
        tree = set()
        for v in range(1, self.size):
            p = paths[v]
            u = self.read(p[:-1])
            tree.add((u, p[-1], v))
            tree.add((v, -p[-1], u))
        gens = []
        for u in range(self.size):
            for x, t in self.out[u].items():
                if x > 0 and (u, x, t) not in tree:
                    gens.append(reduce_word(paths[u] + (x,) + invert(paths[t])))
        return sorted(gens, key=lambda w: (len(w), [letter_key(x) for x in w]))

    def signature(self) -> tuple:
        return tuple(tuple(sorted(d.items())) for d in self.out)


def coset_graph(sub: FoldedGraph, prefix: Sequence[int]) -> tuple[FoldedGraph, int]:
    """Graph whose base-to-target readings are exactly the coset prefix*H.

    Returns the graph (base 0 is the start of the prefix) and the target vertex.
    """
    f = _Folder()
    start = f.vertex()
    offset = len(f.parent)
    for _ in range(sub.size):
        f.vertex()
    for u, d in enumerate(sub.out):
        for x, t in d.items():
            if x > 0:
                f.edge(offset + u, x, offset + t)
    f.path(start, reduce_word(prefix), offset)
    g, mapping = f.export(start)
    return g, mapping[offset]


def reachable_pair(a: FoldedGraph, b: FoldedGraph, start: tuple[int, int], goal: tuple[int, int]) -> bool:
    """Is goal reachable from start in the product of two folded graphs?"""
    seen = {start}
    queue = deque([start])
    while queue:
        u, v = queue.popleft()
        if (u, v) == goal:
            return True
        for x, t in a.out[u].items():
            s = b.out[v].get(x)
            if s is not None and (t, s) not in seen:
                seen.add((t, s))
                queue.append((t, s))
    return False


def intersect(a: FoldedGraph, b: FoldedGraph) -> FoldedGraph:
    """Folded graph of the intersection of the two subgroups (core plus base)."""
    ids = {(0, 0): 0}
    edges: list[tuple[int, int, int]] = []
    queue = deque([(0, 0)])
    while queue:
        u, v = queue.popleft()
        for x, t in a.out[u].items():
            s = b.out[v].get(x)
            if s is None:
                continue
            if (t, s) not in ids:
                ids[(t, s)] = len(ids)
                queue.append((t, s))
            if x > 0:
                edges.append((ids[(u, v)], x, ids[(t, s)]))
    alive = set(ids.values())
    changed = True
    while changed:
        changed = False
        deg = {v: 0 for v in alive}
        for u, _, t in edges:
            if u in alive and t in alive:
                deg[u] += 1
                deg[t] += 1
        for v, k in deg.items():
            if v != 0 and k <= 1:
                alive.discard(v)
                changed = True
    f = _Folder()
    relabel = {v: f.vertex() for v in sorted(alive)}
    for u, x, t in edges:
        if u in alive and t in alive:
            f.edge(relabel[u], x, relabel[t])
    return f.export(relabel[0])[0]


def closed_words(g: FoldedGraph, max_len: int) -> list[Word]:
    """All reduced words of length <= max_len labelling base-to-base walks."""
    out = [()]
    stack: list[tuple[int, Word]] = [(0, ())]
    while stack:
        v, w = stack.pop()
        if len(w) == max_len:
            continue
        for x, t in g.out[v].items():
            if w and w[-1] == -x:
                continue
            nw = w + (x,)
            if t == 0:
                out.append(nw)
            stack.append((t, nw))
    return sorted(set(out), key=lambda w: (len(w), [letter_key(x) for x in w]))
