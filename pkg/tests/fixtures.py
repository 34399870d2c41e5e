"""Seeded generators for randomized instances and independent checkers."""
from __future__ import annotations

import itertools
import random
from fractions import Fraction

import numpy as np

from finapprox.actions import TOURNAMENT, CosetActionSpec, two_subgroup_graph
from finapprox.groups import Group, Subgroup, product_membership
from finapprox.pseudonorm import PartialGPN, validate_partial_gpn

Z = Group.free_abelian(1)
Z2 = Group.free_abelian(2)


def cyc(d: int) -> Subgroup:
    return Subgroup.generated(Z, [(d,)])


def _greedy(spec_factory, slots, rng, tries=12):
    """Add random elements to list slots while the spec's invariants stay clean."""
    current = {k: [] for k in slots}
    for _ in range(tries):
        key = rng.choice(list(slots))
        lim, cap = slots[key]
        if len(current[key]) >= cap:
            continue
        x = rng.randint(-lim, lim)
        if x in current[key]:
            continue
        current[key].append(x)
        if spec_factory(current).check_invariants():
            current[key].pop()
    return current


def random_tournament_partial(rng: random.Random) -> CosetActionSpec:
    m = rng.randint(1, 3)
    ds = [rng.choice([0, 3, 5, 7, 9]) for _ in range(m)]
    orbits = [cyc(d) for d in ds]
    slots = {("in", j): (8, 4) for j in range(m)}
    for i, j in itertools.permutations(range(m), 2):
        slots[("x", i, j)] = (8, 4)

    def factory(cur):
        in_arrows = [[(x,) for x in cur[("in", j)]] for j in range(m)]
        cross = {(k[1], k[2]): [(x,) for x in v] for k, v in cur.items() if k[0] == "x" and v}
        return CosetActionSpec(Z, orbits, in_arrows, cross, kind=TOURNAMENT)

    cur = _greedy(factory, slots, rng, tries=25)
    spec = factory(cur)
    assert not spec.check_invariants()
    return spec


def random_triangle_gadget(rng: random.Random, clique: int = 3) -> CosetActionSpec:
    """Two-orbit triangle-free window with g outside H1 H2."""
    while True:
        if rng.random() < 0.5:
            p = rng.choice([2, 3])
            a, b = p * rng.randint(1, 3), p * rng.randint(1, 3)
            h1, h2 = cyc(a), cyc(b)
            g = (rng.randint(1, 8),)
        else:
            h1 = Subgroup.generated(Z2, [(rng.choice([2, 4]), 0)] + ([(0, rng.choice([2, 4]))] if rng.random() < 0.4 else []))
            h2 = Subgroup.generated(Z2, [(0, rng.choice([2, 4]))] + ([(rng.choice([2, 4]), 0)] if rng.random() < 0.4 else []))
            g = (rng.randint(-3, 3), rng.randint(-3, 3))
        if product_membership(g, [h1, h2]) is False:
            spec = two_subgroup_graph(h1, h2, g)
            spec.clique = clique
            return spec


def has_clique(adj: np.ndarray, n: int) -> bool:
    """Brute force over all n-subsets."""
    size = adj.shape[0]
    for sub in itertools.combinations(range(size), n):
        if all(adj[a, b] for a, b in itertools.combinations(sub, 2)):
            return True
    return False


def exactly_one_arrow(adj: np.ndarray) -> bool:
    n = adj.shape[0]
    a = adj.astype(int)
    return bool(np.all(np.diag(a) == 0) and np.all((a + a.T)[~np.eye(n, dtype=bool)] == 1))


def generator_invariant(w) -> bool:
    for mv in w.moves:
        if np.any(mv < 0):
            return False
        if not np.array_equal(w.adj, w.adj[np.ix_(mv, mv)]):
            return False
    return True


def embedding_ok(spec: CosetActionSpec, result) -> list[str]:
    """Independent audit of an ApproximationResult's embedding."""
    grp = spec.group
    bad = []
    emb = result.embedding
    targets = [v for _, _, v in emb]
    if len(set(targets)) != len(targets):
        bad.append("not injective")
    for (i, a, u), (j, b, v) in itertools.permutations(emb, 2):
        r = spec.related(i, grp.mul(grp.inv(a), b), j)
        if r is not None and bool(result.window.adj[u, v]) != r:
            bad.append(f"relation {i}:{a} -> {j}:{b} lost")
    where = {(j, g): v for j, g, v in emb}
    for s, x in enumerate(grp.generators()):
        for (j, g), v in where.items():
            t = where.get((j, grp.mul(x, g)))
            if t is not None and result.window.moves[s, v] != t:
                bad.append("generator move disagrees")
    for j, m in enumerate(spec.orbits):
        lift = result.stabilizers[j]
        if not all(lift.contains(h) for h in m.gens()):
            bad.append(f"M_{j} not inside M_j N")
        # M_j fixes the base point: compose generator moves along each generator of M_j
        base = where[(j, grp.identity)]
        inv = np.argsort(result.window.moves, axis=1)
        for h in m.gens():
            p = base
            for letter in grp.word(h):
                s = abs(letter) - 1
                p = int(result.window.moves[s, p] if letter > 0 else inv[s, p])
            if p != base:
                bad.append(f"M_{j} moves the base point")
    return bad


def random_gpn(rng: random.Random, labels=None, q: int = None, size: int = 12) -> PartialGPN:
    """Valid partial pseudonorm on Z with values in {1..10}/q, by rejection of bad entries."""
    labels = labels or list(range(1, rng.randint(1, 3) + 1))
    q = q or rng.choice([1, 2, 3, 4])
    entries = {((0,), i, i): Fraction(0) for i in labels}
    # keep the domain graph connected: a generator loop and bridges at the identity
    entries[((1,), labels[0], labels[0])] = Fraction(rng.randint(1, 10), q)
    for a, b in zip(labels, labels[1:]):
        entries[((rng.randint(-2, 2),), a, b)] = Fraction(rng.randint(1, 10), q)
    p = PartialGPN.symmetric(Z, labels, entries)
    attempts = 0
    while len(p.table) < size and attempts < 60:
        attempts += 1
        g = (rng.randint(-4, 4),)
        i, j = rng.choice(labels), rng.choice(labels)
        if g == (0,) and i == j:
            continue
        if (g, i, j) in p.table:
            continue
        cand = p.with_entries({(g, i, j): Fraction(rng.randint(1, 10), q)})
        if validate_partial_gpn(cand).ok:
            p = cand
    return p


def chain_oracle(p: PartialGPN, g, i, j, cap: Fraction):
    """Exhaustive enumeration of stored-entry chains of at most ceil(cap/m) hops; minimum cost <= cap."""
    grp = p.group
    if g == grp.identity and i == j:
        return Fraction(0)
    edges = []
    for (h, a, b), v in p.table.items():
        edges.append((h, a, b, v))
        edges.append((grp.inv(h), b, a, v))
    edges = [e for e in edges if not (e[0] == grp.identity and e[1] == e[2])]
    m = min(v for *_, v in edges if v > 0)
    hops = int(-(-cap // m))
    best = None
    frontier = {(grp.identity, i): Fraction(0)}
    for _ in range(hops):
        nxt = {}
        for (x, k), c in frontier.items():
            for h, a, b, v in edges:
                if a != k or c + v > cap:
                    continue
                y = (grp.mul(x, h), b)
                if y not in nxt or c + v < nxt[y]:
                    nxt[y] = c + v
        for (x, k), c in nxt.items():
            if x == g and k == j and (best is None or c < best):
                best = c
        frontier = nxt
    return best
