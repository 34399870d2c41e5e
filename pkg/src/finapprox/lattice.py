"""Integer lattices in Z^d: Hermite and Smith normal forms, membership, residues.

Lattices are stored as tuples of row vectors in row-style Hermite normal form:
upper triangular, positive pivots, entries above each pivot reduced into
[0, pivot).
"""
from __future__ import annotations

import itertools
import math
from typing import Iterable, Iterator, Sequence

Vec = tuple[int, ...]
Basis = tuple[Vec, ...]


def _pivot(row: Sequence[int]) -> int:
    for j, a in enumerate(row):
        if a:
            return j
    return -1


def hnf(rows: Iterable[Sequence[int]], dim: int) -> Basis:
    pending = [list(r) for r in rows if any(r)]
    out: list[list[int]] = []
    for col in range(dim):
        if not pending:
            break
        active = [r for r in pending if r[col]]
        rest = [r for r in pending if not r[col]]
        if not active:
            continue
        while len(active) > 1:
            active.sort(key=lambda r: abs(r[col]))
            p = active[0]
            keep = [p]
            for r in active[1:]:
                q = r[col] // p[col]
                r2 = [a - q * b for a, b in zip(r, p)]
                if r2[col]:
                    keep.append(r2)
                elif any(r2):
                    rest.append(r2)
            active = keep
        p = active[0]
        if p[col] < 0:
            p = [-a for a in p]
        out.append(p)
        pending = [r for r in rest if any(r)]
    for i, row in enumerate(out):
        c = _pivot(row)
        for k in range(i):
            q = out[k][c] // row[c]
            if q:
                out[k] = [a - q * b for a, b in zip(out[k], row)]
    return tuple(tuple(r) for r in out)


def reduce(v: Sequence[int], basis: Basis) -> Vec:
    """Canonical representative of v + L: pivot coordinates land in [0, pivot)."""
    v = list(v)
    for row in basis:
        c = _pivot(row)
        q = v[c] // row[c]
        if q:
            v = [a - q * b for a, b in zip(v, row)]
    return tuple(v)


def contains(basis: Basis, v: Sequence[int]) -> bool:
    return not any(reduce(v, basis))


def lattice_sum(dim: int, *bases: Iterable[Sequence[int]]) -> Basis:
    return hnf(itertools.chain.from_iterable(bases), dim)


def intersection(a: Basis, b: Basis, dim: int) -> Basis:
    # Zassenhaus: rows [x | x] for x in a, [y | 0] for y in b.
    rows = [tuple(x) + tuple(x) for x in a] + [tuple(y) + (0,) * dim for y in b]
    h = hnf(rows, 2 * dim)
    return hnf([r[dim:] for r in h if not any(r[:dim])], dim)


def is_full_rank(basis: Basis, dim: int) -> bool:
    return len(basis) == dim


def index(basis: Basis, dim: int) -> int | None:
    """[Z^d : L], or None when L has infinite index."""
    if len(basis) != dim:
        return None
    return math.prod(basis[i][i] for i in range(dim))


def residues(basis: Basis, dim: int) -> list[Vec]:
    """All canonical residues of a full-rank lattice, lexicographic."""
    if len(basis) != dim:
        raise ValueError("lattice has infinite index")
    ranges = [range(basis[i][i]) for i in range(dim)]
    return [tuple(r) for r in itertools.product(*ranges)]


def residue_code(r: Sequence[int], basis: Basis) -> int:
    """Position of a canonical residue in the lexicographic residue list."""
    code = 0
    for i, row in enumerate(basis):
        code = code * row[i] + r[i]
    return code


def scaled_identity(c: int, dim: int) -> Basis:
    return tuple(tuple(c if i == j else 0 for j in range(dim)) for i in range(dim))


def sublattices_of_index(n: int, dim: int) -> Iterator[Basis]:
    """Every full-rank sublattice of index n, each once, as HNF in lexicographic order."""
    if dim == 0:
        if n == 1:
            yield ()
        return

    def diagonals(k: int, m: int) -> Iterator[tuple[int, ...]]:
        if k == 1:
            yield (m,)
            return
        for p in range(1, m + 1):
            if m % p == 0:
                for tail in diagonals(k - 1, m // p):
                    yield (p,) + tail

    found = []
    for diag in diagonals(dim, n):
        slots = [(i, j) for i in range(dim) for j in range(i + 1, dim)]
        for vals in itertools.product(*[range(diag[j]) for (_, j) in slots]):
            m = [[0] * dim for _ in range(dim)]
            for i in range(dim):
                m[i][i] = diag[i]
            for (i, j), v in zip(slots, vals):
                m[i][j] = v
            found.append(tuple(tuple(r) for r in m))
    yield from sorted(found)


def smith(rows: Sequence[Sequence[int]], dim: int) -> tuple[list[int], list[list[int]], list[list[int]]]:
    """Smith form of the generator matrix.

    Returns (diagonal, V, V_inv) with U A V = D for some unimodular U; the
    diagonal lists the nonzero invariant factors s_1 | s_2 | ...  Coordinates
    y = x V put the lattice in the form s_1 Z + ... + s_r Z + 0.
    """
    a = [list(r) for r in rows]
    m = len(a)
    v = [[int(i == j) for j in range(dim)] for i in range(dim)]
    vinv = [[int(i == j) for j in range(dim)] for i in range(dim)]

    def swap_cols(i: int, j: int) -> None:
        for row in a:
            row[i], row[j] = row[j], row[i]
        for row in v:
            row[i], row[j] = row[j], row[i]
        vinv[i], vinv[j] = vinv[j], vinv[i]

    def add_col(src: int, dst: int, q: int) -> None:
        # col_dst += q * col_src
        for row in a:
            row[dst] += q * row[src]
        for row in v:
            row[dst] += q * row[src]
        vinv[src] = [x - q * y for x, y in zip(vinv[src], vinv[dst])]

    diag: list[int] = []
    t = 0
    while t < min(m, dim):
        cands = [(abs(a[i][j]), i, j) for i in range(t, m) for j in range(t, dim) if a[i][j]]
        if not cands:
            break
        _, i, j = min(cands)
        a[t], a[i] = a[i], a[t]
        if j != t:
            swap_cols(t, j)
        while True:
            p = a[t][t]
            dirty = False
            for i in range(t + 1, m):
                q = a[i][t] // p
                if q:
                    a[i] = [x - q * y for x, y in zip(a[i], a[t])]
                if a[i][t]:
                    dirty = True
            for j in range(t + 1, dim):
                q = a[t][j] // p
                if q:
                    add_col(t, j, -q)
                if a[t][j]:
                    dirty = True
            if dirty:
                cands = [(abs(a[i][t]), i, t) for i in range(t, m) if a[i][t]]
                cands += [(abs(a[t][j]), t, j) for j in range(t, dim) if a[t][j]]
                _, i, j = min(cands)
                if i != t:
                    a[t], a[i] = a[i], a[t]
                if j != t:
                    swap_cols(t, j)
                continue
            bad = next(((i, j) for i in range(t + 1, m) for j in range(t + 1, dim) if a[i][j] % p), None)
            if bad is None:
                break
            a[t] = [x + y for x, y in zip(a[t], a[bad[0]])]
        if a[t][t] < 0:
            a[t] = [-x for x in a[t]]
        diag.append(a[t][t])
        t += 1
    return diag, v, vinv


def invariants(basis: Sequence[Sequence[int]], dim: int) -> tuple[list[int], int]:
    """(torsion invariant factors > 1, free rank) of Z^d / L."""
    diag, _, _ = smith(basis, dim)
    return [s for s in diag if s > 1], dim - len(diag)


def to_smith_coords(x: Sequence[int], v: list[list[int]]) -> Vec:
    dim = len(v)
    return tuple(sum(x[i] * v[i][j] for i in range(dim)) for j in range(dim))


def from_smith_coords(y: Sequence[int], vinv: list[list[int]]) -> Vec:
    dim = len(vinv)
    return tuple(sum(y[i] * vinv[i][j] for i in range(dim)) for j in range(dim))
