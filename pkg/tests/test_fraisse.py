import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from finapprox.actions import GRAPH, SET, TOURNAMENT, FiniteActionWindow, circulant
from finapprox.fraisse import (
    CatalogPair,
    amalgamate_actions,
    audit_requests,
    build_generic,
    build_generic_permutation,
    cycle_text,
    embeddings,
    empty_action,
    extension_property_check,
    invariant_structures,
    isomorphic,
    one_point_extensions,
    orbits,
    stabilizer_matches,
    transitive_actions,
    validate_action,
)
from finapprox.groups import Group, Subgroup, UsageError

Z = Group.free_abelian(1)
T = Group.free_abelian(0)


def cyc(d):
    return Subgroup.generated(Z, [(d,)])


def tour(grp, adj, moves=None):
    adj = np.array(adj, dtype=bool)
    n = adj.shape[0]
    if moves is None:
        moves = np.zeros((len(grp.generators()), n), dtype=np.int64)
    return FiniteActionWindow(grp, [(0, (k,)) for k in range(n)], adj, np.array(moves, dtype=np.int64), TOURNAMENT)


def cycle_action(n, kind=SET):
    moves = [[(x + 1) % n for x in range(n)]]
    return FiniteActionWindow(Z, [(0, (x,)) for x in range(n)], np.zeros((n, n), dtype=bool),
                              np.array(moves, dtype=np.int64), kind)


def brute_embeddings(a, b):
    """All injective maps preserving the relation and commuting with the generators."""
    out = []
    for img in itertools.permutations(range(b.size), a.size):
        if any(a.adj[u, v] != b.adj[img[u], img[v]] for u in range(a.size) for v in range(a.size)):
            continue
        if any(b.moves[s, img[u]] != img[a.moves[s, u]] for s in range(a.moves.shape[0]) for u in range(a.size)):
            continue
        out.append(img)
    return out


def test_identity_amalgam():
    c3 = circulant(3, [1])
    out, to_new = amalgamate_actions(c3, c3, c3, [0, 1, 2], [0, 1, 2])
    assert out.size == 3 and np.array_equal(out.adj, c3.adj)
    assert to_new == [0, 1, 2]


def test_cycle_plus_fixed_point_over_empty_base():
    c3 = circulant(3, [1])
    fixed = tour(Z, [[False]], [[0]])
    out, _ = amalgamate_actions(empty_action(Z, TOURNAMENT), c3, fixed, [], [])
    assert out.size == 4
    # every cross pair points from the 3-cycle to the new point
    assert all(out.adj[u, 3] and not out.adj[3, u] for u in range(3))
    assert validate_action(out).ok


def test_two_cycle_carries_no_tournament():
    assert next(invariant_structures(cycle_action(2, TOURNAMENT), TOURNAMENT), None) is None


def test_amalgam_rejects_non_embedding():
    c3 = circulant(3, [1])
    with pytest.raises(UsageError):
        amalgamate_actions(c3, c3, c3, [0, 2, 1], [0, 1, 2])


def test_pure_set_builder_covers_cycle_types():
    r = build_generic(Z, SET, 30, orbit_cap=3)
    sizes = sorted(len(o) for o in orbits(r.last))
    for n in (1, 2, 3):
        assert n in sizes
    assert audit_requests(r, 0).ok


def test_zero_budget_gives_empty_chain():
    r = build_generic(Z, TOURNAMENT, 0)
    assert r.chain == [] and r.steps == 0 and r.last is None


def test_three_cycle_has_no_dominating_extension():
    c3 = tour(T, [[0, 1, 0], [0, 0, 1], [1, 0, 0]])
    dom = tour(T, [[0, 1, 0, 0], [0, 0, 1, 0], [1, 0, 0, 0], [1, 1, 1, 0]])
    pair = CatalogPair(c3, dom, (0, 1, 2))
    rep = extension_property_check(c3, [pair], 4)
    assert not rep.ok and rep.checked == 3


def test_empty_catalog_is_vacuous():
    rep = extension_property_check(circulant(3, [1]), [], 3)
    assert rep.ok and rep.checked == 0


def test_twelve_point_permutation_action():
    a = build_generic_permutation(Z, [cyc(1), cyc(2), cyc(3)], 2)
    assert a.size == 12
    assert sorted(len(o) for o in orbits(a)) == [1, 1, 2, 2, 3, 3]
    for j, h in enumerate([cyc(1), cyc(1), cyc(2), cyc(2), cyc(3), cyc(3)]):
        base = a.vertices.index((j, (0,)))
        assert stabilizer_matches(a, base, h)
    assert not stabilizer_matches(a, a.vertices.index((4, (0,))), cyc(2))
    assert cycle_text(a).startswith("a: ")


def test_transitive_actions_of_z():
    # one transitive Z-set of each degree
    assert [n for n, _ in transitive_actions(Z, 4)] == [1, 2, 3, 4]
    # F2: the point, plus the three index-2 subgroups
    assert len(transitive_actions(Group.free(2), 2)) == 4


def test_one_point_catalog_of_tournaments():
    cat = one_point_extensions(T, TOURNAMENT, 3)
    # bases: empty, point, arrow; extensions by one point up to isomorphism over the base
    assert sorted((p.base.size, p.size) for p in cat) == [(0, 1), (1, 2), (1, 2), (2, 3), (2, 3), (2, 3), (2, 3)]


def test_z_builder_ledger_audit():
    r = build_generic(Z, TOURNAMENT, 500, orbit_cap=4)
    assert validate_action(r.last).ok
    assert audit_requests(r, 50).ok


def test_graph_builder_stays_triangle_free():
    r = build_generic(T, GRAPH, 60, catalog=one_point_extensions(T, GRAPH, 3))
    adj = r.last.adj
    assert not any(adj[a, b] and adj[b, c] and adj[a, c] for a, b, c in itertools.combinations(range(r.last.size), 3))


@settings(max_examples=40, deadline=None)
@given(st.integers(2, 5), st.integers(2, 5), st.data())
def test_embeddings_match_brute_force(n, m, data):
    def rand_tour(k):
        bits = data.draw(st.lists(st.booleans(), min_size=k * k, max_size=k * k))
        adj = np.zeros((k, k), dtype=bool)
        for u, v in itertools.combinations(range(k), 2):
            if bits[u * k + v]:
                adj[u, v] = True
            else:
                adj[v, u] = True
        return tour(T, adj)

    a, b = rand_tour(min(n, m)), rand_tour(max(n, m))
    assert sorted(embeddings(a, b)) == sorted(brute_embeddings(a, b))
    assert isomorphic(a, a)


@settings(max_examples=20, deadline=None)
@given(st.sampled_from([1, 3, 5]), st.sampled_from([1, 3, 5]))
def test_amalgam_contains_both_parts(p, q):
    a1 = next(invariant_structures(cycle_action(p, TOURNAMENT), TOURNAMENT))
    a2 = next(invariant_structures(cycle_action(q, TOURNAMENT), TOURNAMENT))
    out, to_new = amalgamate_actions(empty_action(Z, TOURNAMENT), a1, a2, [], [])
    assert validate_action(out).ok
    assert brute_embeddings(a1, out)
    img = to_new
    for u, v in itertools.product(range(q), repeat=2):
        assert a2.adj[u, v] == out.adj[img[u], img[v]]
