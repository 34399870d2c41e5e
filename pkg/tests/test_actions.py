import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from finapprox.actions import (
    GRAPH,
    CosetActionSpec,
    circulant,
    find_cliques,
    materialize_window,
    restrict_to_partial,
    tournament_from_good,
    two_subgroup_graph,
    validate_clique_free,
    validate_tournament,
)
from finapprox.groups import Group, PreconditionError, Subgroup, UsageError

from fixtures import exactly_one_arrow, generator_invariant, has_clique

Z = Group.free_abelian(1)
Z2 = Group.free_abelian(2)


def cyc(d):
    return Subgroup.generated(Z, [(d,)])


def test_tournament_on_z_mod_3():
    spec, w = tournament_from_good(cyc(3))
    assert spec.in_arrows == [[(1,)]]
    assert w.arrows() == [(0, 1), (1, 2), (2, 0)]
    assert validate_tournament(w).ok
    assert exactly_one_arrow(w.adj) and generator_invariant(w)


def test_trivial_stabilizer_gives_linear_order_window():
    spec, w = tournament_from_good(cyc(0), radius=5)
    assert spec.in_arrows[0][:6] == [(k,) for k in range(1, 7)]
    assert w.size == 11
    assert validate_tournament(w).ok
    # x -> x + k for k > 0: the window is the transitive tournament on -5..5
    pos = [g[0] for _, g in w.vertices]
    for u, v in itertools.permutations(range(w.size), 2):
        assert bool(w.adj[u, v]) == (pos[v] > pos[u])


def test_bad_stabilizer_is_rejected():
    with pytest.raises(PreconditionError):
        tournament_from_good(cyc(2))


def test_circulant_is_a_tournament():
    w = circulant(5, [1, 2])
    assert validate_tournament(w).ok
    assert exactly_one_arrow(w.adj)
    assert not validate_tournament(circulant(4, [1, 2])).ok


def test_arrow_data_window():
    w = materialize_window(CosetActionSpec(Z, [cyc(5)], [[(1,), (2,)]]))
    assert (w.size, len(w.arrows())) == (5, 10)
    assert validate_tournament(w).ok


def test_invariants_flag_bad_data():
    # 1 and 6 share a left coset of 5Z
    assert CosetActionSpec(Z, [cyc(5)], [[(1,), (6,)]]).check_invariants()
    # f and -f cannot both be arrows
    assert CosetActionSpec(Z, [cyc(5)], [[(1,), (4,)]]).check_invariants()
    assert not CosetActionSpec(Z, [cyc(5)], [[(1,), (2,)]]).check_invariants()


def test_bad_cross_key():
    with pytest.raises(UsageError):
        CosetActionSpec(Z, [cyc(3)], [[]], {(0, 0): [(1,)]})


def test_two_subgroup_gadget():
    h1 = Subgroup.generated(Z2, [(2, 0)])
    h2 = Subgroup.generated(Z2, [(0, 2)])
    spec = two_subgroup_graph(h1, h2, (1, 1))
    assert spec.kind == GRAPH
    assert spec.notes == ["d(H1, (1,1) H2) = 2"]
    w = materialize_window(spec, 2)
    assert w.size == 16
    assert validate_clique_free(w, 3).ok and not has_clique(w.adj, 3)
    flagged = two_subgroup_graph(cyc(2), cyc(3), (1,))
    assert "precondition flag" in flagged.notes[0]


def test_restrict_keeps_window_data():
    spec = CosetActionSpec(Z, [cyc(0)], [[(1,), (2,), (3,)]])
    assert restrict_to_partial(spec, [(1,), (2,)]).in_arrows == [[(1,), (2,)]]


@settings(max_examples=40, deadline=None)
@given(st.integers(3, 8), st.data())
def test_find_cliques_matches_brute_force(n, data):
    bits = data.draw(st.lists(st.booleans(), min_size=n * n, max_size=n * n))
    a = np.array(bits, dtype=bool).reshape(n, n)
    a = np.triu(a, 1)
    a = a | a.T
    for k in (3, 4):
        assert bool(find_cliques(a, k, limit=1)) == has_clique(a, k)


@settings(max_examples=40, deadline=None)
@given(st.sampled_from([3, 5, 7, 9]), st.integers(0, 6))
def test_good_cyclic_tournaments_valid(d, radius):
    spec, w = tournament_from_good(cyc(d))
    assert w.size == d
    assert exactly_one_arrow(w.adj) and generator_invariant(w)
