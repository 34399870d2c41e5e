import random

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from finapprox.actions import GRAPH, CosetActionSpec, circulant, two_subgroup_graph
from finapprox.approx import (
    Z2_MARKED,
    FoundApproximation,
    RefutationCertificate,
    approximate_tournament,
    approximate_triangle_free,
    refute_approximation,
    z2_counterexample,
)
from finapprox.groups import Group, NotFound, PreconditionError, Subgroup, UsageError

from fixtures import (
    embedding_ok,
    exactly_one_arrow,
    generator_invariant,
    has_clique,
    random_tournament_partial,
    random_triangle_gadget,
)

Z = Group.free_abelian(1)
Z2 = Group.free_abelian(2)


def cyc(d):
    return Subgroup.generated(Z, [(d,)])


def test_single_orbit_lock():
    r = approximate_tournament(CosetActionSpec(Z, [cyc(0)], [[(1,), (2,)]]))
    assert r.certificate.kernel.kernel_basis == ((5,),)
    assert np.array_equal(r.window.adj, circulant(5, [1, 2]).adj)


def test_three_cycle_from_3z():
    r = approximate_tournament(CosetActionSpec(Z, [cyc(3)], [[(1,)]]))
    assert r.window.arrows() == [(0, 1), (1, 2), (2, 0)]


def test_three_orbit_instance():
    spec = CosetActionSpec(Z, [cyc(3), cyc(0), cyc(5)], [[(1,)], [(1,), (-3,)], [(2,)]],
                           {(0, 1): [(1,)], (1, 0): [(3,)], (2, 0): [(0,)]})
    r = approximate_tournament(spec)
    assert not isinstance(r, NotFound)
    assert exactly_one_arrow(r.window.adj) and generator_invariant(r.window)
    assert embedding_ok(spec, r) == []


def test_bad_stabilizer_rejected():
    with pytest.raises(PreconditionError):
        approximate_tournament(CosetActionSpec(Z, [cyc(2)], [[]]))


def test_kind_mismatch():
    spec = two_subgroup_graph(cyc(2), cyc(4), (1,))
    with pytest.raises(UsageError):
        approximate_tournament(spec)


def test_empty_spec_gives_empty_window():
    r = approximate_tournament(CosetActionSpec(Z, [], []))
    assert r.window.size == 0 and r.embedding == []


def test_z2_refutation_small_bound():
    c = refute_approximation(z2_counterexample(), Z2_MARKED, 1)
    assert isinstance(c, RefutationCertificate)
    assert c.entries[0][1].startswith("collapse")


def test_refute_finds_z_approximation():
    r = refute_approximation(CosetActionSpec(Z, [cyc(3)], [[(1,)]]), [], 20)
    assert isinstance(r, FoundApproximation) and r.report.ok


def test_triangle_free_gadget():
    h1 = Subgroup.generated(Z2, [(2, 0)])
    h2 = Subgroup.generated(Z2, [(0, 2)])
    spec = two_subgroup_graph(h1, h2, (1, 1))
    r = approximate_triangle_free(spec)
    assert r.window.size == 16
    assert not has_clique(r.window.adj, 3)
    assert embedding_ok(spec, r) == []
    spec.clique = 4
    r = approximate_triangle_free(spec)
    assert not has_clique(r.window.adj, 4)


def test_window_with_triangle_rejected():
    # x ~ x+1 ~ x+2 ~ x is a triangle already inside the window
    spec = CosetActionSpec(Z, [cyc(0)], [[(1,), (2,)]], kind=GRAPH)
    with pytest.raises(PreconditionError):
        approximate_triangle_free(spec)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10**6))
def test_random_tournament_partials(seed):
    spec = random_tournament_partial(random.Random(seed))
    r = approximate_tournament(spec, bound=60)
    assert not isinstance(r, NotFound)
    assert exactly_one_arrow(r.window.adj)
    assert generator_invariant(r.window)
    assert embedding_ok(spec, r) == []


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 10**6))
def test_random_triangle_gadgets(seed):
    spec = random_triangle_gadget(random.Random(seed))
    r = approximate_triangle_free(spec)
    assert not isinstance(r, NotFound)
    assert not has_clique(r.window.adj, 3)
    assert embedding_ok(spec, r) == []
