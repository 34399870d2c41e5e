import itertools

from hypothesis import given, settings
from hypothesis import strategies as st

from finapprox import lattice as lat

vec2 = st.tuples(st.integers(-6, 6), st.integers(-6, 6))


def brute_sublattices(n, dim):
    """Sublattices of index n, found as kernels of maps onto groups of order n via HNF of all generating sets."""
    seen = set()
    box = range(n + 1)
    rows = [v for v in itertools.product(box, repeat=dim) if any(v)]
    for gens in itertools.combinations(rows, dim):
        b = lat.hnf(list(gens) + [tuple(n if k == i else 0 for k in range(dim)) for i in range(dim)], dim)
        if lat.index(b, dim) == n:
            seen.add(b)
    return seen


def test_hnf_of_example_lattice():
    assert lat.hnf([(0, 1), (2, -1)], 2) == ((2, 0), (0, 1))


def test_invariants_examples():
    assert lat.invariants([(0, 1), (2, -1)], 2) == ([2], 0)
    assert lat.invariants([(3,)], 1) == ([3], 0)
    assert lat.invariants([(0, 1)], 2) == ([], 1)


def test_index_two_sublattices_of_z2():
    # row-style HNF; the same three lattices as the column-style matrices
    got = set(lat.sublattices_of_index(2, 2))
    assert got == {((1, 0), (0, 2)), ((2, 0), (0, 1)), ((1, 1), (0, 2))}


def test_sublattice_counts_match_divisor_sums():
    for n in range(1, 13):
        sigma = sum(d for d in range(1, n + 1) if n % d == 0)
        assert len(list(lat.sublattices_of_index(n, 2))) == sigma


def test_sublattices_match_brute_force():
    for n in (2, 3, 4, 6):
        assert set(lat.sublattices_of_index(n, 2)) == brute_sublattices(n, 2)


@settings(max_examples=80, deadline=None)
@given(st.lists(vec2, min_size=0, max_size=4), vec2)
def test_reduce_is_canonical(gens, v):
    b = lat.hnf(gens, 2)
    r = lat.reduce(v, b)
    diff = tuple(x - y for x, y in zip(v, r))
    assert lat.contains(b, diff)
    for g in gens:
        assert lat.contains(b, g)
        shifted = tuple(x + y for x, y in zip(v, g))
        assert lat.reduce(shifted, b) == r


@settings(max_examples=60, deadline=None)
@given(st.lists(vec2, min_size=1, max_size=3), st.lists(vec2, min_size=1, max_size=3))
def test_intersection_against_box(a, b):
    la, lb = lat.hnf(a, 2), lat.hnf(b, 2)
    inter = lat.intersection(la, lb, 2)
    for v in itertools.product(range(-8, 9), repeat=2):
        assert lat.contains(inter, v) == (lat.contains(la, v) and lat.contains(lb, v))


@settings(max_examples=60, deadline=None)
@given(st.lists(vec2, min_size=0, max_size=4))
def test_smith_coordinates_round_trip(gens):
    diag, v, vinv = lat.smith(gens, 2)
    for x in itertools.product(range(-3, 4), repeat=2):
        assert lat.from_smith_coords(lat.to_smith_coords(x, v), vinv) == x
    b = lat.hnf(gens, 2)
    idx = lat.index(b, 2)
    if idx is not None:
        nonzero = [d for d in diag if d]
        prod = 1
        for d in nonzero:
            prod *= d
        assert prod == idx
