import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from msa_forge.errors import ContainmentError, DomainError
from msa_forge.geometry import (
    Box,
    LatticePoint,
    boundary_sets,
    box_diagonal_distance,
    decomposability,
    decomposition_threshold,
    diagonal_distance,
    projections_disjoint,
)


def test_site_count_and_center_membership():
    for d, N, r in [(1, 1, 3), (2, 1, 2), (1, 2, 3), (3, 1, 2)]:
        box = Box((1,) * (N * d), r, N)
        assert box.size == (2 * r - 1) ** (N * d)
        assert len(box.sites()) == box.size
        assert box.center in box


def test_lattice_point_shape():
    x = LatticePoint((1, 2, 3, 4), 2)
    assert x.dim == 2
    assert x.project(1) == (3, 4)
    with pytest.raises(DomainError):
        LatticePoint((1, 2, 3), 2)


def test_boundary_interval():
    b = boundary_sets(Box((0,), 3))
    assert b.inner == {(-2,), (2,)}
    assert b.outer == {(-3,), (3,)}
    assert b.edge_pairs == {((-2,), (-3,)), ((2,), (3,))}


def test_boundary_square_corner_has_no_edge():
    b = boundary_sets(Box((0, 0), 2))
    assert len(b.inner) == 8 and (0, 0) not in b.inner
    assert (2, 2) in b.outer
    assert all(pair[1] != (2, 2) for pair in b.edge_pairs)


def test_boundary_single_site():
    b = boundary_sets(Box((5,), 1))
    assert b.inner == {(5,)}
    assert b.outer == {(4,), (6,)}


def test_boundary_respects_ambient():
    amb = Box((0,), 4)
    b = boundary_sets(Box((2,), 2), amb)
    assert b.outer == {(0,)}
    with pytest.raises(ContainmentError):
        boundary_sets(Box((3,), 2), amb)


@settings(max_examples=60, deadline=None)
@given(d=st.integers(1, 2), r=st.integers(1, 4), c=st.integers(-3, 3))
def test_boundary_invariants(d, r, c):
    box = Box((c,) * d, r)
    b = boundary_sets(box)
    for x, y in b.edge_pairs:
        assert x in b.inner and y in b.outer
        assert sum(abs(p - q) for p, q in zip(x, y)) == 1
        assert (y, x) not in b.edge_pairs
    assert all(x in box for x in b.inner)
    assert not any(y in box for y in b.outer)
    if d == 1:
        assert len(b.inner) == (1 if r == 1 else 2)


def test_diagonal_distance_examples():
    assert diagonal_distance(LatticePoint((0, 100), 2)) == 50
    assert diagonal_distance(LatticePoint((7, 7), 2)) == 0


def test_diagonal_distance_three_particles_against_brute_force():
    x = (0, 2, 4)
    brute = min(max(abs(c - a) for c in x) for a in range(-10, 15))
    assert brute == 2
    assert diagonal_distance(LatticePoint(x, 3)) == brute


@settings(max_examples=100, deadline=None)
@given(st.lists(st.integers(-20, 20), min_size=4, max_size=6).filter(lambda v: len(v) % 2 == 0))
def test_diagonal_distance_matches_search_2d(coords):
    N = len(coords) // 2
    pts = np.array(coords).reshape(N, 2)
    best = min(
        int(np.max(np.abs(pts - np.array([a, b]))))
        for a in range(-20, 21) for b in range(-20, 21)
    )
    assert diagonal_distance(LatticePoint(tuple(coords), N)) == best


def test_box_diagonal_distance_is_min_over_sites():
    for c in [(0, 9), (3, -4), (0, 0), (5, 13)]:
        box = Box(c, 3, 2)
        brute = min(diagonal_distance(LatticePoint(tuple(s), 2)) for s in box.sites())
        assert box_diagonal_distance(box) == brute


def test_decomposability_examples():
    dec = decomposability(Box((0, 100), 3, 2), r0=2)
    assert dec is not None and dec.subsystem == (0,) and dec.consecutive
    assert decomposability(Box((0, 3), 3, 2), r0=2) is None
    assert decomposition_threshold(2, 3, 2) == 12
    assert diagonal_distance(LatticePoint((0, 100), 2)) > 12


def test_decomposability_needs_two_particles():
    with pytest.raises(DomainError):
        decomposability(Box((0,), 2), 0)


def test_decomposability_finds_non_consecutive_split():
    # particles 0 and 2 cluster, particle 1 is far away
    dec = decomposability(Box((0, 50, 1), 2, 3), r0=0)
    assert dec is not None
    assert set(dec.subsystem) in ({0, 2}, {1})


@settings(max_examples=80, deadline=None)
@given(a=st.integers(-30, 30), gap=st.integers(0, 40), L=st.integers(1, 4), r0=st.integers(0, 3))
def test_decomposability_monotone_in_separation(a, gap, L, r0):
    near = decomposability(Box((a, a + gap), L, 2), r0)
    far = decomposability(Box((a, a + gap + 7), L, 2), r0)
    if near is not None:
        assert far is not None


@settings(max_examples=80, deadline=None)
@given(u=st.tuples(st.integers(-40, 40), st.integers(-40, 40)), L=st.integers(1, 4),
       r0=st.integers(0, 3))
def test_sufficient_test_implies_decomposable(u, L, r0):
    if diagonal_distance(LatticePoint(u, 2)) > decomposition_threshold(2, L, r0):
        assert decomposability(Box(u, L, 2), r0) is not None


def test_projections_disjoint_examples():
    assert projections_disjoint(LatticePoint((0, 0), 2), LatticePoint((10, 10), 2), 2) == (True, True)
    assert projections_disjoint(LatticePoint((0, 0), 2), LatticePoint((1, 10), 2), 2) == (False, True)


def test_projections_disjoint_matches_set_intersection():
    L = 2
    for x, y in itertools.product([(0, 0), (3, -2), (5, 1)], repeat=2):
        bx, by = Box(x, L, 2), Box(y, L, 2)
        for j in range(2):
            px = {tuple(s) for s in bx.projection(j).sites().tolist()}
            py = {tuple(s) for s in by.projection(j).sites().tolist()}
            expect = not (px & py)
            got = projections_disjoint(bx.center_point, by.center_point, L)[j]
            assert got == expect


def test_lemma_b_window_example():
    # B=1, L=2: separated near-diagonal boxes have disjoint projections
    L, B = 2, 1
    axis = range(-15, 16)
    boxes = [Box((i, j), L, 2) for i in axis for j in axis]
    boxes = [b for b in boxes if box_diagonal_distance(b) < B * L]
    for a, b in itertools.combinations(boxes, 2):
        if max(abs(p - q) for p, q in zip(a.center, b.center)) > (4 * B + 6) * L:
            assert all(projections_disjoint(a.center_point, b.center_point, L))


def test_subboxes_and_overlap():
    box = Box((0,), 5)
    subs = box.subboxes(2)
    assert len(subs) == 7
    assert all(s.is_subbox_of(box) for s in subs)
    assert Box((0,), 2).overlaps(Box((2,), 2))
    assert not Box((0,), 2).overlaps(Box((3,), 2))
