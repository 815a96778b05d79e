import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from msa_forge.disorder import DEFAULT_DISTRIBUTION, DisorderSample, sample
from msa_forge.errors import CapacityError, ContainmentError, CoverageError
from msa_forge.geometry import Box
from msa_forge.operator import (
    InteractionSpec,
    assemble,
    dirichlet_split,
    export_coo,
    restrict,
    spectrum,
)

from oracles import dense_hamiltonian


def test_single_site():
    pot = DisorderSample.constant([[4]], 0.3)
    H = assemble(Box((4,), 1), 2.0, pot)
    assert H.dense().tolist() == [[0.6]]
    assert spectrum(H).tolist() == pytest.approx([0.6])


def test_free_chain_matrix_and_spectrum():
    H = assemble(Box((0,), 2), 1.0)
    assert H.dense().tolist() == [[0, -1, 0], [-1, 0, -1], [0, -1, 0]]
    assert spectrum(H) == pytest.approx([-np.sqrt(2), 0.0, np.sqrt(2)], abs=1e-12)


def test_two_site_spectrum():
    # two sites in Box((0,), 1) x ... is not a cube; use the 2x2 block of a 1-d chain
    H = assemble(Box((0,), 2), 1.0)
    sub = H.dense()[:2, :2]
    assert np.linalg.eigvalsh(sub) == pytest.approx([-1.0, 1.0])


def test_two_particle_interaction_diagonal():
    c = 0.7
    inter = InteractionSpec(r0=1, u0=c)
    box = Box((0, 1), 2, 2)
    H = assemble(box, 0.0, None, inter)
    for x, val in zip(box.sites(), H.diagonal):
        expect = c if abs(x[0] - x[1]) <= 1 else 0.0
        assert val == expect


def test_interaction_values_table():
    inter = InteractionSpec(r0=2, values=(3.0, 1.0, 0.5))
    assert inter.u2([0, 1, 2, 3, 9]).tolist() == [3.0, 1.0, 0.5, 0.0, 0.0]
    assert inter.bound == 3.0


def test_matches_loop_oracle():
    box = Box((0, 0), 3)
    pot = sample(DEFAULT_DISTRIBUTION, 11, box.support())
    H = assemble(box, 3.0, pot)
    ref, sites = dense_hamiltonian(3, 2, pot.as_dict(), 3.0)
    order = [sites.index(tuple(s)) for s in box.sites().tolist()]
    assert np.array_equal(H.dense(), ref[np.ix_(order, order)])


@settings(max_examples=40, deadline=None)
@given(d=st.integers(1, 2), N=st.integers(1, 2), r=st.integers(1, 3), g=st.floats(-5, 5),
       seed=st.integers(0, 2 ** 32))
def test_structure_invariants(d, N, r, g, seed):
    box = Box((0,) * (N * d), r, N)
    pot = sample(DEFAULT_DISTRIBUTION, seed, box.support())
    H = assemble(box, g, pot, InteractionSpec(1, 0.5))
    M = H.matrix
    assert (M != M.T).nnz == 0
    off = M - __import__("scipy").sparse.diags(M.diagonal())
    assert set(np.unique(off.data)) <= {-1.0}
    assert np.max(np.diff(M.indptr)) <= 2 * N * d + 1
    ev = spectrum(H)
    lo = -2 * N * d + M.diagonal().min()
    hi = 2 * N * d + M.diagonal().max()
    assert ev.min() >= lo - 1e-9 and ev.max() <= hi + 1e-9


def test_free_spectrum_within_band():
    ev = spectrum(assemble(Box((0, 0), 4), 0.0))
    assert ev.min() >= -4 and ev.max() <= 4


def test_eigenpair_residuals():
    box = Box((0,), 6)
    H = assemble(box, 2.0, sample(DEFAULT_DISTRIBUTION, 2, box.support()))
    w, v = spectrum(H, vectors=True)
    M = H.dense()
    res = np.max(np.abs(M @ v - v * w), axis=0)
    assert np.all(res <= 1e-9 * np.linalg.norm(M, 2))


def test_coverage_error():
    pot = DisorderSample.constant([[0]], 1.0)
    with pytest.raises(CoverageError):
        assemble(Box((0,), 2), 1.0, pot)


def test_capacity_error():
    H = assemble(Box((0,), 5), 1.0)
    with pytest.raises(CapacityError):
        spectrum(H, cap=5)


def test_dirichlet_split_interval():
    H = assemble(Box((0,), 6), 1.0)
    split = dirichlet_split(H, Box((0,), 3))
    assert len(split.edge_pairs[0]) == 2
    assert split.coupling.nnz == 4
    assert np.all(split.coupling.data == -1.0)
    assert (split.reassemble() != H.matrix).nnz == 0


@settings(max_examples=30, deadline=None)
@given(d=st.integers(1, 2), L=st.integers(3, 5), ell=st.integers(1, 2), seed=st.integers(0, 999))
def test_dirichlet_reassembly_exact(d, L, ell, seed):
    amb = Box((0,) * d, L)
    H = assemble(amb, 1.5, sample(DEFAULT_DISTRIBUTION, seed, amb.support()))
    inner = Box((1,) * d, ell)
    split = dirichlet_split(H, inner)
    assert (split.reassemble() != H.matrix).nnz == 0
    assert split.coupling.nnz == 2 * len(split.edge_pairs[0])


def test_dirichlet_split_containment():
    H = assemble(Box((0,), 3), 1.0)
    with pytest.raises(ContainmentError):
        dirichlet_split(H, Box((0,), 3))
    with pytest.raises(ContainmentError):
        dirichlet_split(H, Box((2,), 2))


def test_restrict_is_principal_submatrix():
    box = Box((0,), 5)
    H = assemble(box, 1.0, sample(DEFAULT_DISTRIBUTION, 0, box.support()))
    sub = Box((1,), 2)
    R = restrict(H, sub)
    direct = assemble(sub, 1.0, H.potential)
    assert np.array_equal(R.dense(), direct.dense())


def test_export_coo(tmp_path):
    H = assemble(Box((0,), 2), 1.0)
    path = tmp_path / "h.txt"
    export_coo(H, path)
    lines = path.read_text().splitlines()
    assert lines[0] == "# 3 3 4"
    assert lines[1] == "0 1 -1.0"
