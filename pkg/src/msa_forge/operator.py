"""Finite-volume Hamiltonians with Dirichlet truncation.

Convention: ``H = -Delta + g V + U`` with ``(Delta f)(x) = sum_{y ~ x} f(y)``,
so every l1-adjacent pair inside the box carries the entry ``-1``.
"""
from __future__ import annotations

import functools

from dataclasses import dataclass
from typing import Optional

import numpy as np
import scipy.linalg
import scipy.sparse as sp

from .disorder import DisorderSample
from .errors import CapacityError, ContainmentError, DomainError
from .geometry import Box, boundary_arrays

__all__ = [
    "InteractionSpec",
    "FiniteVolumeHamiltonian",
    "DirichletSplit",
    "assemble",
    "restrict",
    "dirichlet_split",
    "spectrum",
    "export_coo",
    "DENSE_CAP",
]

DENSE_CAP = 4096


@dataclass(frozen=True)
class InteractionSpec:
    """Finite-range two-body interaction ``u2(r) = u0 * 1[r <= r0]``.

    ``values`` may override the step profile: ``values[r]`` is ``u2(r)`` for
    ``r = 0..r0``.
    """

    r0: int = 0
    u0: float = 0.0
    values: Optional[tuple[float, ...]] = None

    def __post_init__(self):
        if self.r0 < 0:
            raise DomainError("interaction range must be non-negative")
        if self.values is not None:
            if len(self.values) != self.r0 + 1:
                raise DomainError("values must list u2(0..r0)")
            object.__setattr__(self, "values", tuple(float(v) for v in self.values))

    @property
    def bound(self) -> float:
        if self.values is not None:
            return max(abs(v) for v in self.values)
        return abs(self.u0)

    @property
    def vanishes(self) -> bool:
        return self.bound == 0.0

    def u2(self, r):
        r = np.asarray(r)
        if self.values is not None:
            table = np.asarray(self.values + (0.0,))
            return table[np.minimum(r, self.r0 + 1)]
        return np.where(r <= self.r0, self.u0, 0.0)

    def energy(self, sites: np.ndarray, n_particles: int) -> np.ndarray:
        """``U(x) = sum_{j<k} u2(||x_j - x_k||)`` for each configuration."""
        d = sites.shape[1] // n_particles
        parts = sites.reshape(len(sites), n_particles, d)
        total = np.zeros(len(sites))
        for j in range(n_particles):
            for k in range(j + 1, n_particles):
                r = np.max(np.abs(parts[:, j] - parts[:, k]), axis=1)
                total += self.u2(r)
        return total


@dataclass(frozen=True, eq=False)
class FiniteVolumeHamiltonian:
    box: Box
    g: float
    potential: Optional[DisorderSample]
    interaction: Optional[InteractionSpec]
    matrix: sp.csr_matrix

    @property
    def size(self) -> int:
        return self.matrix.shape[0]

    @property
    def diagonal(self) -> np.ndarray:
        return self.matrix.diagonal()

    def dense(self) -> np.ndarray:
        return self.matrix.toarray()

    def norm_bound(self) -> float:
        """Gershgorin-type bound on the operator norm."""
        return float(np.max(np.abs(self.diagonal))) + 2 * self.box.ndim


@functools.lru_cache(maxsize=64)
def _template(shape: tuple[int, ...]) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """CSR pattern of the hopping plus an explicit diagonal for a box of ``shape``.

    Returns ``(indptr, indices, data, diag_pos)`` where ``data`` holds the
    hopping values and ``diag_pos`` the slots of the diagonal entries.
    """
    ndim, n = len(shape), int(np.prod(shape))
    strides = np.cumprod((1,) + shape[:0:-1])[::-1]
    offsets = np.indices(shape).reshape(ndim, -1)
    idx = np.arange(n)
    rows, cols = [idx], [idx]
    for k in range(ndim):
        ok = offsets[k] < shape[k] - 1
        rows += [idx[ok], idx[ok] + strides[k]]
        cols += [idx[ok] + strides[k], idx[ok]]
    r, c = np.concatenate(rows), np.concatenate(cols)
    data = np.where(r == c, 0.0, -1.0)
    m = sp.csr_matrix((data, (r, c)), shape=(n, n))
    m.sort_indices()
    pos = np.empty(n, dtype=np.int64)
    for i in range(n):
        lo, hi = m.indptr[i], m.indptr[i + 1]
        pos[i] = lo + np.flatnonzero(m.indices[lo:hi] == i)[0]
    for a in (m.indptr, m.indices, m.data, pos):
        a.setflags(write=False)
    return m.indptr, m.indices, m.data, pos


def assemble(
    box: Box,
    g: float,
    sample: Optional[DisorderSample] = None,
    interaction: Optional[InteractionSpec] = None,
) -> FiniteVolumeHamiltonian:
    """Assemble ``H_Lambda`` on ``box``; ``sample=None`` means ``V = 0``."""
    sites = box.sites()
    diag = np.zeros(box.size)
    if sample is not None:
        d = box.dim
        for j in range(box.n_particles):
            diag += g * sample.values_at(sites[:, j * d:(j + 1) * d])
    if interaction is not None and box.n_particles > 1:
        diag += interaction.energy(sites, box.n_particles)
    indptr, indices, data, pos = _template(tuple(int(s) for s in box.shape))
    data = data.copy()
    data[pos] = diag
    matrix = sp.csr_matrix((data, indices.copy(), indptr.copy()), shape=(box.size, box.size))
    matrix.eliminate_zeros()
    matrix.has_sorted_indices = True
    return FiniteVolumeHamiltonian(box, float(g), sample, interaction, matrix)


def restrict(H: FiniteVolumeHamiltonian, sub: Box) -> FiniteVolumeHamiltonian:
    """Dirichlet restriction of ``H`` to a sub-box (a principal submatrix)."""
    if not sub.is_subbox_of(H.box):
        raise ContainmentError(f"{sub!r} is not inside {H.box!r}")
    idx = H.box.index_of(sub.sites())
    matrix = H.matrix[idx][:, idx].tocsr()
    matrix.sort_indices()
    return FiniteVolumeHamiltonian(sub, H.g, H.potential, H.interaction, matrix)


@dataclass(frozen=True, eq=False)
class DirichletSplit:
    """``H = (H_inner (+) H_complement) + coupling`` in the ambient row order."""

    inner_index: np.ndarray
    complement_index: np.ndarray
    inner: sp.csr_matrix
    complement: sp.csr_matrix
    coupling: sp.csr_matrix
    edge_pairs: tuple[np.ndarray, np.ndarray]

    def reassemble(self) -> sp.csr_matrix:
        n = self.coupling.shape[0]
        perm = np.concatenate([self.inner_index, self.complement_index])
        block = sp.block_diag([self.inner, self.complement]).tocoo()
        embedded = sp.coo_matrix(
            (block.data, (perm[block.row], perm[block.col])), shape=(n, n)
        )
        return (embedded + self.coupling).tocsr()


def dirichlet_split(H: FiniteVolumeHamiltonian, inner: Box) -> DirichletSplit:
    if not inner.is_subbox_of(H.box) or inner == H.box:
        raise ContainmentError(f"{inner!r} is not strictly inside {H.box!r}")
    box = H.box
    mask = inner.contains(box.sites())
    inner_idx = np.flatnonzero(mask)
    comp_idx = np.flatnonzero(~mask)
    M = H.matrix
    _, _, pin, pout = boundary_arrays(inner, box)
    a = box.index_of(pin)
    b = box.index_of(pout)
    # the Laplacian's sign travels with the coupling: each edge pair enters as -1
    vals = np.concatenate([M[a, b].A1, M[b, a].A1]) if len(a) else np.empty(0)
    coupling = sp.coo_matrix(
        (vals, (np.concatenate([a, b]), np.concatenate([b, a]))), shape=M.shape
    ).tocsr()
    return DirichletSplit(
        inner_idx,
        comp_idx,
        M[inner_idx][:, inner_idx].tocsr(),
        M[comp_idx][:, comp_idx].tocsr(),
        coupling,
        (pin, pout),
    )


def _check_cap(n: int, cap: int):
    if n > cap:
        raise CapacityError(
            f"{n} sites exceed the dense eigensolve cap of {cap}; use resolvent-only paths"
        )


def spectrum(H: FiniteVolumeHamiltonian, vectors: bool = False, cap: int = DENSE_CAP):
    """All eigenvalues in ascending order, optionally with orthonormal eigenvectors."""
    _check_cap(H.size, cap)
    dense = H.dense()
    if vectors:
        return scipy.linalg.eigh(dense)
    return scipy.linalg.eigvalsh(dense)


def export_coo(H: FiniteVolumeHamiltonian, path) -> None:
    """Write the matrix as ``row col value`` lines (upper and lower triangle)."""
    coo = H.matrix.tocoo()
    order = np.lexsort((coo.col, coo.row))
    with open(path, "w") as fh:
        fh.write(f"# {H.size} {H.size} {coo.nnz}\n")
        for i in order:
            fh.write(f"{coo.row[i]} {coo.col[i]} {float(coo.data[i])!r}\n")
