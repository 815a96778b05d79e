"""Lattice geometry for single- and multi-particle boxes.

All box geometry is measured in the sup-norm.  Adjacency (edge pairs and the
lattice Laplacian) is l1-adjacency, i.e. each site has ``2*N*d`` neighbours in
the configuration space ``Z^{N d}``.

Particle indices are 0-based throughout.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Iterator, Optional, Sequence

import numpy as np

from .errors import ContainmentError, DomainError

__all__ = [
    "LatticePoint",
    "Box",
    "BoundarySets",
    "Decomposition",
    "boundary_sets",
    "diagonal_distance",
    "box_diagonal_distance",
    "decomposition_threshold",
    "decomposability",
    "projections_disjoint",
    "sup_dist",
]


def sup_dist(x: Sequence[int], y: Sequence[int]) -> int:
    return int(np.max(np.abs(np.asarray(x) - np.asarray(y)))) if len(x) else 0


@dataclass(frozen=True)
class LatticePoint:
    """A point of ``Z^{N d}`` stored as a flat coordinate tuple."""

    coords: tuple[int, ...]
    n_particles: int = 1

    def __post_init__(self):
        object.__setattr__(self, "coords", tuple(int(c) for c in self.coords))
        if self.n_particles < 1:
            raise DomainError("particle count must be positive")
        if len(self.coords) == 0 or len(self.coords) % self.n_particles:
            raise DomainError(
                f"{len(self.coords)} coordinates cannot be split among "
                f"{self.n_particles} particles"
            )

    @property
    def dim(self) -> int:
        return len(self.coords) // self.n_particles

    def project(self, j: int) -> tuple[int, ...]:
        """Position of particle ``j`` in ``Z^d``."""
        if not 0 <= j < self.n_particles:
            raise DomainError(f"particle index {j} out of range")
        d = self.dim
        return self.coords[j * d:(j + 1) * d]

    def particles(self) -> np.ndarray:
        return np.asarray(self.coords, dtype=np.int64).reshape(self.n_particles, self.dim)


class Box:
    """Lattice cube ``{x : ||x - center|| <= radius - 1}`` in ``Z^{N d}``.

    For ``N > 1`` this is the Cartesian product of ``N`` single-particle cubes
    of the same radius.  Sites are enumerated in C order of their offsets from
    the corner, which is also the row order of every assembled operator.
    """

    __slots__ = ("center", "radius", "n_particles", "dim")

    def __init__(self, center: Sequence[int], radius: int, n_particles: int = 1):
        if isinstance(center, LatticePoint):
            n_particles = center.n_particles
            center = center.coords
        point = LatticePoint(tuple(center), n_particles)
        if int(radius) < 1:
            raise DomainError(f"box radius must be >= 1, got {radius}")
        self.center = point.coords
        self.radius = int(radius)
        self.n_particles = point.n_particles
        self.dim = point.dim

    def __repr__(self):
        return f"Box(center={self.center}, radius={self.radius}, n_particles={self.n_particles})"

    def __eq__(self, other):
        if not isinstance(other, Box):
            return NotImplemented
        return (self.center, self.radius, self.n_particles) == (
            other.center, other.radius, other.n_particles)

    def __hash__(self):
        return hash((self.center, self.radius, self.n_particles))

    @property
    def ndim(self) -> int:
        """Dimension ``N*d`` of the configuration space."""
        return self.n_particles * self.dim

    @property
    def side(self) -> int:
        return 2 * self.radius - 1

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.side,) * self.ndim

    @property
    def size(self) -> int:
        return self.side ** self.ndim

    def __len__(self):
        return self.size

    @property
    def center_point(self) -> LatticePoint:
        return LatticePoint(self.center, self.n_particles)

    def sites(self) -> np.ndarray:
        """All sites as an ``(size, N*d)`` integer array."""
        offsets = np.indices(self.shape, dtype=np.int64).reshape(self.ndim, -1).T
        return offsets - (self.radius - 1) + np.asarray(self.center, dtype=np.int64)

    def __iter__(self) -> Iterator[tuple[int, ...]]:
        for row in self.sites():
            yield tuple(int(c) for c in row)

    def contains(self, points) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, dtype=np.int64))
        return np.max(np.abs(pts - np.asarray(self.center)), axis=1) <= self.radius - 1

    def __contains__(self, point) -> bool:
        return bool(self.contains(point)[0])

    def index_of(self, points) -> np.ndarray:
        """Row index of each point, or -1 for points outside the box."""
        pts = np.atleast_2d(np.asarray(points, dtype=np.int64))
        offsets = pts - np.asarray(self.center) + (self.radius - 1)
        inside = np.all((offsets >= 0) & (offsets < self.side), axis=1)
        idx = np.full(len(pts), -1, dtype=np.int64)
        if inside.any():
            idx[inside] = np.ravel_multi_index(tuple(offsets[inside].T), self.shape)
        return idx

    def depth(self, points) -> np.ndarray:
        """Sup-distance from each point to the inner boundary (0 on it)."""
        pts = np.atleast_2d(np.asarray(points, dtype=np.int64))
        return self.radius - 1 - np.max(np.abs(pts - np.asarray(self.center)), axis=1)

    def is_subbox_of(self, other: "Box") -> bool:
        if (self.n_particles, self.dim) != (other.n_particles, other.dim):
            return False
        return sup_dist(self.center, other.center) + self.radius <= other.radius

    def overlaps(self, other: "Box") -> bool:
        return sup_dist(self.center, other.center) <= self.radius + other.radius - 2

    def projection(self, j: int) -> "Box":
        """Single-particle box ``Pi_j`` of this box."""
        return Box(self.center_point.project(j), self.radius)

    def support(self) -> np.ndarray:
        """Single-particle sites met by any projection (sorted, unique)."""
        d = self.dim
        centers = np.asarray(self.center).reshape(self.n_particles, d)
        offsets = Box((0,) * d, self.radius).sites()
        pts = (centers[:, None, :] + offsets[None, :, :]).reshape(-1, d)
        return np.unique(pts, axis=0)

    def subboxes(self, radius: int, stride: int = 1) -> list["Box"]:
        """All boxes of the given radius contained in this one.

        With ``stride > 1`` only centers on a sublattice of that stride
        (anchored at the center of this box) are returned.
        """
        reach = self.radius - radius
        if reach < 0:
            return []
        steps = range(-(reach // stride) * stride, reach + 1, stride)
        out = []
        for shift in itertools.product(steps, repeat=self.ndim):
            c = tuple(a + b for a, b in zip(self.center, shift))
            out.append(Box(c, radius, self.n_particles))
        return out


@dataclass(frozen=True)
class BoundarySets:
    inner: frozenset
    outer: frozenset
    edge_pairs: frozenset


def _check_containment(box: Box, ambient: Optional[Box]):
    if ambient is not None and not box.is_subbox_of(ambient):
        raise ContainmentError(f"{box!r} is not contained in {ambient!r}")


def boundary_arrays(box: Box, ambient: Optional[Box] = None):
    """Array form of the boundary sets.

    Returns ``(inner, outer, pairs_in, pairs_out)`` where ``pairs_in[k]`` and
    ``pairs_out[k]`` are the inner and outer endpoints of the k-th edge pair.
    """
    _check_containment(box, ambient)
    sites = box.sites()
    inner = sites[box.depth(sites) == 0]
    shell = Box(box.center, box.radius + 1, box.n_particles)
    ring = shell.sites()
    outer = ring[shell.depth(ring) == 0]
    if ambient is not None:
        outer = outer[ambient.contains(outer)] if len(outer) else outer
    pin, pout = [], []
    for k in range(box.ndim):
        for sgn in (-1, 1):
            moved = inner.copy()
            moved[:, k] += sgn
            keep = ~box.contains(moved)
            if ambient is not None:
                keep &= ambient.contains(moved)
            pin.append(inner[keep])
            pout.append(moved[keep])
    pairs_in = np.concatenate(pin) if pin else np.empty((0, box.ndim), dtype=np.int64)
    pairs_out = np.concatenate(pout) if pout else np.empty((0, box.ndim), dtype=np.int64)
    return inner, outer, pairs_in, pairs_out


def boundary_sets(box: Box, ambient: Optional[Box] = None) -> BoundarySets:
    """Inner boundary, outer boundary and edge pairs of ``box`` within ``ambient``.

    ``ambient=None`` means the unbounded lattice.
    """
    inner, outer, pin, pout = boundary_arrays(box, ambient)
    as_set = lambda arr: frozenset(tuple(int(c) for c in row) for row in arr)
    pairs = frozenset(
        (tuple(int(c) for c in a), tuple(int(c) for c in b)) for a, b in zip(pin, pout)
    )
    return BoundarySets(as_set(inner), as_set(outer), pairs)


def diagonal_distance(point: LatticePoint) -> int:
    """``min_a ||x - (a, ..., a)||`` over ``a`` in ``Z^d``.

    The minimisation separates over the d axes; on each axis the best integer
    ``a`` is a midpoint of the projected coordinates.
    """
    parts = point.particles()
    spread = parts.max(axis=0) - parts.min(axis=0)
    return int(np.max((spread + 1) // 2))


def box_diagonal_distance(box: Box) -> int:
    """Sup-distance from the nearest site of ``box`` to the diagonal."""
    return max(0, diagonal_distance(box.center_point) - (box.radius - 1))


def decomposition_threshold(n_particles: int, radius: int, r0: int) -> int:
    """``r_{N,L} = 2N(L-1) + N r0``."""
    return 2 * n_particles * (radius - 1) + n_particles * r0


@dataclass(frozen=True)
class Decomposition:
    subsystem: tuple[int, ...]
    complement: tuple[int, ...]

    @property
    def consecutive(self) -> bool:
        return self.subsystem == tuple(range(len(self.subsystem)))


def _bipartitions(n: int):
    # consecutive splits [0, k) first, then every other split containing particle 0
    seen = set()
    for k in range(1, n):
        part = tuple(range(k))
        seen.add(part)
        yield part
    rest = range(1, n)
    for size in range(0, n - 1):
        for extra in itertools.combinations(rest, size):
            part = (0,) + extra
            if part not in seen:
                yield part


def decomposability(box: Box, r0: int) -> Optional[Decomposition]:
    """Find a split of the particles into two non-interacting groups.

    A split ``J | J^c`` is admissible when every cross pair satisfies
    ``||u_j - u_i|| > 2(L-1) + r0``.  Returns ``None`` for a non-decomposable
    box.
    """
    n = box.n_particles
    if n < 2:
        raise DomainError("decomposability needs at least two particles")
    parts = box.center_point.particles()
    gap = 2 * (box.radius - 1) + r0
    dist = np.max(np.abs(parts[:, None, :] - parts[None, :, :]), axis=2)
    for part in _bipartitions(n):
        comp = tuple(i for i in range(n) if i not in part)
        if np.all(dist[np.ix_(part, comp)] > gap):
            return Decomposition(part, comp)
    return None


def projections_disjoint(x: LatticePoint, y: LatticePoint, radius: int) -> tuple[bool, ...]:
    """Per particle ``j``: whether ``Pi_j Lambda_L(x)`` and ``Pi_j Lambda_L(y)`` are disjoint."""
    if (x.n_particles, x.dim) != (y.n_particles, y.dim):
        raise DomainError("points live in different configuration spaces")
    return tuple(
        sup_dist(x.project(j), y.project(j)) > 2 * (radius - 1)
        for j in range(x.n_particles)
    )
