"""Fixed-energy Green functions and box classification."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
import scipy.linalg
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import ContainmentError, DomainError, ResonantEnergyError, ResonantInnerError
from .geometry import Box, boundary_arrays
from .operator import DENSE_CAP, FiniteVolumeHamiltonian, restrict

__all__ = [
    "GreenColumn",
    "Classification",
    "GRIResult",
    "RESONANCE_TOL",
    "gamma",
    "nr_threshold",
    "min_cnr_radius",
    "resonance_margin",
    "green_column",
    "classify",
    "is_cnr",
    "gri_check",
    "effective_mass",
]

RESONANCE_TOL = 1e-12


def gamma(m: float, L: int) -> float:
    """Scale function ``m (L + L^{3/4})``."""
    if not m > 0 or L < 1:
        raise DomainError("gamma needs m > 0 and L >= 1")
    return m * (L + L ** 0.75)


def nr_threshold(L: int, beta: float) -> float:
    """Smallest distance to the spectrum that keeps a radius-``L`` box E-NR."""
    return math.exp(-(L ** beta))


def min_cnr_radius(ell: int) -> int:
    """Smallest radius whose sup-diameter ``2(r-1)`` is at least ``3*ell``."""
    return -(-3 * ell // 2) + 1


def resonance_margin(H: FiniteVolumeHamiltonian, E: float, cap: int = DENSE_CAP) -> float:
    """``dist(E, spectrum(H))``.

    Exact (dense eigenvalues) up to ``cap`` sites; above it, the eigenvalue
    nearest to ``E`` is located by shift-invert Lanczos.
    """
    if H.size <= cap:
        ev = scipy.linalg.eigvalsh(H.dense())
        return float(np.min(np.abs(ev - E)))
    try:
        ev = spla.eigsh(H.matrix.tocsc(), k=1, sigma=E, which="LM", return_eigenvectors=False)
    except RuntimeError:  # exactly singular shift
        return 0.0
    return float(np.min(np.abs(ev - E)))


@dataclass(frozen=True)
class GreenColumn:
    """``G(u, . ; E)`` for the box center ``u``, in the box's row order."""

    box: Box
    energy: float
    values: np.ndarray
    norm_estimate: float
    resonance_margin: float
    residual: float

    @property
    def source(self) -> tuple[int, ...]:
        return self.box.center

    def at(self, points) -> np.ndarray:
        idx = self.box.index_of(points)
        if np.any(idx < 0):
            raise DomainError("point outside the box")
        return self.values[idx]

    def boundary_max(self) -> float:
        sites = self.box.sites()
        return float(np.max(np.abs(self.values[self.box.depth(sites) == 0])))


def _solve(H: FiniteVolumeHamiltonian, E: float, rhs: np.ndarray) -> np.ndarray:
    A = (H.matrix - E * sp.identity(H.size, format="csr")).tocsc()
    x = spla.spsolve(A, rhs)
    return np.asarray(x, dtype=float).reshape(rhs.shape)


def green_column(
    H: FiniteVolumeHamiltonian,
    E: float,
    source=None,
    cap: int = DENSE_CAP,
    margin: Optional[float] = None,
) -> GreenColumn:
    """Solve ``(H - E) g = delta_source`` (default source: the box center).

    Raises ``ResonantEnergyError`` when ``E`` is within ``RESONANCE_TOL`` of
    the spectrum.
    """
    if margin is None:
        margin = resonance_margin(H, E, cap)
    if margin <= RESONANCE_TOL:
        raise ResonantEnergyError(margin)
    src = H.box.center if source is None else tuple(source)
    k = int(H.box.index_of(src)[0])
    if k < 0:
        raise DomainError(f"source {src} outside {H.box!r}")
    rhs = np.zeros(H.size)
    rhs[k] = 1.0
    values = _solve(H, E, rhs)
    norm = 1.0 / margin
    residual = float(np.max(np.abs(H.matrix @ values - E * values - rhs)))
    return GreenColumn(H.box, float(E), values, norm, float(margin), residual)


def is_cnr(
    H: FiniteVolumeHamiltonian,
    E: float,
    beta: float,
    ell: int,
    mode: str = "exhaustive",
    cap: int = DENSE_CAP,
) -> bool:
    """Whether every sub-cube of sup-diameter ``>= 3*ell`` is E-NR.

    ``mode="stride"`` checks only centers on a sublattice of stride ``ell``
    (a cheaper approximation); ``"exhaustive"`` checks every center.
    """
    if mode not in ("exhaustive", "stride"):
        raise DomainError(f"unknown CNR scan mode {mode!r}")
    stride = ell if mode == "stride" else 1
    for r in range(min_cnr_radius(ell), H.box.radius + 1):
        for sub in H.box.subboxes(r, stride=stride):
            margin = resonance_margin(restrict(H, sub), E, cap)
            if margin < nr_threshold(r, beta):
                return False
    return True


@dataclass(frozen=True)
class Classification:
    ns: bool
    nr: bool
    cnr: bool
    m: float
    beta: float
    gamma_value: float
    boundary_max: float
    margin: float

    @property
    def norm(self) -> float:
        return math.inf if self.margin == 0 else 1.0 / self.margin

    def to_json(self) -> dict:
        return {
            "ns": self.ns,
            "nr": self.nr,
            "cnr": self.cnr,
            "m": self.m,
            "beta": self.beta,
            "gamma": self.gamma_value,
            "boundary_max": self.boundary_max,
            "margin": self.margin,
        }


def classify(
    H: FiniteVolumeHamiltonian,
    E: float,
    m: float,
    beta: float = 0.5,
    cnr_scan_radius: Optional[int] = None,
    cnr_mode: str = "exhaustive",
    cap: int = DENSE_CAP,
) -> Classification:
    """Non-singularity, non-resonance and complete non-resonance of ``H.box``.

    ``cnr_scan_radius=None`` skips the sub-cube scan and reports ``cnr=False``.
    """
    if not 0 < beta < 1:
        raise DomainError("beta must lie in (0, 1)")
    L = H.box.radius
    gam = gamma(m, L)
    margin = resonance_margin(H, E, cap)
    try:
        col = green_column(H, E, cap=cap, margin=margin)
    except ResonantEnergyError:
        return Classification(False, False, False, m, beta, gam, math.inf, margin)
    bmax = col.boundary_max()
    ns = bmax <= math.exp(-gam)
    nr = margin >= nr_threshold(L, beta)
    cnr = False
    if nr and cnr_scan_radius is not None:
        cnr = is_cnr(H, E, beta, cnr_scan_radius, cnr_mode, cap)
    return Classification(ns, nr, cnr, m, beta, gam, bmax, margin)


def effective_mass(H: FiniteVolumeHamiltonian, E: float, cap: int = DENSE_CAP) -> float:
    """Largest mass at which ``H.box`` is non-singular: ``-log(max_bdry |G|) / (L + L^{3/4})``."""
    bmax = green_column(H, E, cap=cap).boundary_max()
    L = H.box.radius
    if bmax == 0.0:
        return math.inf
    return -math.log(bmax) / (L + L ** 0.75)


@dataclass(frozen=True)
class GRIResult:
    lhs: float
    rhs: float
    residual: float
    relative_residual: float
    inequality_bound: float
    slack: float
    n_edge_pairs: int


def gri_check(
    H: FiniteVolumeHamiltonian,
    inner: Box,
    E: float,
    target,
    cap: int = DENSE_CAP,
) -> GRIResult:
    """Compare ``G(u,y)`` with ``sum_{(x,x')} G_inner(u,x) G(x',y)`` through the inner box boundary.

    ``u`` is the center of ``inner``; ``target`` is ``y``, a site of the
    ambient box outside ``inner``.  Also returns the slack of the
    corresponding sup-bound (right side minus ``|G(u,y)|``).
    """
    ambient = H.box
    if not inner.is_subbox_of(ambient) or inner == ambient:
        raise ContainmentError(f"{inner!r} is not strictly inside {ambient!r}")
    y = tuple(int(c) for c in target)
    if y in inner or y not in ambient:
        raise DomainError("target must lie in the ambient box but outside the inner box")
    H_in = restrict(H, inner)
    try:
        g_in = green_column(H_in, E, cap=cap)
    except ResonantEnergyError as exc:
        raise ResonantInnerError(exc.margin) from None
    g_y = green_column(H, E, source=y, cap=cap)  # G(., y) = G(y, .) by symmetry
    _, outer, pin, pout = boundary_arrays(inner, ambient)
    terms = g_in.at(pin) * g_y.at(pout)
    lhs = float(g_y.at([inner.center])[0])
    rhs = float(np.sum(terms))
    residual = abs(lhs - rhs)
    scale = max(abs(lhs), float(np.sum(np.abs(terms))), np.finfo(float).tiny)
    sites_in = inner.sites()
    inner_max = float(np.max(np.abs(g_in.values[inner.depth(sites_in) == 0])))
    outer_max = float(np.max(np.abs(g_y.at(outer)))) if len(outer) else 0.0
    bound = inner_max * len(outer) * outer_max
    return GRIResult(lhs, rhs, residual, residual / scale, bound, bound - abs(lhs), len(pin))
