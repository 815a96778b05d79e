"""Radial descent for (ell, q)-subharmonic functions and its Green-function corollaries.

A function ``f`` on a box is (ell, q, S)-subharmonic when

* at every regular point ``u`` (not in ``S``, with the whole sup-sphere of
  radius ``ell`` around ``u`` inside the domain),
  ``|f(u)| <= q * max_{||y-u|| = ell} |f(y)|``;
* at every ``u`` in ``S``, ``|f(u)| <= q * max_{ell <= ||y-u|| <= A*ell-1} |f(y)|``.

Iterating these contractions from the boundary inward bounds ``|f(center)|``
by a power of ``q`` times the sup of ``f``.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import DomainError, ResonantEnergyError
from .geometry import Box
from .green import (
    Classification,
    classify,
    gamma,
    green_column,
    is_cnr,
    nr_threshold,
    resonance_margin,
)
from .operator import DENSE_CAP, FiniteVolumeHamiltonian, restrict

__all__ = [
    "NO_SINGULAR",
    "BOUNDARY_ADJACENT",
    "INTERIOR",
    "SubharmonicInstance",
    "SubharmonicCheck",
    "DescentCheck",
    "NSVerdict",
    "verify_subharmonic",
    "descent_exponent",
    "descent_bound",
    "singular_case",
    "certified_exponent",
    "check_descent",
    "q_factors",
    "edge_pair_count",
    "ns_implication",
]

NO_SINGULAR = "no-singular"
BOUNDARY_ADJACENT = "boundary-adjacent"
INTERIOR = "interior"
UNSUPPORTED = "unsupported-geometry"

_RTOL = 1e-12


@dataclass(frozen=True, eq=False)
class SubharmonicInstance:
    """``f`` is given in the domain's row order (see ``Box.sites``)."""

    domain: Box
    f: np.ndarray
    ell: int
    q: float
    singular: np.ndarray = field(default_factory=lambda: np.empty((0, 1), dtype=np.int64))
    A: int = 4

    def __post_init__(self):
        f = np.asarray(self.f, dtype=float).ravel()
        if f.shape != (self.domain.size,):
            raise DomainError("f must have one value per domain site")
        if not np.all(np.isfinite(f)):
            raise DomainError("f must be bounded")
        S = np.asarray(self.singular, dtype=np.int64).reshape(-1, self.domain.ndim)
        if len(S) and not np.all(self.domain.contains(S)):
            raise DomainError("singular set must lie inside the domain")
        if self.ell < 1 or self.q <= 0 or self.A < 1:
            raise DomainError("need ell >= 1, q > 0, A >= 1")
        object.__setattr__(self, "f", f)
        object.__setattr__(self, "singular", S)

    @property
    def sup(self) -> float:
        return float(np.max(np.abs(self.f)))

    def singular_mask(self) -> np.ndarray:
        mask = np.zeros(self.domain.size, dtype=bool)
        if len(self.singular):
            mask[self.domain.index_of(self.singular)] = True
        return mask


def _shifts(D: int, lo: int, hi: int) -> np.ndarray:
    """Integer vectors with ``lo <= ||s||_inf <= hi``."""
    rng = range(-hi, hi + 1)
    out = [s for s in itertools.product(rng, repeat=D) if lo <= max(map(abs, s)) <= hi]
    return np.asarray(out, dtype=np.int64).reshape(-1, D)


def _shell_reduce(grid: np.ndarray, shifts: np.ndarray, fill: float, reduce) -> np.ndarray:
    """``reduce`` of ``grid[u + s]`` over ``s`` in ``shifts``; off-grid values read ``fill``."""
    pad = int(np.max(np.abs(shifts))) if len(shifts) else 0
    padded = np.pad(grid, pad, constant_values=fill)
    out = np.full(grid.shape, fill)
    for s in shifts:
        sl = tuple(slice(pad + k, pad + k + n) for k, n in zip(s, grid.shape))
        out = reduce(out, padded[sl])
    return out


def _neighbourhood_reduce(box: Box, values: np.ndarray, points: np.ndarray, lo: int, hi: int,
                          fill: float, reduce) -> np.ndarray:
    """Per point: ``reduce`` of ``values`` over domain sites at sup-distance in [lo, hi]."""
    sites = box.sites()
    out = np.full(len(points), fill)
    for i, p in enumerate(points):
        dist = np.max(np.abs(sites - p), axis=1)
        sel = (dist >= lo) & (dist <= hi)
        if sel.any():
            out[i] = reduce.reduce(values[sel])
    return out


@dataclass(frozen=True)
class SubharmonicCheck:
    passed: bool
    site: Optional[tuple[int, ...]] = None
    value: float = 0.0
    bound: float = 0.0

    def __bool__(self):
        return self.passed


def _regular_mask(box: Box, S_mask: np.ndarray, ell: int) -> np.ndarray:
    return (box.depth(box.sites()) >= ell) & ~S_mask


def verify_subharmonic(inst: SubharmonicInstance) -> SubharmonicCheck:
    """Check both contraction conditions; report the first violating site in row order."""
    box, ell, q = inst.domain, inst.ell, inst.q
    absf = np.abs(inst.f)
    S_mask = inst.singular_mask()
    ring = _shell_reduce(absf.reshape(box.shape), _shifts(box.ndim, ell, ell), 0.0, np.maximum)
    bound = q * ring.ravel()
    check = _regular_mask(box, S_mask, ell)
    if S_mask.any():
        S_idx = np.flatnonzero(S_mask)
        bound[S_idx] = q * _neighbourhood_reduce(
            box, absf, box.sites()[S_idx], ell, inst.A * ell - 1, 0.0, np.maximum)
        check |= S_mask
    bad = check & (absf > bound * (1 + _RTOL))
    if not bad.any():
        return SubharmonicCheck(True)
    k = int(np.flatnonzero(bad)[0])
    site = tuple(int(c) for c in box.sites()[k])
    return SubharmonicCheck(False, site, float(absf[k]), float(bound[k]))


def descent_exponent(L: int, ell: int, case: str = NO_SINGULAR, A: Optional[int] = None,
                     strict: bool = False) -> int:
    """Power of ``q`` in the radial-descent bound for each singular-set geometry.

    The formula itself only needs a non-negative exponent.  ``strict`` also
    enforces ``L > (A+3)*ell``, the box size under which the singular-case
    descent arguments apply; the checks that use the bound set it.
    """
    if not (ell >= 1 and L > ell):
        raise DomainError(f"need L > ell >= 1, got L={L}, ell={ell}")
    if case == NO_SINGULAR:
        return L // ell - 1
    if A is None or A < 1:
        raise DomainError("singular cases need a positive integer A")
    if strict and not L > (A + 3) * ell:
        raise DomainError(f"singular cases need L > (A+3)*ell = {(A + 3) * ell}")
    if case == BOUNDARY_ADJACENT:
        k = (L - A) // ell - 2
    elif case == INTERIOR:
        k = (L - A) // ell - 3
    else:
        raise DomainError(f"unknown descent case {case!r}")
    if k < 0:
        raise DomainError(f"L={L} is too small for the {case} bound with ell={ell}, A={A}")
    return k


def descent_bound(L: int, ell: int, q: float, case: str = NO_SINGULAR, A: Optional[int] = None) -> float:
    return q ** descent_exponent(L, ell, case, A)


def _pairwise_diameter(points: np.ndarray) -> int:
    if len(points) < 2:
        return 0
    return int(np.max(np.abs(points[:, None, :] - points[None, :, :])))


def singular_case(domain: Box, S, ell: int, A: int) -> tuple[str, Optional[int]]:
    """Which descent lemma a singular set falls under: ``(case, r)``.

    ``r`` is the annulus index of the interior case and ``None`` otherwise.
    Boundary-adjacent means ``S`` avoids the inner cube of radius
    ``L - (A+1)*ell`` (a collar of width ``(A+1)*ell``); interior means
    ``(r+2)*ell <= dist(S, boundary) < (r+3)*ell`` for some ``r >= 0``.
    """
    S = np.asarray(S, dtype=np.int64).reshape(-1, domain.ndim)
    if len(S) == 0:
        return NO_SINGULAR, None
    if _pairwise_diameter(S) > A * ell - 1:
        return UNSUPPORTED, None
    depth = domain.depth(S)
    if depth.max() <= (A + 1) * ell - 1:
        return BOUNDARY_ADJACENT, None
    r = int(depth.min()) // ell - 2
    if r >= 0:
        return INTERIOR, r
    return UNSUPPORTED, None


def certified_exponent(
    domain: Box,
    ell: int,
    regular: np.ndarray,
    singular: np.ndarray,
    reach: tuple[int, int],
    at=None,
) -> float:
    """Sharp q-exponent guaranteed at ``at`` (default: the center) by the contraction graph.

    ``regular`` and ``singular`` are boolean masks over the domain rows.
    Regular points contract onto the sup-sphere of radius ``ell``; singular
    points onto the shell ``reach[0] <= ||y-u|| <= reach[1]``; every other
    point is unconstrained.  The exponent is the graph distance from ``at``
    to the unconstrained set (``inf`` when no such path exists, in which
    case ``f(at) = 0``).  For ``q < 1`` it gives ``|f(at)| <= q^k sup|f|``,
    and there are functions attaining it, so it is the best possible bound
    from these hypotheses.
    """
    shape = domain.shape
    k = np.where(regular | singular, np.inf, 0.0)
    ring = _shifts(domain.ndim, ell, ell)
    S_idx = np.flatnonzero(singular)
    S_sites = domain.sites()[S_idx]
    while True:
        nb = _shell_reduce(k.reshape(shape), ring, np.inf, np.minimum).ravel()
        new = np.where(regular, np.minimum(k, nb + 1), k)
        if len(S_idx):
            nbs = _neighbourhood_reduce(domain, k, S_sites, reach[0], reach[1], np.inf, np.minimum)
            new[S_idx] = np.minimum(k[S_idx], nbs + 1)
        if np.array_equal(new, k):
            break
        k = new
    point = domain.center if at is None else tuple(at)
    return float(k[domain.index_of(point)[0]])


@dataclass(frozen=True)
class DescentCheck:
    case: str
    r: Optional[int]
    value: float
    bound: float
    holds: Optional[bool]
    exponent: Optional[int]
    certified: float

    @property
    def supported(self) -> bool:
        return self.case != UNSUPPORTED

    @property
    def formula_sound(self) -> Optional[bool]:
        """Whether the lemma exponent is at most the sharp one for this geometry."""
        if self.exponent is None:
            return None
        return self.exponent <= self.certified


def check_descent(inst: SubharmonicInstance) -> DescentCheck:
    """Compare ``|f(center)|`` with the lemma bound ``q^k * sup|f|`` for the instance's geometry."""
    box, ell = inst.domain, inst.ell
    S_mask = inst.singular_mask()
    case, r = singular_case(box, inst.singular, ell, inst.A)
    value = float(abs(inst.f[box.index_of([box.center])[0]]))
    cert = certified_exponent(
        box, ell, _regular_mask(box, S_mask, ell), S_mask, (ell, inst.A * ell - 1))
    if case == UNSUPPORTED:
        return DescentCheck(case, r, value, math.nan, None, None, cert)
    k = descent_exponent(box.radius, ell, case, None if case == NO_SINGULAR else inst.A, strict=True)
    bound = inst.q ** k * inst.sup
    return DescentCheck(case, r, value, bound, value <= bound * (1 + _RTOL), k, cert)


def q_factors(d: int, ell: int, L: int, m: float, beta: float) -> tuple[float, float]:
    """``(q_tilde, q)``: the regular and the singular-step contraction factors.

    ``d`` is the dimension of the configuration space (``N*d`` for
    ``N`` particles).
    """
    if min(d, ell, L) < 1 or not m > 0 or not 0 < beta < 1:
        raise DomainError("q_factors needs positive d, ell, L, m and beta in (0, 1)")
    decay = math.exp(-gamma(m, ell))
    q_tilde = 2 * d * ell ** (d - 1) * decay
    q = 4 * d * d * (12 * ell * ell) ** (d - 1) * math.exp(L ** beta) * decay
    assert q > q_tilde
    return q_tilde, q


def edge_pair_count(D: int, radius: int) -> int:
    """Number of boundary edge pairs of a cube in ``Z^D``: ``2D (2r-1)^(D-1)``."""
    return 2 * D * (2 * radius - 1) ** (D - 1)


@dataclass(frozen=True)
class NSVerdict:
    ns_implied: bool
    reason: Optional[str]
    case: Optional[str] = None
    singular_centers: tuple = ()
    q: float = math.nan
    exponent: Optional[float] = None
    bound: float = math.nan
    threshold: float = math.nan
    direct_lhs: float = math.nan
    direct_rhs: float = math.nan
    ambient: Optional[Classification] = None

    @property
    def direct_bound_holds(self) -> Optional[bool]:
        if math.isnan(self.direct_lhs):
            return None
        return self.direct_lhs <= self.direct_rhs * (1 + _RTOL)

    def to_json(self) -> dict:
        return {
            "verdict": "ns-implied" if self.ns_implied else "hypotheses-not-met",
            "reason": self.reason,
            "case": self.case,
            "singular_centers": [list(c) for c in self.singular_centers],
            "q": self.q,
            "exponent": self.exponent,
            "bound": self.bound,
            "threshold": self.threshold,
            "direct_lhs": self.direct_lhs,
            "direct_rhs": self.direct_rhs,
        }


# reasons reported when the deterministic implication cannot be drawn
REASONS = (
    "E-R",
    "not-CNR",
    "two-separated-singular",
    "q-not-small",
    "length-margin",
    "unsupported-geometry",
    "bound-insufficient",
)


def ns_implication(
    H: FiniteVolumeHamiltonian,
    E: float,
    m: float,
    beta: float,
    ell: int,
    A: int = 4,
    cnr_mode: str = "exhaustive",
    cap: int = DENSE_CAP,
) -> NSVerdict:
    """Decide whether the hypotheses on ``ell``-sub-boxes force ``H.box`` to be (E, m)-NS.

    Every ``ell``-sub-box is classified.  If the box is E-CNR and no two
    singular sub-boxes are disjoint, the radial-descent bound
    ``q^k * ||G_Lambda(E)||`` is computed with ``k`` the smaller of the
    lemma exponent and the certified graph exponent, and NS is implied when
    that bound is below ``exp(-gamma(m, L))``.
    """
    box = H.box
    L = box.radius
    D = box.ndim
    margin = resonance_margin(H, E, cap)
    if margin < nr_threshold(L, beta):
        return NSVerdict(False, "E-R")
    if not is_cnr(H, E, beta, ell, cnr_mode, cap):
        return NSVerdict(False, "not-CNR")
    col = green_column(H, E, cap=cap, margin=margin)
    norm = 1.0 / margin
    subs = box.subboxes(ell)
    singular = []
    for sub in subs:
        try:
            col_s = green_column(restrict(H, sub), E, cap=cap)
        except ResonantEnergyError:
            singular.append(sub)
            continue
        if col_s.boundary_max() > math.exp(-gamma(m, ell)):
            singular.append(sub)
    centers = tuple(s.center for s in singular)
    for a, b in itertools.combinations(singular, 2):
        if not a.overlaps(b):
            return NSVerdict(False, "two-separated-singular", singular_centers=centers)
    _, q_count = q_factors(D, ell, L, m, beta)
    # the closed-form counting constant undercounts edge pairs for D >= 2
    q_exact = (edge_pair_count(D, (A + 1) * ell) * edge_pair_count(D, ell)
               * math.exp(((A + 1) * ell) ** beta - gamma(m, ell)))
    q = max(q_count, q_exact)
    bmax = col.boundary_max()
    direct = (bmax, q_count ** (L // ell) * norm) if not singular else (math.nan, math.nan)
    common = dict(singular_centers=centers, q=q, threshold=math.exp(-gamma(m, L)),
                  direct_lhs=direct[0], direct_rhs=direct[1])
    S = np.asarray(centers, dtype=np.int64).reshape(-1, D)
    case, _ = singular_case(box, S, ell, A)
    if case == UNSUPPORTED:
        return NSVerdict(False, "unsupported-geometry", case=case, **common)
    try:
        k_lemma = descent_exponent(L, ell, case, None if case == NO_SINGULAR else A, strict=True)
    except DomainError:
        return NSVerdict(False, "length-margin", case=case, **common)
    if q >= 1:
        return NSVerdict(False, "q-not-small", case=case, **common)
    sites = box.sites()
    depth = box.depth(sites)
    S_mask = np.zeros(box.size, dtype=bool)
    if len(S):
        S_mask[box.index_of(S)] = True
    regular = (depth >= ell) & ~S_mask
    sing_active = S_mask & (depth >= (A + 2) * ell)
    k_cert = certified_exponent(box, ell, regular, sing_active, (A * ell, (A + 2) * ell))
    k = min(float(k_lemma), k_cert)
    # compared in log space: both sides underflow at strong disorder
    log_bound = k * math.log(q) + math.log(norm)
    bound = math.exp(log_bound)
    verdict = log_bound <= -gamma(m, L)
    return NSVerdict(verdict, None if verdict else "bound-insufficient", case=case,
                     exponent=k, bound=bound, **common)
