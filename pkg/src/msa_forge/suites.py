"""Seeded randomized suites shared by the CLI ``verify-*`` commands and the tests."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .descent import (
    BOUNDARY_ADJACENT,
    INTERIOR,
    NO_SINGULAR,
    SubharmonicInstance,
    _neighbourhood_reduce,
    _regular_mask,
    _shell_reduce,
    _shifts,
    check_descent,
    singular_case,
    verify_subharmonic,
)
from .disorder import DEFAULT_DISTRIBUTION, sample
from .errors import ResonantEnergyError
from .geometry import Box, box_diagonal_distance, projections_disjoint
from .green import gri_check, resonance_margin
from .harness import tensor_spectrum_check, trial_seed
from .operator import assemble

__all__ = [
    "GRISuiteResult",
    "DescentSuiteResult",
    "TensorSuiteResult",
    "gri_suite",
    "descent_suite",
    "tensor_suite",
    "subharmonic_repair",
    "lemma_b_counterexamples",
]


@dataclass(frozen=True)
class GRISuiteResult:
    instances: int
    max_relative_residual: float
    min_slack: float
    tolerance: float

    @property
    def passed(self) -> bool:
        # the inequality can be tight up to rounding
        return self.max_relative_residual <= self.tolerance and self.min_slack >= -self.tolerance

    def to_json(self) -> dict:
        return {"instances": self.instances, "max_relative_residual": self.max_relative_residual,
                "min_slack": self.min_slack, "tolerance": self.tolerance, "pass": self.passed}


def gri_suite(instances: int = 100, seed: int = 0, tolerance: float = 1e-10) -> GRISuiteResult:
    """Resolvent-identity residuals on random boxes: d in {1,2}, inner radius 2-3, ambient 5-8."""
    rng = np.random.default_rng(seed)
    worst, slack, done = 0.0, math.inf, 0
    while done < instances:
        d = int(rng.integers(1, 3))
        L = int(rng.integers(5, 9))
        ell = int(rng.integers(2, 4))
        g = float(rng.choice([0.0, 2.0, 5.0]))
        ambient = Box((0,) * d, L)
        reach = L - ell
        inner = Box(tuple(int(c) for c in rng.integers(-reach, reach + 1, size=d)), ell)
        outside = ambient.sites()[~inner.contains(ambient.sites())]
        y = outside[int(rng.integers(len(outside)))]
        pot = sample(DEFAULT_DISTRIBUTION, trial_seed(seed, done), ambient.support())
        H = assemble(ambient, g, pot)
        E = float(rng.uniform(-2 * d - g, 2 * d + g))
        if resonance_margin(H, E) < 1e-6:
            continue
        try:
            res = gri_check(H, inner, E, y)
        except ResonantEnergyError:
            continue
        worst = max(worst, res.relative_residual)
        slack = min(slack, res.slack)
        done += 1
    return GRISuiteResult(instances, worst, slack, tolerance)


def subharmonic_repair(domain: Box, f0: np.ndarray, ell: int, q: float, S_mask: np.ndarray,
                       A: int) -> np.ndarray:
    """Largest function below ``f0`` satisfying both contraction conditions."""
    f = np.abs(np.asarray(f0, dtype=float)).copy()
    regular = _regular_mask(domain, S_mask, ell)
    ring = _shifts(domain.ndim, ell, ell)
    S_idx = np.flatnonzero(S_mask)
    S_sites = domain.sites()[S_idx]
    while True:
        cap = q * _shell_reduce(f.reshape(domain.shape), ring, 0.0, np.maximum).ravel()
        new = np.where(regular, np.minimum(f, cap), f)
        if len(S_idx):
            near = _neighbourhood_reduce(domain, f, S_sites, ell, A * ell - 1, 0.0, np.maximum)
            new[S_idx] = np.minimum(f[S_idx], q * near)
        if np.array_equal(new, f):
            return f
        f = new


@dataclass(frozen=True)
class DescentSuiteResult:
    instances: int
    by_case: dict
    violations: int
    rejected: int
    formula_unsound: int

    @property
    def passed(self) -> bool:
        return self.violations == 0

    def to_json(self) -> dict:
        return {"instances": self.instances, "by_case": dict(self.by_case),
                "violations": self.violations, "rejected": self.rejected,
                "formula_unsound": self.formula_unsound, "pass": self.passed}


def _random_interval(rng, lo: int, hi: int, max_len: int) -> np.ndarray:
    a = int(rng.integers(lo, hi + 1))
    b = min(hi, a + int(rng.integers(0, max_len)))
    return np.arange(a, b + 1)[:, None]


def _descent_geometry(rng, case: str, A: int):
    """Random (domain, ell, S) for one lemma case, inside the range where its exponent is sharp-valid."""
    if case == NO_SINGULAR:
        if rng.random() < 0.25:
            ell = int(rng.integers(1, 4))
            L = int(rng.integers(ell + 1, 13))
            return Box((0, 0), L), ell, np.empty((0, 2), dtype=np.int64)
        ell = int(rng.integers(1, 9))
        L = int(rng.integers(ell + 1, 41))
        return Box((0,), L), ell, np.empty((0, 1), dtype=np.int64)
    if case == BOUNDARY_ADJACENT:
        ell = int(rng.integers(1, A + 1))
        L = (A + 3) * ell + int(rng.integers(1, 2 * ell + 2))
        collar = (A + 1) * ell - 1
        side = 1 if rng.random() < 0.5 else -1
        S = _random_interval(rng, L - 1 - collar, L - 1, A * ell)
        return Box((0,), L), ell, side * S
    ell = 1
    L = int(rng.integers(A + 4, 25))
    S = _random_interval(rng, -(L - 1 - 2 * ell), L - 1 - 2 * ell, A * ell)
    return Box((0,), L), ell, S


def descent_suite(instances: int = 500, seed: int = 0, A: int = 4) -> DescentSuiteResult:
    """Randomized radial-descent instances, balanced over the three lemma cases.

    Each instance starts from random magnitudes and is pushed down to the
    largest subharmonic function below them, which is close to the extremal
    case of the bound.  Instances failing ``verify_subharmonic`` or whose
    singular set lands outside the intended case are rejected and redrawn.
    """
    rng = np.random.default_rng(seed)
    cases = (NO_SINGULAR, BOUNDARY_ADJACENT, INTERIOR)
    by_case = {c: 0 for c in cases}
    violations = rejected = unsound = 0
    i = 0
    while sum(by_case.values()) < instances:
        want = cases[i % 3]
        i += 1
        box, ell, S = _descent_geometry(rng, want, A)
        if singular_case(box, S, ell, A)[0] != want:
            rejected += 1
            continue
        q = float(rng.uniform(0.05, 0.95))
        S_mask = np.zeros(box.size, dtype=bool)
        if len(S):
            S_mask[box.index_of(S)] = True
        f0 = rng.random(box.size) ** 2
        f = subharmonic_repair(box, f0, ell, q, S_mask, A)
        inst = SubharmonicInstance(box, f, ell, q, S, A)
        if not verify_subharmonic(inst) or inst.sup == 0:
            rejected += 1
            continue
        res = check_descent(inst)
        by_case[want] += 1
        violations += not res.holds
        unsound += not res.formula_sound
    return DescentSuiteResult(instances, by_case, violations, rejected, unsound)


@dataclass(frozen=True)
class TensorSuiteResult:
    fixtures: int
    max_deviation: float
    max_kron_residual: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return self.max_deviation <= self.tolerance and self.max_kron_residual == 0.0

    def to_json(self) -> dict:
        return {"fixtures": self.fixtures, "max_deviation": self.max_deviation,
                "max_kron_residual": self.max_kron_residual, "tolerance": self.tolerance,
                "pass": self.passed}


def tensor_suite(fixtures: int = 50, seed: int = 0, tolerance: float = 1e-9) -> TensorSuiteResult:
    """Non-interacting two-particle boxes in d=1 with factor radii up to 4."""
    rng = np.random.default_rng(seed)
    dev = kron = 0.0
    for t in range(fixtures):
        L = int(rng.integers(1, 5))
        a, b = (int(v) for v in rng.integers(-20, 21, size=2))
        g = float(rng.choice([0.0, 1.0, 5.0, 10.0]))
        left, right = Box((a,), L), Box((b,), L)
        region = np.unique(np.vstack([left.support(), right.support()]), axis=0)
        pot = sample(DEFAULT_DISTRIBUTION, trial_seed(seed, t), region)
        res = tensor_spectrum_check(left, right, g, pot)
        dev = max(dev, res.max_deviation)
        kron = max(kron, res.kron_residual)
    return TensorSuiteResult(fixtures, dev, kron, tolerance)


def lemma_b_counterexamples(L: int, B: int, window: Optional[int] = None) -> tuple[int, int]:
    """Exhaustive two-particle, d=1 check on ``[-window, window]^2``.

    Returns ``(pairs_checked, counterexamples)`` over pairs of boxes
    ``Lambda_L(x)``, ``Lambda_L(y)`` that both lie within ``B*L`` of the
    diagonal and satisfy ``||x - y|| > (4B+6) L``; a counterexample is a pair
    whose projections overlap for some particle.  The default window is
    just wide enough for separated pairs to exist.
    """
    if window is None:
        window = (4 * B + 6) * L // 2 + 2 * L + 1
    axis = range(-window, window + 1)
    near = [Box((i, j), L, 2) for i in axis for j in axis]
    near = [b for b in near if box_diagonal_distance(b) < B * L]
    if not near:
        return 0, 0
    centers = np.array([b.center for b in near])
    sep = (4 * B + 6) * L
    checked = bad = 0
    for k, x in enumerate(near):
        far = np.flatnonzero(np.max(np.abs(centers - centers[k]), axis=1) > sep)
        for j in far:
            checked += 1
            bad += not all(projections_disjoint(x.center_point, near[j].center_point, L))
    return checked, bad
