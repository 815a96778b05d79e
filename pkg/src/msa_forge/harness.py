"""Monte-Carlo layer: scale schedules, singularity and Wegner estimates,
the scale-induction step and multi-particle diagnostics.

Every trial draws its own disorder from ``trial_seed(base_seed, t)`` so that
results do not depend on how trials are distributed over threads.
"""
from __future__ import annotations

import hashlib
import itertools
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from math import isqrt
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.stats import binomtest

from .disorder import DEFAULT_DISTRIBUTION, DisorderSample, MarginalDistribution, sample
from .errors import CapacityError, DomainError, InteractionNonzeroError, ScheduleError
from .geometry import (
    Box,
    box_diagonal_distance,
    decomposition_threshold,
    projections_disjoint,
    sup_dist,
)
from .green import classify, gamma, resonance_margin
from .operator import DENSE_CAP, InteractionSpec, assemble, spectrum

__all__ = [
    "Model",
    "ScaleSchedule",
    "MassSequence",
    "ScaleReport",
    "WegnerReport",
    "InductionStep",
    "InductionReport",
    "MPEventLog",
    "TensorCheck",
    "trial_seed",
    "wilson_interval",
    "default_threads",
    "schedule",
    "estimate_ss",
    "single_site_probability",
    "wegner_estimate",
    "verify_induction",
    "mp_step_events",
    "tensor_spectrum_check",
]

SCHEMA_VERSION = 1


def trial_seed(base_seed: int, t: int) -> int:
    """Stable 64-bit seed for trial ``t``: BLAKE2b-64 of ``"<base_seed>:<t>"``."""
    digest = hashlib.blake2b(f"{int(base_seed)}:{int(t)}".encode(), digest_size=8).digest()
    return int.from_bytes(digest, "little")


def default_threads() -> int:
    env = os.environ.get("MSA_FORGE_THREADS")
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


def _map_trials(fn: Callable[[int], object], trials: int, threads: Optional[int]) -> list:
    threads = default_threads() if threads is None else max(1, int(threads))
    if threads == 1 or trials <= 1:
        return [fn(t) for t in range(trials)]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, range(trials)))


def wilson_interval(successes: int, trials: int, confidence: float = 0.95) -> tuple[float, float]:
    if trials == 0:
        return math.nan, math.nan
    ci = binomtest(successes, trials).proportion_ci(confidence_level=confidence, method="wilson")
    return float(ci.low), float(ci.high)


@dataclass(frozen=True)
class Model:
    d: int = 1
    N: int = 1
    g: float = 10.0
    distribution: MarginalDistribution = DEFAULT_DISTRIBUTION
    interaction: Optional[InteractionSpec] = None

    def __post_init__(self):
        if self.d < 1 or self.N < 1:
            raise DomainError("d and N must be positive")

    def box(self, L: int, center: Optional[Sequence[int]] = None) -> Box:
        c = (0,) * (self.N * self.d) if center is None else tuple(center)
        return Box(c, L, self.N)

    def hamiltonian(self, box: Box, seed: int):
        potential = sample(self.distribution, seed, box.support())
        return assemble(box, self.g, potential, self.interaction)


@dataclass(frozen=True)
class ScaleSchedule:
    L0: int
    k_max: int
    scales: tuple[int, ...]


def schedule(L0: int, k_max: int) -> ScaleSchedule:
    """``L_{k+1} = floor(L_k^{3/2})`` for ``k < k_max``."""
    if k_max < 0:
        raise DomainError("k_max must be non-negative")
    scales = [int(L0)]
    for _ in range(k_max):
        nxt = isqrt(scales[-1] ** 3)
        if nxt <= scales[-1]:
            raise ScheduleError(f"schedule from L0={L0} stalls at {scales[-1]}")
        scales.append(nxt)
    if k_max == 0 and isqrt(L0 ** 3) <= L0:
        raise ScheduleError(f"schedule from L0={L0} is not increasing")
    return ScaleSchedule(int(L0), int(k_max), tuple(scales))


@dataclass(frozen=True)
class MassSequence:
    """Decay exponents ``m^(n) = m1 - (n-1) * L0^{-1/8}``, ``n = 1..N``."""

    m1: float
    L0: int
    N: int

    def __post_init__(self):
        if self.values[-1] <= 0:
            raise DomainError(
                f"m^({self.N}) = {self.values[-1]:.4g} <= 0; increase m1 or L0")

    @property
    def values(self) -> tuple[float, ...]:
        step = self.L0 ** (-1 / 8)
        return tuple(self.m1 - n * step for n in range(self.N))

    def __getitem__(self, n: int) -> float:
        """Mass for ``n`` particles (1-based)."""
        if not 1 <= n <= self.N:
            raise IndexError(n)
        return self.values[n - 1]


@dataclass(frozen=True)
class TrialRecord:
    t: int
    seed: int
    ns: bool
    nr: bool
    cnr: bool
    margin: float
    boundary_max: float


@dataclass(frozen=True)
class ScaleReport:
    L: int
    E: float
    m: float
    trials: int
    singular_count: int
    resonant_count: int
    cnr_fail_count: int
    p_hat: Optional[float]
    ci_lo: Optional[float]
    ci_hi: Optional[float]
    p: float
    bound: float
    bound_pass: Optional[bool]
    d: int = 1
    N: int = 1
    g: float = 0.0
    base_seed: int = 0
    cnr_scan_radius: int = 1

    @property
    def defined(self) -> bool:
        return self.trials > 0

    def to_json(self) -> dict:
        return {
            "L": self.L, "E": self.E, "m": self.m, "d": self.d, "N": self.N, "g": self.g,
            "trials": self.trials, "base_seed": self.base_seed,
            "cnr_scan_radius": self.cnr_scan_radius,
            "singular_count": self.singular_count, "resonant_count": self.resonant_count,
            "cnr_fail_count": self.cnr_fail_count, "p_hat": self.p_hat,
            "p_hat_defined": self.defined, "ci_lo": self.ci_lo, "ci_hi": self.ci_hi,
            "p": self.p, "bound": self.bound, "pass": self.bound_pass,
        }

    def csv_row(self) -> dict:
        return {
            "L": self.L, "E": self.E, "m": self.m, "trials": self.trials,
            "singular": self.singular_count, "resonant": self.resonant_count,
            "p_hat": self.p_hat, "ci_lo": self.ci_lo, "ci_hi": self.ci_hi,
            "bound": self.bound, "pass": self.bound_pass,
        }


def _default_scan_radius(L: int) -> int:
    return max(1, int(math.floor(L ** (2 / 3) + 1e-12)))


def _check_budget(n_sites: int, max_sites: int):
    if n_sites > max_sites:
        raise CapacityError(f"box of {n_sites} sites exceeds the solve budget of {max_sites}")


def _aggregate(records, model, E, m, L, p, base_seed, scan) -> ScaleReport:
    n = len(records)
    sing = sum(not r.ns for r in records)
    res = sum(not r.nr for r in records)
    cnr_fail = sum(not r.cnr for r in records)
    bound = float(L) ** (-p)
    if n == 0:
        return ScaleReport(L, E, m, 0, 0, 0, 0, None, None, None, p, bound, None,
                           model.d, model.N, model.g, base_seed, scan)
    lo, hi = wilson_interval(sing, n)
    return ScaleReport(L, float(E), float(m), n, sing, res, cnr_fail, sing / n, lo, hi, float(p),
                       bound, hi <= bound, model.d, model.N, float(model.g), int(base_seed), scan)


def _ss_trials(model, E, m, L, trials, base_seed, beta, scan, cnr_mode, threads, max_sites,
               extra: Optional[Callable] = None):
    box = model.box(L)
    _check_budget(box.size, max_sites)

    def run(t):
        seed = trial_seed(base_seed, t)
        H = model.hamiltonian(box, seed)
        c = classify(H, E, m, beta, scan, cnr_mode, cap=max_sites)
        rec = TrialRecord(t, seed, c.ns, c.nr, c.cnr, c.margin, c.boundary_max)
        return (rec, extra(H, c)) if extra is not None else (rec, None)

    return _map_trials(run, trials, threads)


def estimate_ss(
    model: Model,
    E: float,
    m: float,
    L: int,
    trials: int,
    base_seed: int,
    beta: float = 0.5,
    p: float = 2.0,
    cnr_scan_radius: Optional[int] = None,
    cnr_mode: str = "exhaustive",
    threads: Optional[int] = None,
    max_sites: int = DENSE_CAP,
) -> ScaleReport:
    """Estimate ``P{Lambda_L(0) is (E, m)-singular}`` from ``trials`` disorder draws."""
    scan = _default_scan_radius(L) if cnr_scan_radius is None else int(cnr_scan_radius)
    out = _ss_trials(model, E, m, L, trials, base_seed, beta, scan, cnr_mode, threads, max_sites)
    return _aggregate([r for r, _ in out], model, E, m, L, p, base_seed, scan)


def single_site_probability(distribution: MarginalDistribution, g: float, E: float, eps: float) -> float:
    """Exact ``P{|g V - E| <= eps}`` for a single site."""
    if g == 0:
        return 1.0 if abs(E) <= eps else 0.0
    lo, hi = sorted(((E - eps) / g, (E + eps) / g))
    return float(distribution.cdf(hi) - distribution.cdf(lo))


@dataclass(frozen=True)
class WegnerReport:
    L: int
    sites: int
    E: float
    epsilon: float
    trials: int
    count: int
    p_hat: Optional[float]
    ci_lo: Optional[float]
    ci_hi: Optional[float]
    wegner_bound: float
    wegner_pass: Optional[bool]
    exp_threshold: float
    exp_count: int
    exp_p_hat: Optional[float]
    exp_bound: float
    beta: float
    beta_prime: float

    def to_json(self) -> dict:
        return {
            "L": self.L, "sites": self.sites, "E": self.E, "epsilon": self.epsilon,
            "trials": self.trials, "count": self.count, "p_hat": self.p_hat,
            "ci_lo": self.ci_lo, "ci_hi": self.ci_hi, "wegner_bound": self.wegner_bound,
            "wegner_pass": self.wegner_pass, "exp_threshold": self.exp_threshold,
            "exp_count": self.exp_count, "exp_p_hat": self.exp_p_hat,
            "exp_bound": self.exp_bound, "beta": self.beta, "beta_prime": self.beta_prime,
        }


def wegner_estimate(
    model: Model,
    E: float,
    L: int,
    epsilon: float,
    trials: int,
    base_seed: int,
    beta: float = 0.5,
    beta_prime: float = 0.5,
    threads: Optional[int] = None,
    max_sites: int = DENSE_CAP,
) -> WegnerReport:
    """Empirical ``P{dist(E, spectrum(H_Lambda)) <= epsilon}``.

    Compared with the Wegner form ``|Lambda| * C * (2 eps / |g|)^b`` (``C``, ``b``
    the Hölder constants of the marginal) and, at threshold
    ``exp(-|Lambda|^beta)``, with ``exp(-|Lambda|^beta')``.
    """
    if epsilon < 0:
        raise DomainError("epsilon must be non-negative")
    box = model.box(L)
    _check_budget(box.size, max_sites)

    def run(t):
        H = model.hamiltonian(box, trial_seed(base_seed, t))
        return resonance_margin(H, E, max_sites)

    margins = np.asarray(_map_trials(run, trials, threads), dtype=float)
    n = box.size
    dist = model.distribution
    if model.g == 0:
        wb = 1.0
    else:
        wb = min(1.0, n * dist.holder_constant * (2 * epsilon / abs(model.g)) ** dist.holder_exponent)
    exp_thr = math.exp(-(n ** beta))
    exp_bound = math.exp(-(n ** beta_prime))
    count = int(np.sum(margins <= epsilon)) if epsilon > 0 else 0
    exp_count = int(np.sum(margins <= exp_thr))
    if trials == 0:
        return WegnerReport(L, n, E, epsilon, 0, 0, None, None, None, wb, None, exp_thr, 0, None,
                            exp_bound, beta, beta_prime)
    lo, hi = wilson_interval(count, trials)
    return WegnerReport(L, n, float(E), float(epsilon), trials, count, count / trials, lo, hi, wb,
                        lo <= wb, exp_thr, exp_count, exp_count / trials, exp_bound, beta, beta_prime)


@dataclass(frozen=True)
class DichotomyRecord:
    t: int
    singular: bool
    not_cnr: bool
    two_separated_singular: bool

    @property
    def unexplained(self) -> bool:
        return self.singular and not self.not_cnr and not self.two_separated_singular


@dataclass(frozen=True)
class InductionStep:
    k: int
    L_small: int
    L_big: int
    premise: Optional[bool]
    conclusion: Optional[bool]
    passed: Optional[bool]
    status: str
    flags: tuple[str, ...]
    not_cnr_count: int
    two_singular_count: int
    unexplained_count: int

    def to_json(self) -> dict:
        return {
            "k": self.k, "L_small": self.L_small, "L_big": self.L_big,
            "premise": self.premise, "conclusion": self.conclusion, "pass": self.passed,
            "status": self.status, "flags": list(self.flags),
            "not_cnr_count": self.not_cnr_count, "two_singular_count": self.two_singular_count,
            "unexplained_count": self.unexplained_count,
        }


@dataclass(frozen=True)
class InductionReport:
    scales: tuple[int, ...]
    reports: tuple[ScaleReport, ...]
    steps: tuple[InductionStep, ...]

    @property
    def passed(self) -> bool:
        return all(s.passed is not False for s in self.steps)

    def to_json(self) -> dict:
        return {
            "schema": SCHEMA_VERSION,
            "scales": list(self.scales),
            "reports": [r.to_json() for r in self.reports],
            "steps": [s.to_json() for s in self.steps],
        }


def _singular_subboxes(H, E, m, ell, cap):
    from .green import green_column
    from .operator import restrict
    from .errors import ResonantEnergyError

    out = []
    thr = math.exp(-gamma(m, ell))
    for sub in H.box.subboxes(ell):
        try:
            col = green_column(restrict(H, sub), E, cap=cap)
        except ResonantEnergyError:
            out.append(sub)
            continue
        if col.boundary_max() > thr:
            out.append(sub)
    return out


def verify_induction(
    model: Model,
    E: float,
    m: float,
    L0: int,
    k_max: int = 1,
    trials: int = 500,
    base_seed: int = 0,
    beta: float = 0.5,
    p: float = 2.0,
    cnr_mode: str = "exhaustive",
    threads: Optional[int] = None,
    max_sites: int = DENSE_CAP,
) -> InductionReport:
    """Estimate the singularity probability on consecutive scales and test the induction step.

    At each larger scale the complete-non-resonance scan uses the previous
    scale as ``ell`` and every trial records which events of the one-step
    dichotomy occurred: not E-CNR, or two disjoint singular sub-boxes of the
    previous scale.
    """
    sched = schedule(L0, k_max)
    fitting = [L for L in sched.scales if model.box(L).size <= max_sites]
    if len(fitting) < 2:
        raise CapacityError("fewer than two scales fit the solve budget")
    reports, dichotomies = [], []
    for i, L in enumerate(fitting):
        scan = fitting[i - 1] if i > 0 else _default_scan_radius(L)
        extra = None
        if i > 0:
            ell = fitting[i - 1]

            def extra(H, c, ell=ell):
                sing = _singular_subboxes(H, E, m, ell, max_sites)
                two = any(not a.overlaps(b) for a, b in itertools.combinations(sing, 2))
                return (not c.cnr, two)

        out = _ss_trials(model, E, m, L, trials, base_seed, beta, scan, cnr_mode, threads,
                         max_sites, extra)
        reports.append(_aggregate([r for r, _ in out], model, E, m, L, p, base_seed, scan))
        dichotomies.append([
            DichotomyRecord(r.t, not r.ns, x[0], x[1]) for r, x in out if x is not None
        ])
    steps = []
    for k in range(len(fitting) - 1):
        small, big = reports[k], reports[k + 1]
        dich = dichotomies[k + 1]
        flags = []
        if trials == 0:
            premise = conclusion = passed = None
            status = "empty"
        else:
            premise = small.ci_hi <= small.bound
            conclusion = big.ci_hi <= big.bound
            if model.g == 0:
                flags.append("degenerate-variance")
                passed, status = None, "degenerate"
            elif p <= 0:
                flags.append("vacuous")
                passed, status = True, "vacuous"
            elif premise:
                passed = conclusion
                status = "pass" if conclusion else "fail"
            else:
                passed, status = None, "premise-unmet"
        steps.append(InductionStep(
            k, small.L, big.L, premise, conclusion, passed, status, tuple(flags),
            sum(d.not_cnr for d in dich), sum(d.two_separated_singular for d in dich),
            sum(d.unexplained for d in dich)))
    return InductionReport(tuple(fitting), tuple(reports), tuple(steps))


@dataclass(frozen=True)
class MPTrial:
    t: int
    event: str
    near_diagonal: int
    singular_near_diagonal: int
    b_pairs: int
    ambient_ns: bool
    ambient_cnr: bool

    @property
    def dichotomy_violation(self) -> bool:
        return self.event == "neither" and self.ambient_cnr and not self.ambient_ns


@dataclass(frozen=True)
class MPEventLog:
    L_small: int
    L_big: int
    center: tuple[int, ...]
    r_NL: int
    separation: int
    trials: tuple[MPTrial, ...]

    def counts(self) -> dict:
        out = {"S": 0, "B": 0, "neither": 0}
        for t in self.trials:
            out[t.event] += 1
        return out

    @property
    def dichotomy_violations(self) -> int:
        return sum(t.dichotomy_violation for t in self.trials)

    def to_json(self) -> dict:
        return {
            "schema": SCHEMA_VERSION,
            "L_small": self.L_small, "L_big": self.L_big, "center": list(self.center),
            "r_NL": self.r_NL, "separation": self.separation,
            "counts": self.counts(), "dichotomy_violations": self.dichotomy_violations,
            "trials": [
                {"t": t.t, "event": t.event, "near_diagonal": t.near_diagonal,
                 "singular_near_diagonal": t.singular_near_diagonal, "b_pairs": t.b_pairs,
                 "ambient_ns": t.ambient_ns, "ambient_cnr": t.ambient_cnr}
                for t in self.trials
            ],
        }


def b_event_pairs(boxes: Sequence[Box], separation: int) -> list[tuple[Box, Box]]:
    """Pairs of boxes whose centers are more than ``separation`` apart."""
    return [(a, b) for a, b in itertools.combinations(boxes, 2)
            if sup_dist(a.center, b.center) > separation]


def supports_disjoint(a: Box, b: Box) -> bool:
    sa = {tuple(r) for r in a.support().tolist()}
    return not any(tuple(r) in sa for r in b.support().tolist())


def mp_step_events(
    model: Model,
    E: float,
    m: float,
    L_small: int,
    L_big: int,
    trials: int,
    base_seed: int,
    center: Optional[Sequence[int]] = None,
    beta: float = 0.5,
    cnr_mode: str = "exhaustive",
    threads: Optional[int] = None,
    max_sites: int = DENSE_CAP,
) -> MPEventLog:
    """Per-trial S/B event log for an ``N``-particle box ``Lambda_{L_big}(center)``.

    S: some ``L_small`` sub-box within ``r_{N, L_small}`` of the diagonal is
    singular.  B: two such singular sub-boxes have centers more than
    ``9 (L_small + r_{N, L_small})`` apart.
    """
    if model.N < 2:
        raise DomainError("multi-particle events need N >= 2")
    box = model.box(L_big, center)
    _check_budget(box.size, max_sites)
    r0 = model.interaction.r0 if model.interaction is not None else 0
    r_nl = decomposition_threshold(model.N, L_small, r0)
    separation = 9 * (L_small + r_nl)
    near = [b for b in box.subboxes(L_small) if box_diagonal_distance(b) <= r_nl]

    def run(t):
        H = model.hamiltonian(box, trial_seed(base_seed, t))
        amb = classify(H, E, m, beta, L_small, cnr_mode, cap=max_sites)
        sing = _singular_subboxes_among(H, near, E, m, max_sites)
        pairs = b_event_pairs(sing, separation)
        for a, b in pairs:
            if all(projections_disjoint(a.center_point, b.center_point, L_small)):
                # disjoint projections must mean disjoint disorder supports
                assert supports_disjoint(a, b), (a, b)
        event = "B" if pairs else ("S" if sing else "neither")
        return MPTrial(t, event, len(near), len(sing), len(pairs), amb.ns, amb.cnr)

    records = _map_trials(run, trials, threads)
    return MPEventLog(L_small, L_big, box.center, r_nl, separation, tuple(records))


def _singular_subboxes_among(H, boxes, E, m, cap):
    from .green import green_column
    from .operator import restrict
    from .errors import ResonantEnergyError

    thr = math.exp(-gamma(m, boxes[0].radius)) if boxes else 0.0
    out = []
    for sub in boxes:
        try:
            col = green_column(restrict(H, sub), E, cap=cap)
        except ResonantEnergyError:
            out.append(sub)
            continue
        if col.boundary_max() > thr:
            out.append(sub)
    return out


@dataclass(frozen=True)
class TensorCheck:
    max_deviation: float
    kron_residual: float
    eigenvalues: np.ndarray
    pair_sums: np.ndarray
    factor_nr: Optional[bool] = None
    hypothesis_iii: Optional[bool] = None
    ambient_nr: Optional[bool] = None
    ambient_ns: Optional[bool] = None

    @property
    def lemma_consistent(self) -> Optional[bool]:
        """False only if all hypotheses hold yet the box is singular."""
        if self.hypothesis_iii is None:
            return None
        return not (self.ambient_nr and self.hypothesis_iii) or bool(self.ambient_ns)

    def to_json(self) -> dict:
        return {
            "max_deviation": self.max_deviation, "kron_residual": self.kron_residual,
            "size": int(len(self.eigenvalues)), "hypothesis_iii": self.hypothesis_iii,
            "ambient_nr": self.ambient_nr, "ambient_ns": self.ambient_ns,
            "lemma_consistent": self.lemma_consistent,
        }


def tensor_spectrum_check(
    left: Box,
    right: Box,
    g: float,
    potential: Optional[DisorderSample],
    E: Optional[float] = None,
    interaction: Optional[InteractionSpec] = None,
    m_factor: Optional[float] = None,
    m_total: Optional[float] = None,
    beta: float = 0.5,
    cap: int = DENSE_CAP,
) -> TensorCheck:
    """Compare the spectrum of the joint box with sums of the factor spectra.

    With ``E`` and both masses given, also evaluates the hypotheses of the
    factorisation lemma (factor boxes non-singular at the shifted energies
    ``E - mu_b`` / ``E - lambda_a`` with mass ``m_factor``, joint box E-NR)
    and the joint box's classification at mass ``m_total``.
    """
    if left.radius != right.radius or left.dim != right.dim:
        raise DomainError("factor boxes need equal radius and dimension")
    L, d = left.radius, left.dim
    if interaction is not None and not interaction.vanishes:
        gap = 2 * (L - 1) + interaction.r0
        lp, rp = left.center_point.particles(), right.center_point.particles()
        if any(sup_dist(a, b) <= gap for a in lp for b in rp):
            raise InteractionNonzeroError(
                f"subsystems closer than 2(L-1)+r0 = {gap}; the joint operator does not factorise")
    joint = Box(left.center + right.center, L, left.n_particles + right.n_particles)
    if joint.size > cap:
        raise CapacityError(f"joint box of {joint.size} sites exceeds the cap {cap}")
    H1 = assemble(left, g, potential, interaction)
    H2 = assemble(right, g, potential, interaction)
    H = assemble(joint, g, potential, interaction)
    kron = np.kron(H1.dense(), np.eye(H2.size)) + np.kron(np.eye(H1.size), H2.dense())
    kron_residual = float(np.max(np.abs(H.dense() - kron)))
    lam = spectrum(H1, cap=cap)
    mu = spectrum(H2, cap=cap)
    ev = spectrum(H, cap=cap)
    sums = np.sort(np.add.outer(lam, mu).ravel())
    dev = float(np.max(np.abs(ev - sums)))
    if E is None or m_factor is None or m_total is None:
        return TensorCheck(dev, kron_residual, ev, sums)
    hyp = all(classify(H1, E - b, m_factor, beta).ns for b in mu) and \
        all(classify(H2, E - a, m_factor, beta).ns for a in lam)
    amb = classify(H, E, m_total, beta)
    return TensorCheck(dev, kron_residual, ev, sums, None, hyp, amb.nr, amb.ns)
