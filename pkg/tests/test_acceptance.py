"""Acceptance criteria, one test per criterion.

Each test carries a ``criterion`` marker; the session summary prints a
PASS/FAIL line per criterion.
"""
import json
import time

import pytest

from msa_forge.descent import (
    BOUNDARY_ADJACENT,
    INTERIOR,
    NO_SINGULAR,
    descent_bound,
    ns_implication,
)
from msa_forge.disorder import Uniform
from msa_forge.fixtures import build_ns_fixture, ns_fixtures
from msa_forge.green import classify
from msa_forge.harness import Model, single_site_probability, wegner_estimate
from msa_forge.suites import descent_suite, gri_suite, lemma_b_counterexamples, tensor_suite

from oracles import singular_fraction, wilson


class Timer:
    def __enter__(self):
        self.start = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.seconds = time.perf_counter() - self.start


@pytest.mark.criterion(1, "resolvent identity residual <= 1e-10 on 100 instances, < 10 s")
def test_criterion_1_gri_exactness():
    with Timer() as t:
        res = gri_suite(instances=100, seed=0, tolerance=1e-10)
    assert res.instances == 100
    assert res.max_relative_residual <= 1e-10
    assert res.passed
    assert t.seconds < 10


@pytest.mark.criterion(2, "tensor spectrum matches pair sums to 1e-9 on 50 fixtures, < 10 s")
def test_criterion_2_tensor_spectrum():
    with Timer() as t:
        res = tensor_suite(fixtures=50, seed=0, tolerance=1e-9)
    assert res.fixtures == 50
    assert res.max_deviation <= 1e-9
    assert t.seconds < 10


@pytest.mark.criterion(3, "radial descent: 500 instances, zero violations, hand values exact, < 30 s")
def test_criterion_3_radial_descent():
    with Timer() as t:
        res = descent_suite(instances=500, seed=0, A=4)
        hand = (
            descent_bound(16, 4, 0.5, NO_SINGULAR),
            descent_bound(20, 4, 0.5, BOUNDARY_ADJACENT, A=4),
            descent_bound(24, 4, 0.5, INTERIOR, A=4),
        )
    assert res.instances == 500
    assert res.violations == 0
    assert all(res.by_case[c] > 0 for c in (NO_SINGULAR, BOUNDARY_ADJACENT, INTERIOR))
    assert hand == (0.125, 0.25, 0.25)
    assert t.seconds < 30


@pytest.mark.criterion(4, "NS-implied fixtures are NS; direct bound holds without singular boxes, < 60 s")
def test_criterion_4_ns_implication_soundness():
    implied = no_singular = 0
    with Timer() as t:
        for fx in ns_fixtures():
            H, E = build_ns_fixture(fx)
            v = ns_implication(H, E, fx["m"], fx["beta"], fx["ell"])
            if v.ns_implied:
                implied += 1
                assert classify(H, E, fx["m"], fx["beta"]).ns, fx["name"]
            if v.case == NO_SINGULAR and v.direct_bound_holds is not None:
                no_singular += 1
                assert v.direct_bound_holds, fx["name"]
    assert implied >= 3 and no_singular >= 1
    assert t.seconds < 60


@pytest.mark.criterion(5, "separated near-diagonal pairs have disjoint projections, < 30 s")
def test_criterion_5_diagonal_geometry():
    with Timer() as t:
        results = {(L, B): lemma_b_counterexamples(L, B) for L in (1, 2, 3) for B in (0, 1, 2)}
    assert all(bad == 0 for _, bad in results.values())
    # with B = 0 no box lies strictly within distance 0 of the diagonal
    assert all(results[L, 0] == (0, 0) for L in (1, 2, 3))
    assert all(results[L, B][0] > 0 for L in (1, 2, 3) for B in (1, 2))
    assert t.seconds < 30


@pytest.mark.criterion(6, "single-site Wegner estimate within the Wilson interval of the exact value, < 5 s")
def test_criterion_6_wegner_single_site():
    model = Model(g=1.0, distribution=Uniform(0.0, 1.0))
    pairs = [(0.5, 0.1), (0.3, 0.05), (0.7, 0.2)]
    with Timer() as t:
        reports = [wegner_estimate(model, E, 1, eps, 5000, 0, threads=1) for E, eps in pairs]
    for (E, eps), rep in zip(pairs, reports):
        exact = single_site_probability(model.distribution, model.g, E, eps)
        assert exact == pytest.approx(2 * eps)
        assert rep.trials == 5000
        lo, hi = wilson(rep.count, rep.trials)
        assert lo <= exact <= hi
        assert rep.ci_lo <= exact <= rep.ci_hi
    assert t.seconds < 5


INDUCT_FROZEN = {
    8: dict(singular_count=45, p_hat=0.09, ci_lo=0.0679425478891394,
            ci_hi=0.11830941128933344, resonant_count=37, cnr_fail_count=56),
    22: dict(singular_count=1, p_hat=0.002, ci_lo=0.00035313639455927456,
             ci_hi=0.011240706705146757, resonant_count=13, cnr_fail_count=103),
}


@pytest.mark.criterion(7, "strong-disorder induction 8 -> 22 reproduces frozen values, p_hat decreases")
def test_criterion_7_scale_induction(cli):
    args = cli.bundled_args("induct", "induct_strong_disorder", "--threads", "1")
    code, out, _ = cli(*args)
    assert code == 0
    body = json.loads(out)
    reports = {r["L"]: r for r in body["reports"]}
    assert sorted(reports) == [8, 22]
    for L, frozen in INDUCT_FROZEN.items():
        rep = reports[L]
        assert rep["trials"] == 500
        for key, value in frozen.items():
            assert rep[key] == value, (L, key)
    assert reports[22]["p_hat"] < reports[8]["p_hat"]
    # independent dense-solve oracle for the singular counts
    assert singular_fraction(8, 10.0, 0.0, 0.5, 500, 0) == 45
    assert singular_fraction(22, 10.0, 0.0, 0.5, 500, 0) == 1
    assert cli.seconds(*args) < 600


@pytest.mark.criterion(8, "JSON reports are byte-identical for --threads 1 and 4")
@pytest.mark.parametrize("command,config", [
    ("wegner", "wegner_single_site"),
    ("induct", "induct_strong_disorder"),
])
def test_criterion_8_thread_determinism(cli, command, config):
    one = cli.bundled(command, config, "--threads", "1")
    four = cli.bundled(command, config, "--threads", "4")
    assert one[0] == four[0] == 0
    assert one[1] == four[1]
    assert one[1].encode() == four[1].encode()
