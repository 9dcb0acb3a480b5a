#!/usr/bin/env python3
"""
Test Bound Verifier
Tests the packing bound, the grid bound, the induction check and verdicts
"""

from fractions import Fraction
from itertools import product

import numpy as np
import pytest

from percobound.bound_verifier import (
    coupling_ratio,
    default_grid,
    disconnection_radii,
    induction_check,
    lemma_bound,
    theorem_bound,
    theorem_integrand,
    verify_disconnection,
)
from percobound.errors import ParameterError
from percobound.graph_core import GraphSpec, build_view, segment
from percobound.models import CtdMode, PercolationParams, TheoremBoundInput, Verdict
from percobound.workers import WorkerPool


class TestLemmaBound:
    """Test the packing disconnection bound"""

    def test_one_step(self):
        assert lemma_bound(0.1, 0.5, 1) == pytest.approx(0.65, abs=1e-12)

    def test_ten_steps(self):
        assert lemma_bound(0.1, 0.5, 10) == pytest.approx(0.1 + 1.1 / 1024, abs=1e-12)
        assert lemma_bound(0.1, 0.5, 10) == pytest.approx(0.101074, abs=1e-6)

    def test_c_one_vanishes(self):
        assert lemma_bound(0.3, 1.0, 4) == 0

    def test_exact(self):
        assert lemma_bound(Fraction(1, 10), Fraction(1, 2), 1) == Fraction(13, 20)

    def test_c_zero(self):
        with pytest.raises(ParameterError):
            lemma_bound(0.1, 0.0, 3)

    def test_eps_range(self):
        with pytest.raises(ParameterError):
            lemma_bound(1.0, 0.5, 3)


class TestTheoremBound:
    """Test the supercritical grid bound"""

    def test_substitution_identity_on_random_points(self):
        rng = np.random.default_rng(0)
        for _ in range(1000):
            p = rng.uniform(0.55, 0.95)
            p1 = rng.uniform(0.3, p - 0.01)
            eps = rng.uniform(0.0, 0.9)
            delta = rng.uniform(0.01, 0.9)
            k = int(rng.integers(0, 21))
            r = coupling_ratio(p, p1, eps)
            value = theorem_integrand(p, p1, eps, delta, k)
            assert value == pytest.approx(float(lemma_bound(delta, 1.0 - r, k)), rel=1e-12, abs=1e-12)

    def test_regression_point(self):
        value = theorem_integrand(0.7, 0.65, 0.1, 0.1, 6)
        r = (0.3 / 0.35) ** 0.9
        assert value == pytest.approx(0.1 * r / (1 - r) + 1.1 * r**6, rel=1e-12)
        assert value == pytest.approx(1.1505, abs=1e-3)

    def test_coupling_ratio_order(self):
        with pytest.raises(ParameterError):
            coupling_ratio(0.6, 0.7, 0.1)

    def test_default_grid(self):
        grid = default_grid(0.7, 0.6)
        assert len(grid.p1_values) == 8
        assert grid.p1_values[0] == pytest.approx(0.61)
        assert grid.p1_values[-1] == pytest.approx(0.69)

    def test_default_grid_narrow(self):
        assert default_grid(0.7, 0.69).p1_values == [pytest.approx(0.695)]

    def test_grid_needs_supercritical_p(self):
        with pytest.raises(ValueError):
            default_grid(0.5, 0.6)

    def test_minimum(self):
        inp = TheoremBoundInput(p=0.7, pc_tilde=0.6, p1_values=[0.62, 0.65], eps_values=[0.1], delta_values=[0.1, 0.2])
        result = theorem_bound(inp, lambda delta, c: 6)
        assert len(result.rows) == 4
        assert result.value == min(row.value for row in result.rows)
        assert result.argmin.k == 6

    def test_larger_packing_lowers_bound(self):
        inp = TheoremBoundInput(p=0.8, pc_tilde=0.6, p1_values=[0.65], eps_values=[0.1], delta_values=[0.1])
        assert theorem_bound(inp, lambda d, c: 10).value < theorem_bound(inp, lambda d, c: 2).value

    def test_skipped_points(self):
        inp = TheoremBoundInput(p=0.7, pc_tilde=0.6, p1_values=[0.55, 0.65], eps_values=[0.1], delta_values=[0.1])
        result = theorem_bound(inp, lambda d, c: 3)
        assert [row.skipped for row in result.rows] == [True, False]

    def test_all_skipped(self):
        inp = TheoremBoundInput(p=0.7, pc_tilde=0.6, p1_values=[0.5], eps_values=[0.1], delta_values=[0.1])
        with pytest.raises(ParameterError):
            theorem_bound(inp, lambda d, c: 3)


class TestInduction:
    """Test the exact induction check"""

    def test_worst_case_example(self):
        report = induction_check(5, 0.3, 0.2)
        assert float(report.probability) == pytest.approx(0.84**5)
        assert float(report.probability) == pytest.approx(0.418, abs=1e-3)
        assert float(report.bound) == pytest.approx(0.668, abs=1e-3)
        assert report.passed
        assert len(report.steps) == 5

    def test_intermediate_is_the_ball_gap(self):
        assert induction_check(1, 0.5, 0.1).intermediate == Fraction(1, 20)
        assert induction_check(2, 0.5, 0.1).intermediate == Fraction(21, 400)

    @pytest.mark.parametrize("family,seed", [("worst", 0), ("random", 1), ("random", 2)])
    def test_intermediate_matches_closed_form(self, family, seed):
        report = induction_check(6, 0.3, 0.2, seed=seed, family=family)
        with_excess = Fraction(1)
        ball_only = Fraction(1)
        for step in report.steps:
            with_excess *= step.ball_event + step.excess
            ball_only *= step.ball_event
            assert step.joint == with_excess
            assert step.ball_joint == ball_only
            assert step.intermediate == with_excess - ball_only
            assert step.intermediate <= step.intermediate_cap
        assert report.intermediate == with_excess - ball_only
        assert report.intermediate <= Fraction(2, 10) * sum(Fraction(7, 10) ** i for i in range(1, 7))

    @pytest.mark.parametrize("eps,c,k", list(product([0, 0.1, 0.3], [0.2, 0.5, 0.8], range(1, 11))))
    def test_grid(self, eps, c, k):
        report = induction_check(k, c, eps)
        assert report.probability <= report.bound
        assert report.intermediate <= report.intermediate_bound

    @pytest.mark.parametrize("seed", range(5))
    def test_random_family(self, seed):
        report = induction_check(8, 0.4, 0.25, seed=seed, family="random")
        assert report.passed
        assert report.seed == seed
        assert report.gap >= 0

    def test_k_range(self):
        with pytest.raises(ParameterError):
            induction_check(21, 0.5, 0.1)

    def test_unknown_family(self):
        with pytest.raises(ParameterError):
            induction_check(2, 0.5, 0.1, family="best")


class TestVerify:
    """Test end-to-end verdicts"""

    @pytest.fixture
    def lattice(self):
        return build_view(GraphSpec.from_flag("lattice:2", 6))

    def test_empty_set_is_degenerate(self, lattice):
        report = verify_disconnection(lattice, [], PercolationParams(p=0.7), pc_tilde=0.6)
        assert report.verdict == Verdict.DEGENERATE
        assert report.diagnostics

    def test_radii(self, lattice):
        assert disconnection_radii(lattice, [0]) == [1, 2, 4, 6]

    def test_near_one_is_consistent(self, lattice):
        params = PercolationParams(p=0.95, seed=1, replicas=1000)
        grid = TheoremBoundInput(p=0.95, pc_tilde=0.6, p1_values=[0.8], eps_values=[0.1], delta_values=[0.1, 0.2])
        report = verify_disconnection(
            lattice, [0], params, pc_tilde=0.6, d_max=2, r_proxy=3, spacing=1,
            ctd_mode=CtdMode.PAIRED, grid=grid, pool=WorkerPool(1),
        )
        assert report.verdict == Verdict.CONSISTENT
        assert report.empirical.point < 0.1
        assert len(report.grid) == 2
        assert report.packing["k"] == report.k
        assert report.radii == sorted(report.radii)


@pytest.mark.slow
class TestSegmentVerdict:
    """Acceptance-scale verdicts for a 64-vertex segment of Z^2"""

    @pytest.fixture(scope="class")
    def lattice(self):
        return build_view(GraphSpec.from_flag("lattice:2", 64))

    @pytest.mark.parametrize("p", [0.7, 0.9])
    def test_consistent(self, lattice, p):
        params = PercolationParams(p=p, seed=0, replicas=4000)
        report = verify_disconnection(
            lattice, segment(lattice, 64), params, pc_tilde=0.6,
            eps=0.2, c=0.5, d_min=1, d_max=3, r_proxy=16, spacing=8,
            ctd_mode=CtdMode.PAIRED, grid=default_grid(p, 0.6, n_p1=4),
        )
        assert report.verdict == Verdict.CONSISTENT
        assert report.empirical.ci_high <= report.theorem_rhs + report.slack
