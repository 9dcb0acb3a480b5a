#!/usr/bin/env python3
"""
Test Estimates
Tests Wilson score intervals, bounded-mean intervals and the Estimate model
"""

import numpy as np
import pytest
from pydantic import ValidationError

from percobound.estimates import Estimate, bounded_mean_interval, wilson_interval, z_score


class TestWilson:
    """Test Wilson score intervals"""

    def test_z_score(self):
        assert z_score(0.95) == pytest.approx(1.959964, abs=1e-6)

    def test_contains_proportion(self):
        low, high = wilson_interval(30, 100, 0.99)
        assert low < 0.3 < high

    def test_edges(self):
        assert wilson_interval(0, 50)[0] == 0.0
        assert wilson_interval(50, 50)[1] == 1.0
        assert wilson_interval(0, 0) == (0.0, 1.0)

    def test_narrows_with_trials(self):
        wide = wilson_interval(10, 100)
        narrow = wilson_interval(1000, 10000)
        assert narrow[1] - narrow[0] < wide[1] - wide[0]


class TestBoundedMean:
    """Test intervals for bounded per-replica means"""

    def test_contains_mean(self):
        values = np.random.default_rng(0).integers(0, 4, size=500)
        low, high = bounded_mean_interval(values, 24.0, 0.99)
        assert 0.0 <= low <= values.mean() <= high <= 24.0

    def test_width_does_not_scale_with_bound(self):
        values = np.random.default_rng(1).integers(0, 3, size=4000)
        narrow = bounded_mean_interval(values, 2.0)
        wide = bounded_mean_interval(values, 24.0)
        assert wide == pytest.approx(narrow)
        assert wide[1] - wide[0] < 0.1

    def test_constant_samples(self):
        low, high = bounded_mean_interval(np.zeros(100), 8.0)
        assert low == 0.0
        assert 0.0 < high < 8.0
        low, high = bounded_mean_interval(np.full(100, 8.0), 8.0)
        assert 0.0 < low < 8.0
        assert high == 8.0

    def test_empty(self):
        assert bounded_mean_interval([], 5.0) == (0.0, 5.0)


class TestEstimate:
    """Test the Estimate model"""

    def test_from_counts(self):
        est = Estimate.from_counts(25, 100, 0.99)
        assert est.point == 0.25
        assert est.ci_low <= 0.25 <= est.ci_high
        assert est.half_width == pytest.approx((est.ci_high - est.ci_low) / 2)

    def test_complement(self):
        est = Estimate.from_counts(25, 100)
        comp = est.complement()
        assert comp.successes == 75
        assert comp.point == pytest.approx(0.75)
        assert comp.ci_low == pytest.approx(1 - est.ci_high)

    def test_sure(self):
        assert Estimate.sure(40).point == 1.0
        assert Estimate.sure(40, value=False).point == 0.0

    def test_invalid_interval(self):
        with pytest.raises(ValidationError):
            Estimate(successes=1, replicas=10, point=0.1, ci_low=0.2, ci_high=0.3)

    def test_row(self):
        assert set(Estimate.from_counts(1, 2).to_row()) == {"successes", "replicas", "point", "ci_low", "ci_high"}
