#!/usr/bin/env python3
"""
Test Oracles
Tests the independent reference values used to check the engine
"""

from fractions import Fraction

import pytest

from percobound.errors import ParameterError
from percobound.graph_core import GraphSpec, ball, build_view
from percobound.oracles import (
    branching_survival,
    crossing_probability,
    crossing_threshold,
    line_phi,
    phi_by_path_enumeration,
)


class TestBranching:
    """Test tree survival probabilities"""

    def test_subcritical_dies(self):
        assert branching_survival(2, 0.4) == 0.0
        assert branching_survival(2, 0.5) == 0.0

    def test_supercritical(self):
        # s = 1 - (1 - 0.75 s)^2 has the positive root s = 8/9
        assert branching_survival(2, 0.75) == pytest.approx(0.75 * 8 / 9, abs=1e-10)

    def test_parameters(self):
        with pytest.raises(ParameterError):
            branching_survival(0, 0.5)


class TestPathEnumeration:
    """Test the recursive phi oracle"""

    def test_line(self):
        assert line_phi(Fraction(1, 2), 3) == Fraction(1, 4)

    def test_unit_ball(self):
        view = build_view(GraphSpec.from_flag("lattice:2", 2))
        p = Fraction(1, 3)
        assert phi_by_path_enumeration(view, 0, ball(view, 0, 1), p) == 4 * p

    def test_boundary_vertex(self):
        view = build_view(GraphSpec.from_flag("lattice:2", 2))
        assert phi_by_path_enumeration(view, 0, {0}, 0.5) == 1.0

    def test_limit(self):
        view = build_view(GraphSpec.from_flag("lattice:2", 4))
        with pytest.raises(ParameterError):
            phi_by_path_enumeration(view, 0, ball(view, 0, 4), 0.5)


class TestCrossing:
    """Test square-lattice box crossings"""

    def test_extremes(self):
        assert crossing_probability(16, 0.3, replicas=200).point < 0.1
        assert crossing_probability(16, 0.85, replicas=200).point > 0.9

    def test_deterministic(self):
        assert crossing_probability(12, 0.6, replicas=100, seed=4) == crossing_probability(12, 0.6, replicas=100, seed=4)

    @pytest.mark.slow
    def test_threshold(self):
        assert 0.55 <= crossing_threshold(L=48, replicas=400) <= 0.63
