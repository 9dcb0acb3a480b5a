#!/usr/bin/env python3
"""
Test Percolation Engine
Tests coupled sampling, connectivity events, Monte Carlo and exact probabilities
"""

from fractions import Fraction

import numpy as np
import pytest

from percobound.config import settings
from percobound.errors import ExactCapError, ParameterError
from percobound.graph_core import GraphSpec, ball, build_view, load_graph, puncture, vertex_at
from percobound.models import PercolationParams
from percobound.percolation_engine import (
    EventKind,
    EventSpec,
    ball_disconnection_event,
    connects,
    disconnection_profile,
    exact_probability,
    label_clusters,
    mc_estimate,
    outcomes,
    polynomial_value,
    replica_uniforms,
    sample,
    truncated_disconnection,
)
from percobound.workers import WorkerPool


@pytest.fixture
def z2():
    return build_view(GraphSpec.from_flag("lattice:2", 3))


@pytest.fixture
def line():
    return build_view(GraphSpec.from_flag("lattice:1", 3))


@pytest.fixture
def serial():
    return WorkerPool(max_workers=1)


def random_instances(view, count, seed):
    """(event, allowed) pairs on connected regions of at most 12 vertices around the origin"""
    rng = np.random.default_rng(seed)
    candidates = sorted(ball(view, 0, 2))
    instances = []
    while len(instances) < count:
        size = int(rng.integers(4, 13))
        region = {0}
        while len(region) < size:
            frontier = sorted({w for u in region for w in view.live_neighbors(u) if w in candidates} - region)
            region.add(int(rng.choice(frontier)))
        targets = [int(t) for t in rng.choice(sorted(region - {0}), size=2, replace=False)]
        flags = dict(requires_source_open=bool(rng.integers(2)), endpoint_interior=True)
        instances.append(EventSpec.connect(0, targets, allowed=region, **flags))
    return instances


class TestUniforms:
    """Test counter-based uniforms"""

    def test_deterministic(self):
        assert np.array_equal(replica_uniforms(7, 3, 10), replica_uniforms(7, 3, 10))

    def test_prefix_independent_of_width(self):
        assert np.array_equal(replica_uniforms(7, 3, 50)[:20], replica_uniforms(7, 3, 20))

    def test_replicas_differ(self):
        assert not np.array_equal(replica_uniforms(7, 3, 10), replica_uniforms(7, 4, 10))

    def test_monotone_coupling_in_p(self, z2):
        """Open sets grow with p on every replica"""
        low = PercolationParams(p=0.3, seed=11)
        high = low.at(0.6)
        for r in range(1000):
            assert sample(z2, low, r).open <= sample(z2, high, r).open

    def test_coupling_survives_puncturing(self, z2):
        params = PercolationParams(p=0.5, seed=2)
        punctured = puncture(z2, [(vertex_at(z2, (2, 0)), 0)])
        full = sample(z2, params, 5).open
        assert sample(punctured, params, 5).open == full - punctured.removed


class TestEvents:
    """Test event construction and batched evaluation"""

    def test_empty_targets_rejected(self):
        with pytest.raises(ParameterError):
            EventSpec.connect(0, [])

    def test_connect_single_source(self):
        with pytest.raises(ParameterError):
            EventSpec(kind=EventKind.CONNECT, sources=frozenset({1, 2}), targets=frozenset({3}))

    def test_label_clusters(self):
        active = np.array([[True, True, True], [True, False, True]])
        edges = np.array([[0, 1], [1, 2]])
        labels, _ = label_clusters(active, edges)
        assert labels[0, 0] == labels[0, 2]
        assert labels[1, 0] != labels[1, 2]
        assert labels[0, 0] != labels[1, 0]

    def test_batch_matches_breadth_first_search(self, z2, serial):
        params = PercolationParams(p=0.55, seed=3, replicas=200)
        region = ball(z2, 0, 2)
        east = vertex_at(z2, (2, 0))
        far = vertex_at(z2, (3, 0))
        events = [
            dict(v=0, targets=[east], allowed=region),
            dict(v=0, targets=[east], allowed=region, requires_source_open=False),
            dict(v=0, targets=[far], allowed=region, endpoint_interior=False),
            dict(v=0, targets=[far]),
        ]
        specs = [EventSpec.connect(e["v"], e["targets"], allowed=e.get("allowed"),
                                   requires_source_open=e.get("requires_source_open", True),
                                   endpoint_interior=e.get("endpoint_interior", True)) for e in events]
        matrix = outcomes(z2, specs, params, serial)
        assert matrix.shape == (200, 4)
        for r in range(200):
            cfg = sample(z2, params, r)
            for column, e in enumerate(events):
                assert matrix[r, column] == connects(cfg, **e)

    def test_disconnect_all(self, z2, serial):
        params = PercolationParams(p=0.5, seed=4, replicas=100)
        region = ball(z2, 0, 2)
        targets = [v for v in region if z2.depth(v) == 2]
        sources = [0, vertex_at(z2, (1, 0))]
        matrix = outcomes(z2, [EventSpec.disconnect_all(sources, targets, allowed=region)], params, serial)
        for r in range(100):
            cfg = sample(z2, params, r)
            joined = any(connects(cfg, s, targets, allowed=region) for s in sources)
            assert matrix[r, 0] == (not joined)


class TestMonteCarlo:
    """Test Monte Carlo estimates"""

    def test_source_alone(self, z2, serial):
        params = PercolationParams(p=0.3, seed=5, replicas=4000)
        estimate = mc_estimate(z2, EventSpec.connect(0, [0], allowed={0}), params, serial)
        assert estimate.ci_low <= 0.3 <= estimate.ci_high

    def test_single_vertex_disconnection(self, z2, serial):
        params = PercolationParams(p=0.3, seed=6, replicas=4000)
        event = EventSpec.disconnect_all([0], [0], allowed={0})
        estimate = mc_estimate(z2, event, params, serial)
        assert estimate.ci_low <= 0.7 <= estimate.ci_high
        assert exact_probability(z2, [event], Fraction(3, 10), pool=serial) == [Fraction(7, 10)]

    def test_identical_across_worker_counts(self, z2, monkeypatch):
        monkeypatch.setattr(settings, "REPLICA_CHUNK", 16)
        params = PercolationParams(p=0.6, seed=9, replicas=300)
        event = EventSpec.connect(0, [vertex_at(z2, (2, 0))], allowed=ball(z2, 0, 2))
        results = [outcomes(z2, [event], params, WorkerPool(n)) for n in (1, 4, 8)]
        assert np.array_equal(results[0], results[1])
        assert np.array_equal(results[0], results[2])

    def test_agrees_with_exact(self, z2, serial):
        params = PercolationParams(p=0.6, seed=13, replicas=4000)
        for event in random_instances(z2, 5, seed=1):
            exact = float(exact_probability(z2, [event], Fraction(3, 5), pool=serial)[0])
            estimate = mc_estimate(z2, event, params, serial)
            assert estimate.ci_low - 0.02 <= exact <= estimate.ci_high + 0.02

    @pytest.mark.slow
    def test_agrees_with_exact_suite(self, z2):
        params = PercolationParams(p=0.5, seed=17, replicas=100_000)
        covered = 0
        instances = random_instances(z2, 20, seed=2)
        for event in instances:
            exact = float(exact_probability(z2, [event], Fraction(1, 2))[0])
            estimate = mc_estimate(z2, event, params)
            covered += estimate.ci_low <= exact <= estimate.ci_high
        assert covered >= 19


class TestExact:
    """Test exact enumeration"""

    def test_path_on_line(self, line, serial):
        two = vertex_at(line, (2,))
        event = EventSpec.connect(0, [two], allowed=ball(line, 0, 2))
        value = exact_probability(line, [event], Fraction(1, 3), pool=serial)[0]
        assert value == Fraction(1, 27)

    def test_float_input(self, line, serial):
        two = vertex_at(line, (2,))
        event = EventSpec.connect(0, [two], allowed=ball(line, 0, 2))
        assert exact_probability(line, [event], 0.5, pool=serial)[0] == pytest.approx(0.125, abs=1e-15)

    def test_no_events(self, line):
        assert exact_probability(line, [], Fraction(1, 2)) == []

    def test_cap(self, z2):
        event = EventSpec.connect(0, [vertex_at(z2, (2, 0))], allowed=ball(z2, 0, 2))
        with pytest.raises(ExactCapError) as exc:
            exact_probability(z2, [event], 0.5, cap=5)
        assert "Monte Carlo" in str(exc.value)

    def test_polynomial_value(self):
        assert polynomial_value([1, 2, 1], Fraction(1, 2)) == 1
        assert polynomial_value([0, 0, 1], Fraction(1, 3)) == Fraction(1, 9)


class TestDisconnection:
    """Test truncated disconnection"""

    def test_pathwise_monotone_in_radius(self, serial):
        view = build_view(GraphSpec.from_flag("lattice:2", 16))
        params = PercolationParams(p=0.6, seed=21, replicas=1000)
        matrix, estimates = disconnection_profile(view, [0], [4, 8, 16], params, serial)
        assert not (matrix[:, :-1] & ~matrix[:, 1:]).any()
        points = [e.point for e in estimates]
        assert points == sorted(points)

    def test_star_exact_against_monte_carlo(self, z2, serial, tmp_path):
        path = tmp_path / "star.txt"
        path.write_text("vertices 5 origin 0\n0 1\n0 2\n0 3\n0 4\n", encoding="utf-8")
        star = build_view(load_graph(str(path)))
        p = Fraction(1, 2)
        expected = 1 - p * (1 - (1 - p) ** 4)
        event = EventSpec.disconnect_all([0], [1, 2, 3, 4])
        assert exact_probability(star, [event], p, pool=serial) == [expected]

        # B(0, 1) of Z^2 is the same star, its leaves forming the inner boundary
        assert exact_probability(z2, [ball_disconnection_event(z2, 0, [0], 1)], p, pool=serial) == [expected]
        params = PercolationParams(p=0.5, seed=8, replicas=4000)
        estimate = truncated_disconnection(z2, [0], 1, params, serial)
        assert estimate.ci_low <= float(expected) <= estimate.ci_high

    def test_low_p_mostly_disconnected(self, z2, serial):
        params = PercolationParams(p=0.1, seed=1, replicas=2000)
        assert truncated_disconnection(z2, [0], 3, params, serial).ci_high >= 0.9

    def test_S_must_fit(self, z2):
        params = PercolationParams(p=0.5, replicas=10)
        with pytest.raises(ParameterError):
            truncated_disconnection(z2, [vertex_at(z2, (2, 0))], 2, params)
