#!/usr/bin/env python3
"""
Test Packing Certifier
Tests the two per-step checks, greedy certification and its determinism
"""

from itertools import combinations
from types import SimpleNamespace

import pytest

from percobound.config import settings
from percobound.errors import InvariantViolation, ParameterError
from percobound.graph_core import GraphSpec, build_view, load_graph, segment, vertex_at
from percobound.models import CtdMode, PercolationParams, SupercriticalParams, WilMethod
from percobound.packing_certifier import (
    PackingOracle,
    PackingRequest,
    _assert_disjoint,
    candidates,
    certify_packing,
    check_ctd,
    check_wil,
)
from percobound.report_writer import CSV_COLUMNS, Table, dumps
from percobound.workers import WorkerPool


@pytest.fixture
def path_graph(tmp_path):
    path = tmp_path / "path.txt"
    path.write_text("vertices 3 origin 1\n0 1\n1 2\n", encoding="utf-8")
    return build_view(load_graph(str(path)))


@pytest.fixture
def small_lattice():
    return build_view(GraphSpec.from_flag("lattice:2", 12))


@pytest.fixture
def serial():
    return WorkerPool(max_workers=1)


def small_request(view, **overrides):
    options = dict(
        view=view,
        S=segment(view, 8),
        p=0.7,
        eps=0.2,
        c=0.5,
        d_min=1,
        d_max=2,
        r_proxy=4,
        params=PercolationParams(p=0.7, seed=3, replicas=500),
        spacing=4,
        ctd_mode=CtdMode.PAIRED,
    )
    options.update(overrides)
    return PackingRequest(**options)


class TestRequest:
    """Test request validation"""

    def test_radii(self, small_lattice):
        assert small_request(small_lattice).radii == [1, 2, 4, 8]

    @pytest.mark.parametrize("overrides", [
        dict(eps=0.0),
        dict(c=1.0),
        dict(d_min=3, d_max=2),
        dict(r_proxy=2),
        dict(spacing=0),
    ])
    def test_invalid(self, small_lattice, overrides):
        with pytest.raises(ParameterError):
            small_request(small_lattice, **overrides)

    def test_candidates_by_distance(self, small_lattice):
        S = segment(small_lattice, 8)
        picked = candidates(small_lattice, S, 4)
        assert [small_lattice.coords(v) for v in picked] == [(0, 0), (-4, 0)]


class TestChecks:
    """Test the disconnection and connection checks"""

    def test_identical_events_on_finite_graph(self, path_graph, serial):
        params = PercolationParams(p=0.5, seed=0, replicas=200)
        ctd = check_ctd(path_graph, 1, 1, 2, 0.2, params, pool=serial)
        assert ctd.passed
        assert ctd.reason == "identical events"
        assert ctd.disc_ball.point == 1.0

    def test_finite_graph_never_reaches_infinity(self, path_graph, serial):
        params = PercolationParams(p=0.5, seed=0, replicas=200)
        wil = check_wil(path_graph, 1, 2, 0.5, 0.3, params, pool=serial)
        assert not wil.passed
        assert wil.method == WilMethod.PROXY
        assert wil.label == "definitive fail"

    def test_source_open_cap(self, path_graph):
        params = PercolationParams(p=0.5, replicas=10)
        wil = check_wil(path_graph, 1, 2, 0.5, 0.6, params)
        assert not wil.passed
        assert wil.method == WilMethod.SOURCE_OPEN

    def test_analytic_path(self, serial):
        tree = build_view(GraphSpec.from_flag("tree:2", 4))
        params = PercolationParams(p=0.8, seed=0, replicas=100)
        sp = SupercriticalParams(p=0.8, p1=0.7, eps1=0.0)
        wil = check_wil(tree, 0, 2, 0.8, 0.3, params, supercritical=sp, pool=serial)
        assert wil.passed
        assert wil.method == WilMethod.ANALYTIC
        assert wil.bound == pytest.approx(1 / 3)
        assert wil.label == "audited, not proven"

    def test_ball_event_inside_proxy_event(self, small_lattice, serial):
        params = PercolationParams(p=0.7, seed=5, replicas=400)
        for mode in CtdMode:
            ctd = check_ctd(small_lattice, 0, 2, 4, 0.2, params, mode=mode, pool=serial)
            assert ctd.disc_ball.point <= ctd.disc_inf.point <= ctd.disc_inf_double.point
            assert (ctd.excess is not None) == (mode == CtdMode.PAIRED)

    def test_overlapping_dependencies_rejected(self):
        steps = [SimpleNamespace(index=1, dependency=[1, 2]), SimpleNamespace(index=2, dependency=[2, 3])]
        with pytest.raises(InvariantViolation):
            _assert_disjoint(steps)


class TestCertification:
    """Test greedy certification"""

    def test_every_candidate_accounted_for(self, small_lattice, serial):
        req = small_request(small_lattice)
        cert = certify_packing(req, pool=serial)
        assert len(cert.steps) + len(cert.rejections) == len(candidates(small_lattice, req.S, req.spacing))
        for step in cert.steps:
            assert step.ctd.passed and step.wil.passed
        for a, b in combinations(cert.steps, 2):
            assert not set(a.dependency) & set(b.dependency)

    def test_rows_follow_columns(self, small_lattice, serial):
        cert = certify_packing(small_request(small_lattice), pool=serial)
        for step in cert.steps:
            assert list(step.to_row()) == CSV_COLUMNS[Table.PACK]

    def test_reproducible_across_worker_counts(self, small_lattice, monkeypatch):
        monkeypatch.setattr(settings, "REPLICA_CHUNK", 64)
        documents = [
            dumps(certify_packing(small_request(small_lattice), pool=WorkerPool(n)).to_dict())
            for n in (1, 4)
        ]
        assert documents[0] == documents[1]

    def test_oracle_memoizes(self, path_graph, serial):
        params = PercolationParams(p=0.5, seed=0, replicas=100)
        oracle = PackingOracle(path_graph, [1], 0.5, params, d_min=1, d_max=1, r_proxy=2, pool=serial)
        assert oracle(0.2, 0.3) == 0
        first = oracle.certificate(0.2, 0.3)
        assert oracle.certificate(0.2, 0.3) is first
        oracle(0.2, 0.4)
        assert len(oracle.certificates) == 2
        assert oracle.cache.hits >= 1


@pytest.mark.slow
class TestSegmentCertificate:
    """Acceptance-scale certificate for a 64-vertex segment of Z^2"""

    @pytest.fixture(scope="class")
    def lattice(self):
        return build_view(GraphSpec.from_flag("lattice:2", 64))

    def request(self, view):
        return PackingRequest(
            view=view,
            S=segment(view, 64),
            p=0.7,
            eps=0.2,
            c=0.5,
            d_min=1,
            d_max=3,
            r_proxy=16,
            params=PercolationParams(p=0.7, seed=0, replicas=4000),
            spacing=8,
            ctd_mode=CtdMode.PAIRED,
        )

    def test_certificate(self, lattice):
        documents = []
        for workers in (1, 4, 8):
            cert = certify_packing(self.request(lattice), pool=WorkerPool(workers))
            if workers == 1:
                assert cert.k >= 6
                for a, b in combinations(cert.steps, 2):
                    assert not set(a.dependency) & set(b.dependency)
            documents.append(dumps(cert.to_dict()))
        assert documents[0] == documents[1] == documents[2]

    def test_origin_is_candidate(self, lattice):
        assert vertex_at(lattice, (0, 0)) in candidates(lattice, segment(lattice, 64), 8)
