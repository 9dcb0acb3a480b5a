#!/usr/bin/env python3
"""
Critical Probability Estimator
Subcritical certificates and lower bounds on the site threshold, plus the
analytic connection lower bound used in supercritical checks

Features:
- Witness search over balls B(v, r) with phi_p^v(B(v, r)) <= 1 - eps0
- Bisection on p for a certified-on-the-family threshold lower bound
- Parameter constraint check for the supercritical regime
- Bounded audit of the supercritical witness condition (audited, not proven)
"""

import logging
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Dict, List, Optional, Sequence

import numpy as np

from .config import settings
from .errors import ParameterError, TruncationError
from .graph_core import GraphView
from .models import Method, PercolationParams, SupercriticalParams
from .phi_functional import PhiResult, ball_query, phi
from .workers import WorkerPool

logger = logging.getLogger(__name__)

AUDIT_LABEL = "audited, not proven"


@dataclass
class PhiEvaluation:
    vertex: int
    p: float
    radius: int
    result: PhiResult
    accepted: bool

    def to_row(self) -> Dict[str, Any]:
        return {
            "vertex": self.vertex,
            "p": self.p,
            "radius": self.radius,
            "phi": self.result.upper,
            "method": self.result.method.value,
            "accepted": self.accepted,
        }


@dataclass
class WitnessSearch:
    vertex: int
    p: float
    eps0: float
    found: bool
    radius: Optional[int] = None
    result: Optional[PhiResult] = None
    trajectory: List[PhiEvaluation] = field(default_factory=list)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "vertex": self.vertex,
            "p": self.p,
            "found": self.found,
            "radius": self.radius,
            "phi": None if self.result is None else self.result.to_dict(),
            "trajectory": [e.to_row() for e in self.trajectory],
        }


@dataclass
class SubcriticalCertificate:
    p: float
    eps0: float
    witnesses: Dict[int, WitnessSearch] = field(default_factory=dict)

    @property
    def complete(self) -> bool:
        return bool(self.witnesses) and all(w.found for w in self.witnesses.values())

    def to_dict(self) -> Dict[str, Any]:
        return {
            "p": self.p,
            "eps0": self.eps0,
            "complete": self.complete,
            "witnesses": {str(v): w.to_dict() for v, w in sorted(self.witnesses.items())},
        }


@dataclass
class PcBound:
    p_lower: float
    eps0: float
    r_max: int
    tolerance: float
    vertices: List[int]
    certificate: Optional[SubcriticalCertificate]
    evaluations: List[PhiEvaluation] = field(default_factory=list)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "p_lower": self.p_lower,
            "eps0": self.eps0,
            "r_max": self.r_max,
            "tolerance": self.tolerance,
            "vertices": self.vertices,
            "certificate": None if self.certificate is None else self.certificate.to_dict(),
            "evaluations": [e.to_row() for e in self.evaluations],
        }


@dataclass
class PepeCheck:
    ok: bool
    violations: List[str]
    lhs: Optional[float] = None
    rhs: Optional[float] = None


@dataclass
class AuditReport:
    w: int
    p1: float
    eps1: float
    q_grid: List[float]
    r_max: int
    passed: bool
    checks: List[Dict[str, Any]] = field(default_factory=list)
    label: str = AUDIT_LABEL

    def to_dict(self) -> Dict[str, Any]:
        return {
            "w": self.w,
            "p1": self.p1,
            "eps1": self.eps1,
            "q_grid": self.q_grid,
            "r_max": self.r_max,
            "passed": self.passed,
            "label": self.label,
            "checks": self.checks,
        }


def _exact_p(p: float, method: Method):
    # decimal p as an exact rational so exact phi values are exact rationals
    return Fraction(str(p)) if method != Method.MC else p


def find_witness(
    view: GraphView,
    v: int,
    p: float,
    eps0: float,
    r_max: int,
    params: Optional[PercolationParams] = None,
    method: Method = Method.AUTO,
    exact_cap: Optional[int] = None,
    endpoint_interior: bool = True,
    requires_source_open: bool = True,
    pool: Optional[WorkerPool] = None,
) -> WitnessSearch:
    """
    Smallest radius r <= r_max with phi_p^v(B(v, r)) <= 1 - eps0.

    Exact values are accepted on their value, Monte Carlo values only when the
    whole CI lies at or below 1 - eps0. A failed search carries the trajectory.
    """
    if not 0 < eps0 < 1:
        raise ParameterError(f"eps0 must lie in (0, 1), got {eps0}", constraint="0 < eps0 < 1")
    if r_max < 1:
        raise ParameterError("r_max must be >= 1", constraint="r_max >= 1")
    view.require_live(v)
    try:
        view.require_complete(v, r_max)
    except TruncationError:
        raise TruncationError(f"witness search to radius {r_max} around {v} exhausts the truncation")

    cap = settings.EXACT_CAP if exact_cap is None else exact_cap
    params = params or PercolationParams(p=p, confidence=settings.CONFIDENCE_LEVEL)
    threshold = 1.0 - eps0
    search = WitnessSearch(vertex=v, p=p, eps0=eps0, found=False)
    for radius in range(1, r_max + 1):
        query = ball_query(
            view, v, radius, _exact_p(p, method),
            method=method,
            params=params.at(p),
            exact_cap=cap,
            endpoint_interior=endpoint_interior,
            requires_source_open=requires_source_open,
        )
        result = phi(query, pool)
        accepted = result.upper <= threshold
        search.trajectory.append(PhiEvaluation(vertex=v, p=p, radius=radius, result=result, accepted=accepted))
        if accepted:
            search.found = True
            search.radius = radius
            search.result = result
            logger.debug(f"Witness for v={v} at p={p:.4f}: r={radius}, phi={result.upper:.6f}")
            return search

    logger.debug(f"No witness for v={v} at p={p:.4f} up to r={r_max}")
    return search


def subcritical_certificate(
    view: GraphView,
    vertices: Sequence[int],
    p: float,
    eps0: float,
    r_max: int,
    **options: Any,
) -> SubcriticalCertificate:
    """Witness search for every vertex of the family at one p"""
    certificate = SubcriticalCertificate(p=p, eps0=eps0)
    for v in vertices:
        search = find_witness(view, v, p, eps0, r_max, **options)
        certificate.witnesses[v] = search
        if not search.found:
            break
    return certificate


def pc_lower_bound(
    view: GraphView,
    vertices: Sequence[int],
    eps0: float,
    r_max: int,
    tolerance: float = 0.01,
    **options: Any,
) -> PcBound:
    """
    Largest p on a bisection grid at which every vertex of the family has a
    witness. For transitive graphs a single origin is a sufficient family.

    Returns 0 (with a warning) when even p = tolerance has no certificate.
    """
    if not 0 < tolerance < 0.5:
        raise ParameterError(f"tolerance must lie in (0, 0.5), got {tolerance}", constraint="0 < tolerance < 0.5")
    vertices = list(vertices) or [view.origin]
    evaluations: List[PhiEvaluation] = []

    def certify(p: float) -> SubcriticalCertificate:
        cert = subcritical_certificate(view, vertices, p, eps0, r_max, **options)
        for search in cert.witnesses.values():
            evaluations.extend(search.trajectory)
        logger.info(f"p={p:.4f}: {'certified' if cert.complete else 'not certified'}")
        return cert

    lo, hi = tolerance, 1.0
    best = certify(lo)
    if not best.complete:
        logger.warning(f"No subcritical certificate even at p={lo}; returning 0")
        return PcBound(0.0, eps0, r_max, tolerance, vertices, None, evaluations)

    while hi - lo > tolerance:
        mid = round((lo + hi) / 2.0, 12)
        cert = certify(mid)
        if cert.complete:
            lo, best = mid, cert
        else:
            hi = mid

    logger.info(f"✅ Threshold lower bound {lo:.4f} (eps0={eps0}, r_max={r_max})")
    return PcBound(lo, eps0, r_max, tolerance, vertices, best, evaluations)


def check_pepe(
    p: float,
    p1: float,
    eps: float,
    eps1: float,
    pc_tilde: float,
    allow_zero_eps1: bool = False,
) -> PepeCheck:
    """
    p1 in (p~c, p), eps1 in (0, eps) and
    ((1-p)/(1-p1))^(1-eps1) < ((1-p)/(1-p~c))^(1-eps).
    """
    violations: List[str] = []
    if not pc_tilde < p1 < p:
        violations.append(f"p1 in (p~c, p): {p1} not in ({pc_tilde}, {p})")
    low_ok = eps1 >= 0 if allow_zero_eps1 else eps1 > 0
    if not (low_ok and eps1 < eps):
        violations.append(f"eps1 in (0, eps): {eps1} not in (0, {eps})")

    lhs = rhs = None
    if 0 < p < 1 and 0 < p1 < 1 and 0 < pc_tilde < 1:
        lhs = ((1 - p) / (1 - p1)) ** (1 - eps1)
        rhs = ((1 - p) / (1 - pc_tilde)) ** (1 - eps)
        if not lhs < rhs:
            violations.append(f"((1-p)/(1-p1))^(1-eps1) < ((1-p)/(1-p~c))^(1-eps): {lhs:.6g} >= {rhs:.6g}")
    return PepeCheck(ok=not violations, violations=violations, lhs=lhs, rhs=rhs)


def connection_lower_bound(sp: SupercriticalParams) -> float:
    """1 - ((1-p)/(1-p1))^(1-eps1); eps1 = 0 is accepted as the closed limit"""
    if not sp.p1 < sp.p:
        raise ParameterError(f"p1 < p violated: p1={sp.p1}, p={sp.p}", constraint="p1 < p")
    if sp.eps is not None and sp.pc_tilde is not None:
        check = check_pepe(sp.p, sp.p1, sp.eps, sp.eps1, sp.pc_tilde, allow_zero_eps1=True)
        if not check.ok:
            raise ParameterError(check.violations[0], constraint=check.violations[0].split(":")[0])
    return 1.0 - ((1.0 - sp.p) / (1.0 - sp.p1)) ** (1.0 - sp.eps1)


def audit_supercritical_witness(
    view: GraphView,
    w: int,
    p1: float,
    eps1: float,
    q_grid: Optional[Sequence[float]] = None,
    r_max: int = 3,
    params: Optional[PercolationParams] = None,
    method: Method = Method.AUTO,
    exact_cap: Optional[int] = None,
    pool: Optional[WorkerPool] = None,
) -> AuditReport:
    """
    Bounded audit of phi_q^w(B(w, r)) > 1 - eps1 for q on a grid and r <= r_max.

    Only balls inside the truncation are checked; the result is labeled as an
    audit, never as a proof.
    """
    grid = sorted({float(q) for q in (q_grid if q_grid is not None else np.linspace(p1, min(0.99, p1 + 0.2), 3))})
    if any(q < p1 for q in grid):
        raise ParameterError("audit grid must satisfy q >= p1", constraint="q >= p1")
    threshold = 1.0 - eps1
    report = AuditReport(w=w, p1=p1, eps1=eps1, q_grid=grid, r_max=r_max, passed=True)
    cap = settings.EXACT_CAP if exact_cap is None else exact_cap
    params = params or PercolationParams(p=p1, confidence=settings.CONFIDENCE_LEVEL)

    for q in grid:
        for radius in range(1, r_max + 1):
            try:
                query = ball_query(
                    view, w, radius, _exact_p(q, method),
                    method=method,
                    params=params.at(q),
                    exact_cap=cap,
                )
                result = phi(query, pool)
            except TruncationError:
                report.checks.append({"q": q, "radius": radius, "skipped": "truncation"})
                break
            lower = float(result.value) if result.ci_low is None else result.ci_low
            ok = lower > threshold
            report.checks.append({"q": q, "radius": radius, "phi": lower, "ok": ok})
            if not ok:
                report.passed = False
                logger.debug(f"Audit of w={w} failed at q={q}, r={radius}: phi={lower:.6f}")
                return report
    return report
