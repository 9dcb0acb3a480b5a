#!/usr/bin/env python3
"""
Packing Certifier
Greedy lower bounds on the (p, eps, c)-packing number of a vertex set by
iterative puncturing

Features:
- Ball-vs-proxy disconnection test with pathwise event containment asserted
- Connection-to-infinity test, analytic when a supercritical audit passes,
  otherwise through the inner-boundary proxy
- Stabilization diagnostic between R_proxy and 2 R_proxy
- Disjoint dependency sets asserted at certification time
- Memoizing packing-number oracle for parameter grids
"""

import logging
import sys
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
from tqdm import tqdm

from .config import settings
from .errors import InvariantViolation, ParameterError, TruncationError
from .estimates import Estimate
from .graph_core import GraphView, ball, puncture
from .models import CtdMode, PercolationParams, SupercriticalParams, WilMethod
from .pc_estimator import AuditReport, audit_supercritical_witness, connection_lower_bound
from .percolation_engine import disconnection_profile, estimates_from
from .workers import WorkerPool

logger = logging.getLogger(__name__)


class LocalProfile:
    """Coupled disconnection outcomes of {w} from inner boundaries of B(w, r) for several r"""

    def __init__(self, radii: Sequence[int], matrix: np.ndarray, confidence: float):
        self.radii = list(radii)
        self.matrix = matrix
        self.confidence = confidence
        self._index = {r: i for i, r in enumerate(self.radii)}
        self._estimates = dict(zip(self.radii, estimates_from(matrix, confidence)))

    def column(self, radius: int) -> np.ndarray:
        return self.matrix[:, self._index[radius]]

    def disconnection(self, radius: int) -> Estimate:
        return self._estimates[radius]

    def connection(self, radius: int) -> Estimate:
        return self._estimates[radius].complement()


class ProfileCache:
    """Profiles keyed by (removed set, w, radii, seed, replicas, p); they do not depend on eps or c"""

    def __init__(self):
        self._store: Dict[Tuple, LocalProfile] = {}
        self.hits = 0

    def get(
        self,
        view: GraphView,
        w: int,
        radii: Sequence[int],
        params: PercolationParams,
        pool: Optional[WorkerPool] = None,
    ) -> LocalProfile:
        radii = tuple(sorted(set(radii)))
        key = (view.removed, w, radii, params.seed, params.replicas, params.p, params.confidence)
        if key in self._store:
            self.hits += 1
            return self._store[key]
        matrix, _ = disconnection_profile(view, {w}, radii, params, pool, center=w)
        profile = LocalProfile(radii, matrix, params.confidence)
        self._store[key] = profile
        return profile


@dataclass
class CtdCheck:
    w: int
    D: int
    mode: CtdMode
    disc_ball: Estimate
    disc_inf: Estimate
    disc_inf_double: Estimate
    excess: Optional[Estimate]
    stabilized: bool
    passed: bool
    reason: str

    def to_dict(self) -> Dict[str, Any]:
        return {
            "w": self.w,
            "D": self.D,
            "mode": self.mode.value,
            "disc_ball": self.disc_ball.model_dump(),
            "disc_inf": self.disc_inf.model_dump(),
            "disc_inf_double": self.disc_inf_double.model_dump(),
            "excess": None if self.excess is None else self.excess.model_dump(),
            "stabilized": self.stabilized,
            "passed": self.passed,
            "reason": self.reason,
        }


@dataclass
class WilCheck:
    w: int
    passed: bool
    method: WilMethod
    estimate: Optional[Estimate] = None
    estimate_double: Optional[Estimate] = None
    bound: Optional[float] = None
    audit: Optional[AuditReport] = None
    definitive: bool = True
    label: str = ""

    def to_dict(self) -> Dict[str, Any]:
        return {
            "w": self.w,
            "passed": self.passed,
            "method": self.method.value,
            "estimate": None if self.estimate is None else self.estimate.model_dump(),
            "estimate_double": None if self.estimate_double is None else self.estimate_double.model_dump(),
            "bound": self.bound,
            "audit": None if self.audit is None else self.audit.to_dict(),
            "definitive": self.definitive,
            "label": self.label,
        }


@dataclass
class PackingRequest:
    view: GraphView
    S: Sequence[int]
    p: float
    eps: float
    c: float
    d_min: int
    d_max: int
    r_proxy: int
    params: PercolationParams
    spacing: int = 1
    ctd_mode: CtdMode = CtdMode.MARGINAL
    supercritical: Optional[SupercriticalParams] = None
    audit_radius: int = 3
    requires_source_open: bool = True

    def __post_init__(self):
        self.ctd_mode = CtdMode(self.ctd_mode)
        if not 0 < self.eps < 1:
            raise ParameterError(f"eps must lie in (0, 1), got {self.eps}", constraint="0 < eps < 1")
        if not 0 < self.c < 1:
            raise ParameterError(f"c must lie in (0, 1), got {self.c}", constraint="0 < c < 1")
        if not 1 <= self.d_min <= self.d_max:
            raise ParameterError(f"need 1 <= D_min <= D_max, got {self.d_min}, {self.d_max}", constraint="D_min <= D_max")
        if not self.r_proxy > self.d_max:
            raise ParameterError(f"R_proxy must exceed D_max, got {self.r_proxy}", constraint="R_proxy > D_max")
        if self.spacing < 1:
            raise ParameterError("spacing must be >= 1", constraint="spacing >= 1")

    @property
    def radii(self) -> List[int]:
        return list(range(self.d_min, self.d_max + 1)) + [self.r_proxy, 2 * self.r_proxy]

    def summary(self) -> Dict[str, Any]:
        return {
            "graph": self.view.spec.label,
            "p": self.p,
            "eps": self.eps,
            "c": self.c,
            "d_min": self.d_min,
            "d_max": self.d_max,
            "r_proxy": self.r_proxy,
            "spacing": self.spacing,
            "ctd_mode": self.ctd_mode.value,
            "seed": self.params.seed,
            "replicas": self.params.replicas,
            "confidence": self.params.confidence,
            "candidates": len(self.S),
            "supercritical": None if self.supercritical is None else self.supercritical.model_dump(),
        }


@dataclass
class PackingStep:
    index: int
    w: int
    D: int
    ctd: CtdCheck
    wil: WilCheck
    dependency: List[int]

    @property
    def est_disc_ball(self) -> Estimate:
        return self.ctd.disc_ball

    @property
    def est_disc_inf(self) -> Estimate:
        return self.ctd.disc_inf

    @property
    def est_conn_inf(self) -> Optional[Estimate]:
        return self.wil.estimate

    def to_row(self) -> Dict[str, Any]:
        return {
            "step": self.index,
            "vertex": self.w,
            "radius": self.D,
            "disc_ball": self.ctd.disc_ball.point,
            "disc_inf": self.ctd.disc_inf.point,
            "disc_inf_double": self.ctd.disc_inf_double.point,
            "conn_inf": "" if self.wil.estimate is None else self.wil.estimate.point,
            "ctd_pass": self.ctd.passed,
            "wil_pass": self.wil.passed,
            "wil_method": self.wil.method.value,
        }

    def to_dict(self) -> Dict[str, Any]:
        return {
            "index": self.index,
            "w": self.w,
            "D": self.D,
            "ctd": self.ctd.to_dict(),
            "wil": self.wil.to_dict(),
            "dependency": self.dependency,
        }


@dataclass
class PackingCertificate:
    request: Dict[str, Any]
    steps: List[PackingStep] = field(default_factory=list)
    rejections: List[Dict[str, Any]] = field(default_factory=list)
    statistical_checks: int = 0

    @property
    def k(self) -> int:
        return sum(1 for s in self.steps if s.ctd.passed and s.wil.passed)

    @property
    def family_confidence(self) -> float:
        """Union-bound confidence that every statistical check on record is valid"""
        level = self.request.get("confidence", settings.CONFIDENCE_LEVEL)
        return max(0.0, 1.0 - self.statistical_checks * (1.0 - level))

    def to_dict(self) -> Dict[str, Any]:
        return {
            "request": self.request,
            "k": self.k,
            "steps": [s.to_dict() for s in self.steps],
            "rejections": self.rejections,
            "confidence": {
                "per_check": self.request.get("confidence"),
                "statistical_checks": self.statistical_checks,
                "family_lower_bound": self.family_confidence,
            },
            "dependency_sets_disjoint": True,
        }


def candidates(view: GraphView, S: Sequence[int], spacing: int = 1) -> List[int]:
    """Every spacing-th element of S, ordered by distance from the origin then id"""
    picked = list(S)[::spacing]
    return sorted(picked, key=lambda v: (view.depth(v), v))


def check_ctd(
    view: GraphView,
    w: int,
    D: int,
    r_proxy: int,
    eps: float,
    params: PercolationParams,
    mode: CtdMode = CtdMode.MARGINAL,
    profile: Optional[LocalProfile] = None,
    stabilization_fraction: Optional[float] = None,
    pool: Optional[WorkerPool] = None,
) -> CtdCheck:
    """
    P(w not joined to the inner boundary of B(w, R_proxy)) within a factor
    (1 + eps) of the same event for B(w, D), tested conservatively on coupled
    configurations. The lower inequality holds on every replica and is asserted.
    """
    mode = CtdMode(mode)
    fraction = settings.STABILIZATION_FRACTION if stabilization_fraction is None else stabilization_fraction
    if profile is None:
        profile = ProfileCache().get(view, w, [D, r_proxy, 2 * r_proxy], params, pool)

    ball_col = profile.column(D)
    inf_col = profile.column(r_proxy)
    if (ball_col & ~inf_col).any():
        raise InvariantViolation(f"ball disconnection without proxy disconnection at w={w}, D={D}")

    disc_ball = profile.disconnection(D)
    disc_inf = profile.disconnection(r_proxy)
    disc_double = profile.disconnection(2 * r_proxy)
    stabilized = abs(disc_double.point - disc_inf.point) <= fraction * eps * disc_ball.point

    excess = None
    if ball(view, w, D) == ball(view, w, 2 * r_proxy):
        passed, reason = True, "identical events"
    elif mode == CtdMode.PAIRED:
        excess = Estimate.from_counts(int((inf_col & ~ball_col).sum()), len(inf_col), params.confidence)
        passed = excess.ci_high <= eps * disc_ball.ci_low
        reason = "paired excess within eps" if passed else "paired excess too large"
    else:
        passed = disc_inf.ci_high <= (1.0 + eps) * disc_ball.ci_low
        reason = "ratio within 1 + eps" if passed else "ratio above 1 + eps"

    if passed and not stabilized:
        passed, reason = False, "proxy not stabilized between R_proxy and 2 R_proxy"
    return CtdCheck(
        w=w, D=D, mode=mode,
        disc_ball=disc_ball, disc_inf=disc_inf, disc_inf_double=disc_double,
        excess=excess, stabilized=stabilized, passed=passed, reason=reason,
    )


def check_wil(
    view: GraphView,
    w: int,
    r_proxy: int,
    p: float,
    c: float,
    params: PercolationParams,
    supercritical: Optional[SupercriticalParams] = None,
    audit_radius: int = 3,
    requires_source_open: bool = True,
    profile: Optional[LocalProfile] = None,
    pool: Optional[WorkerPool] = None,
) -> WilCheck:
    """
    P(w joined to infinity) >= c.

    The analytic bound is used when (p1, eps1) are supplied and the bounded
    audit passes at w. Otherwise the inner-boundary proxy, which bounds the
    probability from above: a proxy below c is a definitive fail, a proxy
    above c is a labeled "proxy pass".
    """
    if requires_source_open and c > p:
        return WilCheck(w=w, passed=False, method=WilMethod.SOURCE_OPEN, bound=p,
                        label="c exceeds p; w must be open")

    if supercritical is not None:
        audit = audit_supercritical_witness(
            view, w, supercritical.p1, supercritical.eps1, r_max=audit_radius, params=params, pool=pool,
        )
        if audit.passed:
            bound = connection_lower_bound(supercritical.model_copy(update={"p": p}))
            return WilCheck(w=w, passed=bound >= c, method=WilMethod.ANALYTIC, bound=bound,
                            audit=audit, label=audit.label)
        logger.debug(f"Supercritical audit failed at w={w}; using the proxy")

    if profile is None:
        profile = ProfileCache().get(view, w, [r_proxy, 2 * r_proxy], params, pool)
    estimate = profile.connection(r_proxy)
    double = profile.connection(2 * r_proxy)
    if estimate.ci_low >= c:
        return WilCheck(w=w, passed=True, method=WilMethod.PROXY, estimate=estimate,
                        estimate_double=double, definitive=False, label="proxy pass")
    if estimate.ci_high < c:
        return WilCheck(w=w, passed=False, method=WilMethod.PROXY, estimate=estimate,
                        estimate_double=double, label="definitive fail")
    return WilCheck(w=w, passed=False, method=WilMethod.PROXY, estimate=estimate,
                    estimate_double=double, definitive=False, label="inconclusive")


def _assert_disjoint(steps: Sequence[PackingStep]) -> None:
    seen: Dict[int, int] = {}
    for step in steps:
        for v in step.dependency:
            if v in seen:
                raise InvariantViolation(f"dependency sets of steps {seen[v]} and {step.index} share vertex {v}")
            seen[v] = step.index


def certify_packing(
    req: PackingRequest,
    cache: Optional[ProfileCache] = None,
    pool: Optional[WorkerPool] = None,
) -> PackingCertificate:
    """
    Greedy packing: sweep candidates, accept w with the smallest D in
    [D_min, D_max] passing both checks, puncture B(w, D), continue.
    """
    cache = cache or ProfileCache()
    params = req.params.at(req.p)
    certificate = PackingCertificate(request=req.summary())
    view = req.view
    sweep = candidates(view, req.S, req.spacing)

    for w in tqdm(sweep, desc="packing", leave=False, disable=not sys.stderr.isatty()):
        if not view.is_live(w):
            certificate.rejections.append({"w": w, "reason": "inside a removed ball"})
            continue
        try:
            profile = cache.get(view, w, req.radii, params, pool)
            wil = check_wil(
                view, w, req.r_proxy, req.p, req.c, params,
                supercritical=req.supercritical,
                audit_radius=req.audit_radius,
                requires_source_open=req.requires_source_open,
                profile=profile,
                pool=pool,
            )
            certificate.statistical_checks += 1 if wil.method == WilMethod.PROXY else 0
            if not wil.passed:
                certificate.rejections.append({"w": w, "reason": f"connection check: {wil.label}"})
                logger.info(f"Candidate {w} rejected: connection check {wil.label}")
                continue

            accepted = None
            for D in range(req.d_min, req.d_max + 1):
                ctd = check_ctd(view, w, D, req.r_proxy, req.eps, params, req.ctd_mode, profile=profile, pool=pool)
                certificate.statistical_checks += 2
                if ctd.passed:
                    accepted = ctd
                    break
        except TruncationError as e:
            certificate.rejections.append({"w": w, "reason": str(e)})
            logger.warning(f"Candidate {w} skipped: {e}")
            continue

        if accepted is None:
            certificate.rejections.append({"w": w, "reason": f"no D in [{req.d_min}, {req.d_max}] passes"})
            logger.info(f"Candidate {w} rejected: no passing D")
            continue

        D = accepted.D
        step = PackingStep(
            index=len(certificate.steps) + 1,
            w=w,
            D=D,
            ctd=accepted,
            wil=wil,
            dependency=sorted(ball(view, w, D)),
        )
        if wil.method == WilMethod.ANALYTIC and accepted.disc_ball.ci_low > 1.0 - req.c:
            logger.warning(f"Step {step.index}: ball disconnection {accepted.disc_ball.point:.4f} exceeds 1 - c")
        certificate.steps.append(step)
        view = puncture(view, [(w, D)])
        logger.info(f"✅ Step {step.index}: w={w}, D={D}, k={certificate.k}")

    _assert_disjoint(certificate.steps)
    logger.info(f"Packing certificate: k={certificate.k} from {len(sweep)} candidates")
    return certificate


class PackingOracle:
    """
    Certified packing numbers k(delta, c) for one set, p and search window.
    Certificates are memoized per (delta, c) and local profiles are shared.
    """

    def __init__(
        self,
        view: GraphView,
        S: Sequence[int],
        p: float,
        params: PercolationParams,
        d_min: int = 1,
        d_max: int = 3,
        r_proxy: int = 16,
        spacing: int = 1,
        ctd_mode: CtdMode = CtdMode.MARGINAL,
        supercritical: Optional[SupercriticalParams] = None,
        pool: Optional[WorkerPool] = None,
    ):
        self.view = view
        self.S = list(S)
        self.p = p
        self.params = params
        self.d_min = d_min
        self.d_max = d_max
        self.r_proxy = r_proxy
        self.spacing = spacing
        self.ctd_mode = CtdMode(ctd_mode)
        self.supercritical = supercritical
        self.pool = pool
        self.cache = ProfileCache()
        self.certificates: Dict[Tuple[float, float], PackingCertificate] = {}
        self.logger = logging.getLogger(__name__)

    def __call__(self, delta: float, c: float) -> int:
        return self.certificate(delta, c).k

    def certificate(self, delta: float, c: float) -> PackingCertificate:
        key = (delta, c)
        if key not in self.certificates:
            self.logger.debug(f"Certifying packing at delta={delta}, c={c:.6f}")
            request = PackingRequest(
                view=self.view, S=self.S, p=self.p, eps=delta, c=c,
                d_min=self.d_min, d_max=self.d_max, r_proxy=self.r_proxy,
                params=self.params, spacing=self.spacing, ctd_mode=self.ctd_mode,
                supercritical=self.supercritical,
            )
            self.certificates[key] = certify_packing(request, cache=self.cache, pool=self.pool)
        return self.certificates[key]
