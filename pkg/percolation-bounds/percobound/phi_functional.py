#!/usr/bin/env python3
"""
Local Functional
phi_p^v(S): for each y in S with a neighbor outside S, the probability that v
joins a neighbor of y by an open path through the interior of S, summed over y

Features:
- Exact evaluation by enumerating interior configurations (rational output for Fraction p)
- Monte Carlo evaluation with one configuration shared by all terms
- Automatic method selection on the interior size
- Sensitivity switches for the path-endpoint and source-open conventions
"""

import logging
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Dict, FrozenSet, Iterable, List, Optional, Union

from .config import settings
from .errors import ParameterError
from .estimates import Estimate, bounded_mean_interval
from .graph_core import GraphView, ball, interior
from .models import Method, PercolationParams
from .percolation_engine import EventSpec, estimates_from, exact_probability, outcomes
from .workers import WorkerPool

logger = logging.getLogger(__name__)

Probability = Union[float, Fraction]


@dataclass
class PhiQuery:
    view: GraphView
    v: int
    S: FrozenSet[int]
    p: Probability
    method: Method = Method.AUTO
    params: Optional[PercolationParams] = None  # required for Monte Carlo
    exact_cap: int = field(default_factory=lambda: settings.EXACT_CAP)
    endpoint_interior: bool = True
    requires_source_open: bool = True

    def __post_init__(self):
        self.S = frozenset(self.S)
        self.method = Method(self.method)
        if self.v not in self.S:
            raise ParameterError(f"vertex {self.v} is not in S", constraint="v in S")
        if not 0 < self.p < 1:
            raise ParameterError(f"p must lie in (0, 1), got {self.p}", constraint="0 < p < 1")


@dataclass
class PhiTerm:
    y: int
    probability: Probability
    ci_low: Optional[float] = None
    ci_high: Optional[float] = None

    def to_row(self, exact: bool) -> Dict[str, Any]:
        return {
            "y": self.y,
            "probability": float(self.probability),
            "exact": str(self.probability) if exact else "",
            "ci_low": "" if self.ci_low is None else self.ci_low,
            "ci_high": "" if self.ci_high is None else self.ci_high,
        }


@dataclass
class PhiResult:
    value: Probability
    terms: List[PhiTerm]
    method: Method
    interior_size: int
    ci_low: Optional[float] = None
    ci_high: Optional[float] = None
    replicas: Optional[int] = None
    confidence: Optional[float] = None

    @property
    def exact(self) -> bool:
        return self.method == Method.EXACT

    @property
    def upper(self) -> float:
        """Value used for acceptance: the point value when exact, else the upper CI"""
        return float(self.value) if self.ci_high is None else self.ci_high

    def to_dict(self) -> Dict[str, Any]:
        data = {
            "value": float(self.value),
            "method": self.method.value,
            "interior_size": self.interior_size,
            "terms": [t.to_row(self.exact) for t in self.terms],
        }
        if isinstance(self.value, Fraction):
            data["value_exact"] = str(self.value)
        if self.ci_high is not None:
            data.update(ci_low=self.ci_low, ci_high=self.ci_high, replicas=self.replicas, confidence=self.confidence)
        return data


def boundary_terms(view: GraphView, S: Iterable[int]) -> List[int]:
    """Members of S with at least one live neighbor outside S, in increasing id order"""
    members = frozenset(S)
    terms = []
    for y in sorted(members):
        view.require_live(y)
        view.require_complete(y)
        if any(w not in members for w in view.live_neighbors(y)):
            terms.append(y)
    return terms


def _term_events(q: PhiQuery, S_interior: FrozenSet[int], terms: List[int]) -> List[EventSpec]:
    return [
        EventSpec.connect(
            q.v,
            targets=q.view.live_neighbors(y),
            allowed=S_interior,
            requires_source_open=q.requires_source_open,
            endpoint_interior=q.endpoint_interior,
        )
        for y in terms
    ]


def _trivial(q: PhiQuery, S_interior: FrozenSet[int], method: Method) -> Optional[PhiResult]:
    if q.v in S_interior:
        return None
    one = Fraction(1) if isinstance(q.p, Fraction) else 1.0
    return PhiResult(value=one, terms=[], method=method, interior_size=len(S_interior))


def phi_exact(q: PhiQuery, pool: Optional[WorkerPool] = None) -> PhiResult:
    """Exact phi by enumerating the 2^|S°| interior configurations"""
    S_interior = interior(q.view, q.S)
    trivial = _trivial(q, S_interior, Method.EXACT)
    if trivial is not None:
        return trivial

    terms = boundary_terms(q.view, q.S)
    probabilities = exact_probability(q.view, _term_events(q, S_interior, terms), q.p, cap=q.exact_cap, pool=pool)
    zero = Fraction(0) if isinstance(q.p, Fraction) else 0.0
    value = sum(probabilities, zero)
    logger.debug(f"phi_exact v={q.v} |S|={len(q.S)} |S°|={len(S_interior)} -> {float(value):.6f}")
    return PhiResult(
        value=value,
        terms=[PhiTerm(y=y, probability=prob) for y, prob in zip(terms, probabilities)],
        method=Method.EXACT,
        interior_size=len(S_interior),
    )


def phi_mc(q: PhiQuery, pool: Optional[WorkerPool] = None) -> PhiResult:
    """
    Monte Carlo phi. Every replica evaluates all terms; the CI on the sum is
    taken over the per-replica row sums, each bounded by the number of terms.
    """
    if q.params is None:
        raise ParameterError("Monte Carlo phi needs replicas and seed", constraint="params for mc")
    S_interior = interior(q.view, q.S)
    trivial = _trivial(q, S_interior, Method.MC)
    if trivial is not None:
        return trivial

    params = q.params.at(float(q.p))
    terms = boundary_terms(q.view, q.S)
    matrix = outcomes(q.view, _term_events(q, S_interior, terms), params, pool)
    estimates: List[Estimate] = estimates_from(matrix, params.confidence)

    row_sums = matrix.sum(axis=1)
    value = float(row_sums.sum()) / params.replicas
    ci_low, ci_high = bounded_mean_interval(row_sums, float(len(terms)), params.confidence)
    return PhiResult(
        value=value,
        terms=[
            PhiTerm(y=y, probability=est.point, ci_low=est.ci_low, ci_high=est.ci_high)
            for y, est in zip(terms, estimates)
        ],
        method=Method.MC,
        interior_size=len(S_interior),
        ci_low=ci_low,
        ci_high=ci_high,
        replicas=params.replicas,
        confidence=params.confidence,
    )


def phi(q: PhiQuery, pool: Optional[WorkerPool] = None) -> PhiResult:
    """Dispatch on q.method; AUTO is exact when the interior fits exact_cap"""
    if q.method == Method.EXACT:
        return phi_exact(q, pool)
    if q.method == Method.MC:
        return phi_mc(q, pool)
    if len(interior(q.view, q.S)) <= q.exact_cap:
        return phi_exact(q, pool)
    return phi_mc(q, pool)


def ball_query(view: GraphView, v: int, radius: int, p: Probability, **options: Any) -> PhiQuery:
    """PhiQuery with S = B(v, radius)"""
    return PhiQuery(view=view, v=v, S=ball(view, v, radius), p=p, **options)
