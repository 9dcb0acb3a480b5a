#!/usr/bin/env python3
"""
Percolation Engine
Bernoulli site configurations, connectivity queries and probability estimation

Features:
- Counter-based per-vertex uniforms: (seed, replica, vertex id) fixes the draw,
  so configurations are coupled across p, truncation radius and puncturing
- Batched event evaluation by open-cluster labeling over replica blocks
- Exact probabilities by full enumeration of small event domains
- Replica and enumeration work units run on the shared worker pool; results
  are independent of worker count and scheduling
"""

import logging
import math
from collections import deque
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from typing import Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy import sparse
from scipy.sparse.csgraph import connected_components

from .config import MAX_EXACT_CAP, settings
from .errors import ExactCapError, InvariantViolation, ParameterError
from .estimates import Estimate
from .graph_core import GraphView, ball, inner_boundary, sorted_ids, vertices_matching
from .models import PercolationParams
from .workers import WorkerPool, get_worker_pool

logger = logging.getLogger(__name__)

Probability = Union[float, Fraction]


def replica_uniforms(seed: int, replica: int, width: int) -> np.ndarray:
    """Uniforms of vertex ids 0..width-1 in one replica; entry i depends only on (seed, replica, i)"""
    bitgen = np.random.Philox(key=seed, counter=[0, replica, 0, 0])
    return np.random.Generator(bitgen).random(width)


@dataclass(frozen=True, eq=False)
class Configuration:
    """Open vertices of one replica, regenerable from (seed, replica_index)"""
    view: GraphView
    open: frozenset
    p: float
    seed: int
    replica_index: int

    def is_open(self, v: int) -> bool:
        return v in self.open


def sample(view: GraphView, params: PercolationParams, replica_index: int) -> Configuration:
    """Declare every live vertex inside the truncation open with probability p"""
    ids = sorted_ids(vertices_matching(view, lambda v, coords: True))
    uniforms = replica_uniforms(params.seed, replica_index, view.id_space)
    opened = ids[uniforms[ids] < params.p] if ids.size else ids
    return Configuration(
        view=view,
        open=frozenset(int(v) for v in opened),
        p=params.p,
        seed=params.seed,
        replica_index=replica_index,
    )


def connects(
    cfg: Configuration,
    v: int,
    targets: Iterable[int],
    allowed: Optional[Iterable[int]] = None,
    endpoint_interior: bool = True,
    requires_source_open: bool = True,
) -> bool:
    """
    Open path from v to a target inside `allowed`, by breadth-first search.

    With endpoint_interior=False the final vertex of the path may be any open
    target adjacent to the allowed region.
    """
    view = cfg.view
    view.require_live(v)
    targets = frozenset(targets)
    allowed = None if allowed is None else frozenset(allowed)

    def inside(u: int) -> bool:
        return allowed is None or u in allowed

    if not inside(v):
        return False
    if requires_source_open and v not in cfg.open:
        return False

    seen = {v}
    queue = deque([v])
    while queue:
        u = queue.popleft()
        if u in targets:
            return True
        for w in view.live_neighbors(u):
            if w in seen or w not in cfg.open:
                continue
            if inside(w):
                seen.add(w)
                queue.append(w)
            elif not endpoint_interior and w in targets:
                return True
    return False


# ---------------------------------------------------------------------------
# Events
# ---------------------------------------------------------------------------

class EventKind(str, Enum):
    CONNECT = "connect"
    DISCONNECT_ALL = "disconnect_all"


@dataclass(frozen=True)
class EventSpec:
    """connect(v, targets, allowed) or disconnect_all(S, targets, allowed)"""
    kind: EventKind
    sources: frozenset
    targets: frozenset
    allowed: Optional[frozenset] = None
    requires_source_open: bool = True
    endpoint_interior: bool = True

    def __post_init__(self):
        if not self.targets:
            raise ParameterError("event targets must be nonempty", constraint="targets nonempty")
        if self.kind == EventKind.CONNECT and len(self.sources) != 1:
            raise ParameterError("connect events have exactly one source", constraint="single source")

    @classmethod
    def connect(cls, v: int, targets: Iterable[int], allowed: Optional[Iterable[int]] = None,
                requires_source_open: bool = True, endpoint_interior: bool = True) -> "EventSpec":
        return cls(
            kind=EventKind.CONNECT,
            sources=frozenset([v]),
            targets=frozenset(targets),
            allowed=None if allowed is None else frozenset(allowed),
            requires_source_open=requires_source_open,
            endpoint_interior=endpoint_interior,
        )

    @classmethod
    def disconnect_all(cls, S: Iterable[int], targets: Iterable[int], allowed: Optional[Iterable[int]] = None,
                       requires_source_open: bool = True, endpoint_interior: bool = True) -> "EventSpec":
        return cls(
            kind=EventKind.DISCONNECT_ALL,
            sources=frozenset(S),
            targets=frozenset(targets),
            allowed=None if allowed is None else frozenset(allowed),
            requires_source_open=requires_source_open,
            endpoint_interior=endpoint_interior,
        )


@dataclass
class _Member:
    index: int
    disconnect: bool
    sources: np.ndarray
    targets: np.ndarray
    exterior_targets: np.ndarray  # union-domain columns
    exterior_anchors: np.ndarray  # group-local allowed neighbors, aligned with exterior_targets


@dataclass
class _Group:
    cols: np.ndarray
    forced: np.ndarray
    edges: np.ndarray
    members: List[_Member] = field(default_factory=list)


@dataclass
class CompiledEvents:
    """Events lowered onto one sorted vertex domain; rows of an open matrix are configurations of it"""
    domain: np.ndarray
    groups: List[_Group]
    n_events: int

    @property
    def width(self) -> int:
        return int(self.domain.max()) + 1 if self.domain.size else 0

    def evaluate(self, open_matrix: np.ndarray) -> np.ndarray:
        """Per-configuration outcomes (rows) of every event (columns)"""
        m = open_matrix.shape[0]
        result = np.zeros((m, self.n_events), dtype=bool)
        for group in self.groups:
            active = open_matrix[:, group.cols].copy()
            if group.forced.size:
                active[:, group.forced] = True
            labels, n_labels = label_clusters(active, group.edges)

            for member in group.members:
                hit = np.zeros(n_labels, dtype=bool)
                if member.targets.size:
                    reached = active[:, member.targets]
                    hit[labels[:, member.targets][reached]] = True
                if member.exterior_targets.size:
                    reached = open_matrix[:, member.exterior_targets] & active[:, member.exterior_anchors]
                    hit[labels[:, member.exterior_anchors][reached]] = True
                if member.sources.size:
                    src = member.sources
                    connected = (active[:, src] & hit[labels[:, src]]).any(axis=1)
                else:
                    connected = np.zeros(m, dtype=bool)
                result[:, member.index] = ~connected if member.disconnect else connected
        return result


def label_clusters(active: np.ndarray, edges: np.ndarray) -> Tuple[np.ndarray, int]:
    """Open-cluster labels of a block of configurations; labels are unique across rows"""
    m, size = active.shape
    if edges.size == 0 or m == 0 or size == 0:
        return np.arange(m * size).reshape(m, size), m * size
    both = active[:, edges[:, 0]] & active[:, edges[:, 1]]
    rows, which = np.nonzero(both)
    offset = rows * size
    graph = sparse.coo_matrix(
        (np.ones(len(which), dtype=np.int8), (offset + edges[which, 0], offset + edges[which, 1])),
        shape=(m * size, m * size),
    ).tocsr()
    n_labels, labels = connected_components(graph, directed=False)
    return labels.reshape(m, size), n_labels


def compile_events(view: GraphView, events: Sequence[EventSpec]) -> CompiledEvents:
    """Group events by allowed region and forced sources, and index them on a common domain"""
    full_region: Optional[frozenset] = None
    plans = []
    for event in events:
        for v in event.sources:
            view.require_live(v)
        if event.allowed is not None:
            region = frozenset(u for u in event.allowed if view.is_live(u))
        else:
            if full_region is None:
                full_region = vertices_matching(view, lambda v, coords: True)
            region = full_region
        forced = frozenset() if event.requires_source_open else event.sources & region
        targets = frozenset(t for t in event.targets if view.is_live(t))
        interior_targets = targets & region
        exterior = []
        if not event.endpoint_interior:
            for t in sorted(targets - region):
                exterior.extend((t, a) for a in view.live_neighbors(t) if a in region)
        plans.append((event, region, forced, interior_targets, exterior))

    domain_set = set()
    for _, region, _, _, exterior in plans:
        domain_set |= region
        domain_set.update(t for t, _ in exterior)
    domain = sorted_ids(domain_set)
    column = {int(v): i for i, v in enumerate(domain)}

    groups = {}
    for index, (event, region, forced, interior_targets, exterior) in enumerate(plans):
        key = (region, forced)
        if key not in groups:
            members = sorted(region)
            local = {v: i for i, v in enumerate(members)}
            edge_list = []
            for u in members:
                view.require_complete(u)
                edge_list.extend((local[u], local[w]) for w in view.live_neighbors(u) if w in local and u < w)
            groups[key] = (_Group(
                cols=np.array([column[v] for v in members], dtype=np.int64),
                forced=np.array(sorted(local[v] for v in forced), dtype=np.int64),
                edges=np.array(edge_list, dtype=np.int64).reshape(-1, 2),
            ), local)
        group, local = groups[key]
        group.members.append(_Member(
            index=index,
            disconnect=event.kind == EventKind.DISCONNECT_ALL,
            sources=np.array(sorted(local[v] for v in event.sources if v in local), dtype=np.int64),
            targets=np.array(sorted(local[v] for v in interior_targets), dtype=np.int64),
            exterior_targets=np.array([column[t] for t, _ in exterior], dtype=np.int64),
            exterior_anchors=np.array([local[a] for _, a in exterior], dtype=np.int64),
        ))

    return CompiledEvents(domain=domain, groups=[g for g, _ in groups.values()], n_events=len(plans))


# ---------------------------------------------------------------------------
# Monte Carlo
# ---------------------------------------------------------------------------

def replica_ranges(replicas: int, width: int) -> List[Tuple[int, int]]:
    """Replica index ranges sized so one work unit materializes at most SAMPLE_BUDGET uniforms"""
    chunk = max(1, min(settings.REPLICA_CHUNK, settings.SAMPLE_BUDGET // max(width, 1)))
    return [(start, min(start + chunk, replicas)) for start in range(0, replicas, chunk)]


def compiled_outcomes(
    compiled: CompiledEvents,
    params: PercolationParams,
    pool: Optional[WorkerPool] = None,
) -> np.ndarray:
    """Outcome matrix (replicas x events) of pre-compiled events"""
    width = compiled.width

    def unit(bounds: Tuple[int, int]) -> np.ndarray:
        start, stop = bounds
        block = np.empty((stop - start, compiled.domain.size))
        for row, replica in enumerate(range(start, stop)):
            block[row] = replica_uniforms(params.seed, replica, width)[compiled.domain]
        return compiled.evaluate(block < params.p)

    blocks = (pool or get_worker_pool()).map_ordered(unit, replica_ranges(params.replicas, width))
    return np.vstack(blocks)


def outcomes(
    view: GraphView,
    events: Sequence[EventSpec],
    params: PercolationParams,
    pool: Optional[WorkerPool] = None,
) -> np.ndarray:
    """Per-replica outcomes of several events on shared configurations"""
    return compiled_outcomes(compile_events(view, events), params, pool)


def estimates_from(matrix: np.ndarray, confidence: float) -> List[Estimate]:
    replicas = matrix.shape[0]
    return [Estimate.from_counts(int(col.sum()), replicas, confidence) for col in matrix.T]


def mc_estimate(
    view: GraphView,
    event: EventSpec,
    params: PercolationParams,
    pool: Optional[WorkerPool] = None,
) -> Estimate:
    """Probability of one event over `replicas` coupled configurations"""
    matrix = outcomes(view, [event], params, pool)
    return estimates_from(matrix, params.confidence)[0]


# ---------------------------------------------------------------------------
# Exact enumeration
# ---------------------------------------------------------------------------

def exact_counts(compiled: CompiledEvents, pool: Optional[WorkerPool] = None) -> np.ndarray:
    """
    counts[e, j]: number of configurations of the domain with j open vertices
    in which event e holds. Work units are prefix ranges of configuration indices.
    """
    n = int(compiled.domain.size)
    total = 1 << n
    bits = np.arange(n, dtype=np.int64)

    def unit(start: int) -> np.ndarray:
        index = np.arange(start, min(start + settings.ENUMERATION_CHUNK, total), dtype=np.int64)
        block = ((index[:, None] >> bits) & 1).astype(bool)
        open_count = block.sum(axis=1)
        result = compiled.evaluate(block)
        return np.stack([
            np.bincount(open_count[result[:, e]], minlength=n + 1)
            for e in range(compiled.n_events)
        ]).reshape(compiled.n_events, n + 1)

    blocks = (pool or get_worker_pool()).map_ordered(unit, range(0, total, settings.ENUMERATION_CHUNK))
    return np.sum(blocks, axis=0, dtype=np.int64)


def polynomial_value(counts: Sequence[int], p: Probability) -> Probability:
    """Sum of counts[j] p^j (1-p)^(n-j); exact when p is a Fraction"""
    n = len(counts) - 1
    if isinstance(p, Fraction):
        return sum((Fraction(int(c)) * p**j * (1 - p) ** (n - j) for j, c in enumerate(counts)), Fraction(0))
    return math.fsum(int(c) * p**j * (1 - p) ** (n - j) for j, c in enumerate(counts))


def exact_probability(
    view: GraphView,
    events: Sequence[EventSpec],
    p: Probability,
    cap: Optional[int] = None,
    pool: Optional[WorkerPool] = None,
) -> List[Probability]:
    """Probabilities of events by enumerating every configuration of their common domain"""
    if not 0 <= p <= 1:
        raise ParameterError(f"p must lie in [0, 1], got {p}", constraint="0 <= p <= 1")
    if not events:
        return []
    cap = settings.EXACT_CAP if cap is None else cap
    if not 1 <= cap <= MAX_EXACT_CAP:
        raise ParameterError(f"exact cap must lie in [1, {MAX_EXACT_CAP}], got {cap}", constraint="exact cap range")
    compiled = compile_events(view, events)
    if compiled.domain.size > cap:
        raise ExactCapError(int(compiled.domain.size), cap)
    counts = exact_counts(compiled, pool)
    return [polynomial_value(row, p) for row in counts]


# ---------------------------------------------------------------------------
# Truncated disconnection
# ---------------------------------------------------------------------------

def ball_disconnection_event(view: GraphView, center: int, S: Iterable[int], radius: int) -> Optional[EventSpec]:
    """
    No vertex of S joins the inner boundary of B(center, radius) inside the ball.
    None when the ball has no inner boundary, in which case disconnection is sure.
    """
    region = ball(view, center, radius)
    targets = inner_boundary(view, center, radius)
    S = frozenset(S)
    if not targets or not S:
        return None
    return EventSpec.disconnect_all(S, targets, allowed=region)


def _require_inside(view: GraphView, center: int, S: frozenset, radius: int) -> None:
    if radius < 1:
        raise ParameterError("radius must be >= 1", constraint="R >= 1")
    inner = ball(view, center, radius - 1)
    outside = S - inner
    if outside:
        raise ParameterError(
            f"{len(outside)} vertices of S lie outside B({center}, {radius - 1})",
            constraint="S inside B(center, R-1)",
        )


def disconnection_profile(
    view: GraphView,
    S: Iterable[int],
    radii: Sequence[int],
    params: PercolationParams,
    pool: Optional[WorkerPool] = None,
    center: Optional[int] = None,
) -> Tuple[np.ndarray, List[Estimate]]:
    """
    Truncated disconnection of S at several radii on the same configurations,
    measured from the inner boundaries of B(center, R) (center defaults to the origin).

    Returns the outcome matrix (replicas x radii, radii sorted ascending) and
    one estimate per radius; raises InvariantViolation if an outcome ever
    decreases with the radius.
    """
    S = frozenset(S)
    radii = sorted(radii)
    if not radii:
        raise ParameterError("at least one radius is required", constraint="radii nonempty")
    center = view.origin if center is None else center
    _require_inside(view, center, S, radii[0])

    events, columns = [], []
    for radius in radii:
        event = ball_disconnection_event(view, center, S, radius)
        columns.append(None if event is None else len(events))
        if event is not None:
            events.append(event)

    matrix = np.ones((params.replicas, len(radii)), dtype=bool)
    if events:
        computed = outcomes(view, events, params, pool)
        for i, col in enumerate(columns):
            if col is not None:
                matrix[:, i] = computed[:, col]

    decreasing = (matrix[:, :-1] & ~matrix[:, 1:]).any(axis=0)
    if decreasing.any():
        bad = radii[int(np.argmax(decreasing))]
        raise InvariantViolation(f"truncated disconnection decreased after radius {bad} on a replica")

    logger.debug(f"Disconnection profile of |S|={len(S)} over radii {radii}")
    return matrix, estimates_from(matrix, params.confidence)


def truncated_disconnection(
    view: GraphView,
    S: Iterable[int],
    radius: int,
    params: PercolationParams,
    pool: Optional[WorkerPool] = None,
) -> Estimate:
    """Lower bound on P_p(S disconnected from infinity): no vertex of S reaches the inner boundary of B(origin, R)"""
    _, estimates = disconnection_profile(view, S, [radius], params, pool)
    return estimates[0]
