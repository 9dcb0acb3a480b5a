#!/usr/bin/env python3
"""
Graph Core
Finite truncations of infinite locally finite graphs, with balls, boundaries,
interiors and puncturing

A base truncation is materialized once per GraphSpec: every vertex within
graph distance R_max of the origin plus a one-layer halo, so neighbor lists of
all vertices within R_max are complete. Views share the base and differ only in
their removed set; they are immutable and safe to share between workers.
"""

import itertools
import logging
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Callable, Dict, FrozenSet, Iterable, List, Optional, Sequence, Tuple

import networkx as nx
import numpy as np
from pydantic import BaseModel, Field, model_validator

from .errors import DeadVertexError, GraphFormatError, ParameterError, TruncationError

logger = logging.getLogger(__name__)

VertexId = int
VertexSet = FrozenSet[int]
Coords = Tuple[int, ...]


class GraphFamily(str, Enum):
    """Concrete graph families"""
    LATTICE = "lattice"
    TREE = "tree"
    FILE = "file"


class GraphSpec(BaseModel):
    """Description of a graph instance and its truncation"""

    family: GraphFamily
    dimension: Optional[int] = Field(None, ge=1, description="Lattice dimension d")
    offspring: Optional[int] = Field(None, ge=1, description="Tree offspring count b")
    path: Optional[str] = Field(None, description="Adjacency file")
    truncation_radius: int = Field(..., ge=0, description="R_max around the origin")
    origin: int = Field(0, ge=0)

    # recorded for file graphs
    vertex_count: Optional[int] = None
    edge_count: Optional[int] = None
    max_degree: Optional[int] = None

    @model_validator(mode="after")
    def family_fields(self) -> "GraphSpec":
        if self.family == GraphFamily.LATTICE and self.dimension is None:
            raise ValueError("lattice requires dimension >= 1")
        if self.family == GraphFamily.TREE and self.offspring is None:
            raise ValueError("tree requires offspring count >= 1")
        if self.family == GraphFamily.FILE and not self.path:
            raise ValueError("file graph requires a path")
        if self.family != GraphFamily.FILE and self.origin != 0:
            raise ValueError("lattice and tree origins are vertex 0")
        return self

    @property
    def label(self) -> str:
        if self.family == GraphFamily.LATTICE:
            return f"lattice:{self.dimension}"
        if self.family == GraphFamily.TREE:
            return f"tree:{self.offspring}"
        return f"file:{self.path}"

    @classmethod
    def from_flag(cls, flag: str, truncation_radius: Optional[int], origin: int = 0) -> "GraphSpec":
        """
        Parse `lattice:<d>`, `tree:<b>` or `file:<path>`. File graphs default to
        the eccentricity of their origin as truncation radius.
        """
        family, _, arg = flag.partition(":")
        if truncation_radius is None and family != GraphFamily.FILE.value:
            raise ParameterError(f"{flag} needs a truncation radius", constraint="R_max given")
        try:
            if family == GraphFamily.LATTICE.value:
                return cls(family=GraphFamily.LATTICE, dimension=int(arg), truncation_radius=truncation_radius)
            if family == GraphFamily.TREE.value:
                return cls(family=GraphFamily.TREE, offspring=int(arg), truncation_radius=truncation_radius)
            if family == GraphFamily.FILE.value:
                loaded = load_graph(arg, origin=origin)
                if truncation_radius is None:
                    return loaded
                return loaded.model_copy(update={"truncation_radius": truncation_radius})
        except ValueError as e:
            if isinstance(e, ParameterError):
                raise
            raise ParameterError(f"invalid graph flag {flag!r}: {e}", constraint="graph flag")
        raise ParameterError(f"unknown graph family in {flag!r}", constraint="graph flag")


@dataclass(frozen=True, eq=False)
class BaseGraph:
    """Materialized truncation shared by every view of one lineage"""
    spec: GraphSpec
    graph: nx.Graph
    adjacency: Dict[int, Tuple[int, ...]]
    depth: Dict[int, int]
    id_space: int
    coords: Optional[Dict[int, Coords]] = None
    coord_index: Optional[Dict[Coords, int]] = None
    complete_radius: Optional[int] = None  # None: the whole graph is loaded


class GraphView:
    """A base truncation with a set of removed (punctured) vertices"""

    __slots__ = ("base", "removed", "_restricted")

    def __init__(self, base: BaseGraph, removed: Iterable[int] = ()):
        self.base = base
        self.removed: VertexSet = frozenset(removed)
        self._restricted = None

    def __repr__(self) -> str:
        return f"GraphView({self.base.spec.label}, R_max={self.truncation_radius}, removed={len(self.removed)})"

    @property
    def spec(self) -> GraphSpec:
        return self.base.spec

    @property
    def origin(self) -> int:
        return self.base.spec.origin

    @property
    def truncation_radius(self) -> int:
        return self.base.spec.truncation_radius

    @property
    def id_space(self) -> int:
        """Exclusive upper bound on vertex ids; the length of a uniform draw vector"""
        return self.base.id_space

    @property
    def restricted(self) -> nx.Graph:
        """Read-only networkx view without the removed vertices"""
        if self._restricted is None:
            self._restricted = nx.restricted_view(self.base.graph, self.removed, [])
        return self._restricted

    def is_live(self, v: int) -> bool:
        return v in self.base.adjacency and v not in self.removed

    def require_live(self, v: int) -> None:
        if not self.is_live(v):
            raise DeadVertexError(v)

    def depth(self, v: int) -> int:
        """Distance from the origin in the unpunctured base graph"""
        return self.base.depth[v]

    def coords(self, v: int) -> Optional[Coords]:
        return self.base.coords[v] if self.base.coords is not None else None

    def require_complete(self, v: int, reach: int = 0) -> None:
        """Fail loudly when vertices within `reach` of v may lie beyond the truncation"""
        limit = self.base.complete_radius
        if limit is not None and self.base.depth[v] + reach > limit:
            raise TruncationError(
                f"vertex {v} at depth {self.base.depth[v]} with reach {reach} exceeds R_max={limit}"
            )

    def live_neighbors(self, v: int) -> Tuple[int, ...]:
        return tuple(u for u in self.base.adjacency[v] if u not in self.removed)


# ---------------------------------------------------------------------------
# Base construction
# ---------------------------------------------------------------------------

def _lattice_base(spec: GraphSpec) -> BaseGraph:
    d = spec.dimension
    outer = spec.truncation_radius + 1
    span = range(-outer, outer + 1)
    points = [pt for pt in itertools.product(span, repeat=d) if sum(abs(x) for x in pt) <= outer]
    points.sort(key=lambda pt: (sum(abs(x) for x in pt), pt))
    coord_index = {pt: i for i, pt in enumerate(points)}

    graph = nx.Graph()
    graph.add_nodes_from(range(len(points)))
    for pt, i in coord_index.items():
        for axis in range(d):
            step = list(pt)
            step[axis] += 1
            j = coord_index.get(tuple(step))
            if j is not None:
                graph.add_edge(i, j)

    coords = {i: pt for pt, i in coord_index.items()}
    depth = {i: sum(abs(x) for x in pt) for i, pt in coords.items()}
    return _finish_base(spec, graph, depth, coords=coords, coord_index=coord_index,
                        complete_radius=spec.truncation_radius)


def _tree_base(spec: GraphSpec) -> BaseGraph:
    # balanced_tree labels vertices in breadth-first order with root 0
    graph = nx.balanced_tree(spec.offspring, spec.truncation_radius + 1)
    depth = nx.single_source_shortest_path_length(graph, 0)
    return _finish_base(spec, graph, depth, complete_radius=spec.truncation_radius)


def _file_base(spec: GraphSpec) -> BaseGraph:
    graph, origin = read_graph_file(spec.path, origin=spec.origin)
    depth = nx.single_source_shortest_path_length(graph, origin)
    return _finish_base(spec, graph, depth, complete_radius=None)


def _finish_base(spec, graph, depth, coords=None, coord_index=None, complete_radius=None) -> BaseGraph:
    adjacency = {v: tuple(sorted(graph.adj[v])) for v in graph.nodes}
    id_space = max(adjacency) + 1 if adjacency else 0
    logger.info(
        f"Materialized {spec.label}: {graph.number_of_nodes()} vertices, "
        f"{graph.number_of_edges()} edges, R_max={spec.truncation_radius}"
    )
    return BaseGraph(
        spec=spec,
        graph=graph,
        adjacency=adjacency,
        depth=dict(depth),
        id_space=id_space,
        coords=coords,
        coord_index=coord_index,
        complete_radius=complete_radius,
    )


def build_view(spec: GraphSpec) -> GraphView:
    """Materialize the base truncation of spec and return its unpunctured view"""
    builders = {
        GraphFamily.LATTICE: _lattice_base,
        GraphFamily.TREE: _tree_base,
        GraphFamily.FILE: _file_base,
    }
    return GraphView(builders[spec.family](spec))


# ---------------------------------------------------------------------------
# Graph files
# ---------------------------------------------------------------------------

def read_graph_file(path: str, origin: Optional[int] = None) -> Tuple[nx.Graph, int]:
    """
    Parse an adjacency file and return the origin's connected component.

    Format: first line `vertices N origin ID`, then one undirected edge `u v`
    per line. Blank lines and `#` comments are ignored. IDs lie in [0, N).
    """
    try:
        lines = Path(path).read_text(encoding="utf-8").splitlines()
    except OSError as e:
        raise GraphFormatError(f"cannot read {path}: {e}")

    content = [(n, line.split("#", 1)[0].strip()) for n, line in enumerate(lines, start=1)]
    content = [(n, text) for n, text in content if text]
    if not content:
        raise GraphFormatError("no vertices")

    header_line, header = content[0]
    parts = header.split()
    if len(parts) != 4 or parts[0] != "vertices" or parts[2] != "origin":
        raise GraphFormatError("header must read 'vertices N origin ID'", line=header_line)
    try:
        count, file_origin = int(parts[1]), int(parts[3])
    except ValueError:
        raise GraphFormatError("vertex count and origin must be integers", line=header_line)
    if count <= 0:
        raise GraphFormatError("no vertices", line=header_line)
    if not 0 <= file_origin < count:
        raise GraphFormatError(f"origin {file_origin} outside [0, {count})", line=header_line)

    graph = nx.Graph()
    graph.add_nodes_from(range(count))
    for n, text in content[1:]:
        fields = text.split()
        if len(fields) != 2:
            raise GraphFormatError(f"expected 'u v', got {text!r}", line=n)
        try:
            u, v = int(fields[0]), int(fields[1])
        except ValueError:
            raise GraphFormatError(f"non-integer vertex id in {text!r}", line=n)
        if not (0 <= u < count and 0 <= v < count):
            raise GraphFormatError(f"vertex id outside [0, {count}) in {text!r}", line=n)
        if u == v:
            raise GraphFormatError(f"self-loop at vertex {u}", line=n)
        if graph.has_edge(u, v):
            raise GraphFormatError(f"duplicate edge {u} {v}", line=n)
        graph.add_edge(u, v)

    chosen = file_origin if origin is None else origin
    if chosen not in graph:
        raise GraphFormatError(f"origin {chosen} is not a vertex")
    component = nx.node_connected_component(graph, chosen)
    if count > 1 and len(component) == 1:
        raise GraphFormatError(f"disconnected origin: vertex {chosen} has no edges")
    if len(component) < count:
        logger.warning(f"Loaded the origin's component only: {len(component)} of {count} vertices")
    return graph.subgraph(component).copy(), chosen


def load_graph(path: str, origin: Optional[int] = None) -> GraphSpec:
    """Load and validate a graph file; returns a GraphSpec with its recorded statistics"""
    graph, chosen = read_graph_file(path, origin=origin)
    eccentricity = max(nx.single_source_shortest_path_length(graph, chosen).values())
    max_degree = max((deg for _, deg in graph.degree), default=0)
    logger.info(f"Loaded {path}: {graph.number_of_nodes()} vertices, {graph.number_of_edges()} edges")
    return GraphSpec(
        family=GraphFamily.FILE,
        path=str(path),
        origin=chosen,
        truncation_radius=eccentricity,
        vertex_count=graph.number_of_nodes(),
        edge_count=graph.number_of_edges(),
        max_degree=max_degree,
    )


# ---------------------------------------------------------------------------
# Operations
# ---------------------------------------------------------------------------

def neighbors(g: GraphView, v: int) -> Tuple[int, ...]:
    """All live vertices adjacent to v, in increasing id order"""
    g.require_live(v)
    g.require_complete(v)
    return g.live_neighbors(v)


def _distances(g: GraphView, v: int, radius: int) -> Dict[int, int]:
    g.require_live(v)
    if radius < 0:
        raise ParameterError(f"radius must be >= 0, got {radius}", constraint="D >= 0")
    g.require_complete(v, radius)
    return nx.single_source_shortest_path_length(g.restricted, v, cutoff=radius)


def ball(g: GraphView, v: int, radius: int) -> VertexSet:
    """Live vertices within distance `radius` of v, distances measured in the view"""
    return frozenset(_distances(g, v, radius))


def inner_boundary(g: GraphView, v: int, radius: int) -> VertexSet:
    """Vertices of B(v, radius) with at least one live neighbor outside the ball"""
    members = ball(g, v, radius)
    return frozenset(
        u for u in members
        if any(w not in members for w in g.live_neighbors(u))
    )


def interior(g: GraphView, S: Iterable[int]) -> VertexSet:
    """S°: members of S all of whose live neighbors are in S"""
    members = frozenset(S)
    result = []
    for u in members:
        g.require_live(u)
        g.require_complete(u)
        if all(w in members for w in g.live_neighbors(u)):
            result.append(u)
    return frozenset(result)


def puncture(g: GraphView, balls: Sequence[Tuple[int, int]]) -> GraphView:
    """
    New view with the listed balls removed; g itself is unchanged.

    Balls are measured in g. A center already removed in g contributes nothing,
    which makes repeated puncturing idempotent.
    """
    added = set()
    for center, radius in balls:
        if not g.is_live(center):
            logger.debug(f"Puncture center {center} already removed; skipped")
            continue
        added |= ball(g, center, radius)
    if not added:
        return g
    return GraphView(g.base, g.removed | added)


def distance(g: GraphView, u: int, v: int) -> Optional[int]:
    """
    Graph distance in the view, or None when u and v are disconnected.

    On a truncated view the shortest path must stay inside the complete region,
    and disconnection is only reported when one side's component lies there.
    """
    g.require_live(u)
    g.require_live(v)
    try:
        d = nx.shortest_path_length(g.restricted, u, v)
    except nx.NetworkXNoPath:
        limit = g.base.complete_radius
        if limit is None:
            return None
        for w in (u, v):
            if all(g.depth(x) <= limit for x in nx.node_connected_component(g.restricted, w)):
                return None
        raise TruncationError(f"vertices {u} and {v} may connect beyond R_max={limit}")
    g.require_complete(u if g.depth(u) <= g.depth(v) else v, d)
    return d


def vertex_at(g: GraphView, coords: Sequence[int]) -> int:
    """Vertex id of lattice coordinates"""
    if g.base.coord_index is None:
        raise ParameterError(f"{g.spec.label} has no coordinates", constraint="lattice family")
    key = tuple(int(x) for x in coords)
    if len(key) != g.spec.dimension:
        raise ParameterError(f"expected {g.spec.dimension} coordinates, got {len(key)}", constraint="dimension")
    if key not in g.base.coord_index:
        raise TruncationError(f"coordinates {key} lie beyond the materialized truncation")
    return g.base.coord_index[key]


def vertices_matching(
    g: GraphView,
    predicate: Callable[[int, Optional[Coords]], bool],
) -> VertexSet:
    """
    Finite generator for a (possibly infinite) vertex set: all live vertices
    within R_max of the origin for which predicate(id, coords) holds.
    """
    limit = g.base.complete_radius
    return frozenset(
        v for v in g.base.adjacency
        if v not in g.removed
        and (limit is None or g.base.depth[v] <= limit)
        and predicate(v, g.coords(v))
    )


def segment(g: GraphView, length: int, axis: int = 0) -> Tuple[int, ...]:
    """
    Lattice segment of `length` consecutive vertices along `axis`, centered at
    the origin: coordinate x runs from -(length // 2) to length - length // 2 - 1.
    """
    if g.spec.family != GraphFamily.LATTICE:
        raise ParameterError("segments are defined on lattices only", constraint="lattice family")
    if length < 0:
        raise ParameterError("segment length must be >= 0", constraint="length >= 0")
    if not 0 <= axis < g.spec.dimension:
        raise ParameterError(f"axis {axis} outside dimension {g.spec.dimension}", constraint="axis")
    start = -(length // 2)
    result: List[int] = []
    for x in range(start, start + length):
        point = [0] * g.spec.dimension
        point[axis] = x
        v = vertex_at(g, point)
        g.require_complete(v)
        if g.is_live(v):
            result.append(v)
    return tuple(result)


def sorted_ids(S: Iterable[int]) -> np.ndarray:
    """Deterministic array form of a vertex set"""
    return np.array(sorted(S), dtype=np.int64)
