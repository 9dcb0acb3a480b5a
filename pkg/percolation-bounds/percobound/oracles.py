"""
Independent reference values: branching-process survival, the one-dimensional
functional, recursive path enumeration and square-lattice crossing probabilities.

Nothing here calls the percolation engine's event machinery, so the values can
be used to check it.
"""

import logging
from fractions import Fraction
from typing import List, Union

import numpy as np

from .errors import ParameterError
from .estimates import Estimate
from .graph_core import GraphView
from .percolation_engine import label_clusters

logger = logging.getLogger(__name__)

Probability = Union[float, Fraction]

ENUMERATION_LIMIT = 16


def branching_survival(b: int, p: float, iterations: int = 10_000, tol: float = 1e-14) -> float:
    """
    P(root joined to infinity) on the rooted b-ary tree: p * s with s the
    largest fixed point of s = 1 - (1 - p s)^b. Zero when b p <= 1.
    """
    if b < 1 or not 0 <= p <= 1:
        raise ParameterError(f"need b >= 1 and p in [0, 1], got b={b}, p={p}", constraint="b >= 1, 0 <= p <= 1")
    if b * p <= 1:
        return 0.0
    s = 1.0
    for _ in range(iterations):
        nxt = 1.0 - (1.0 - p * s) ** b
        if abs(nxt - s) < tol:
            s = nxt
            break
        s = nxt
    return p * s


def line_phi(p: Probability, r: int) -> Probability:
    """phi_p^0(B(0, r)) on Z: the two end terms each need r consecutive open sites"""
    if r < 1:
        raise ParameterError("r must be >= 1", constraint="r >= 1")
    return 2 * p**r


def phi_by_path_enumeration(view: GraphView, v: int, S, p: Probability) -> Probability:
    """
    phi_p^v(S) by recursing over open/closed states of the interior and
    searching paths in each full assignment.
    """
    S = frozenset(S)
    if v not in S:
        raise ParameterError(f"vertex {v} is not in S", constraint="v in S")
    adjacency = {u: view.live_neighbors(u) for u in S}
    inner = sorted(u for u in S if all(w in S for w in adjacency[u]))
    if v not in inner:
        return Fraction(1) if isinstance(p, Fraction) else 1.0
    if len(inner) > ENUMERATION_LIMIT:
        raise ParameterError(f"interior of {len(inner)} vertices is too large to enumerate",
                             constraint=f"|S°| <= {ENUMERATION_LIMIT}")
    inner_set = frozenset(inner)
    boundary = [y for y in sorted(S) if any(w not in S for w in adjacency[y])]

    def reached(open_set: frozenset) -> frozenset:
        if v not in open_set:
            return frozenset()
        seen, stack = {v}, [v]
        while stack:
            u = stack.pop()
            for w in adjacency[u]:
                if w in open_set and w not in seen:
                    seen.add(w)
                    stack.append(w)
        return frozenset(seen)

    def recurse(index: int, chosen: List[int], weight) -> Probability:
        if index == len(inner):
            cluster = reached(frozenset(chosen))
            hits = sum(1 for y in boundary if any(w in cluster for w in adjacency[y] if w in inner_set))
            return weight * hits
        u = inner[index]
        total = recurse(index + 1, chosen + [u], weight * p)
        total += recurse(index + 1, chosen, weight * (1 - p))
        return total

    return recurse(0, [], Fraction(1) if isinstance(p, Fraction) else 1.0)


def _box_edges(L: int) -> np.ndarray:
    index = np.arange(L * L).reshape(L, L)
    horizontal = np.stack([index[:, :-1].ravel(), index[:, 1:].ravel()], axis=1)
    vertical = np.stack([index[:-1, :].ravel(), index[1:, :].ravel()], axis=1)
    return np.concatenate([horizontal, vertical])


def crossing_probability(
    L: int,
    p: float,
    replicas: int = 400,
    seed: int = 0,
    confidence: float = 0.99,
    chunk: int = 64,
) -> Estimate:
    """Probability of an open left-right crossing of the L x L box of Z^2"""
    if L < 1:
        raise ParameterError("L must be >= 1", constraint="L >= 1")
    rng = np.random.default_rng(seed)
    edges = _box_edges(L)
    left = np.arange(L) * L
    right = left + (L - 1)
    successes = 0
    done = 0
    while done < replicas:
        m = min(chunk, replicas - done)
        active = rng.random((m, L * L)) < p
        labels, n_labels = label_clusters(active, edges)
        for row in range(m):
            lefts = set(labels[row, left][active[row, left]].tolist())
            if lefts and any(label in lefts for label in labels[row, right][active[row, right]].tolist()):
                successes += 1
        done += m
    return Estimate.from_counts(successes, replicas, confidence)


def crossing_threshold(
    L: int = 48,
    replicas: int = 400,
    seed: int = 0,
    tolerance: float = 0.005,
    low: float = 0.3,
    high: float = 0.9,
) -> float:
    """p at which the box crossing probability is 1/2, by bisection on a fixed seed"""
    while high - low > tolerance:
        mid = (low + high) / 2.0
        if crossing_probability(L, mid, replicas, seed).point < 0.5:
            low = mid
        else:
            high = mid
    logger.debug(f"Crossing threshold for L={L}: {(low + high) / 2.0:.4f}")
    return (low + high) / 2.0
