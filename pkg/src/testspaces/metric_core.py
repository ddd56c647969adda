"""Exact finite metric spaces and shortest-path machinery.

All distances are Fractions; floating point never enters this module.
Graphs are undirected with positive rational edge lengths.
"""

from __future__ import annotations

import heapq
import itertools
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Optional, Sequence

from .errors import CapExceededError, DisconnectedGraphError, ValidationError

GEODESIC_CAP_DEFAULT = 10**6


@dataclass(frozen=True)
class PointId:
    """A vertex: contiguous index plus an optional unique text label."""

    index: int
    label: Optional[str] = None


@dataclass(frozen=True)
class MetricSpace:
    """Finite point set with an exact pairwise distance table."""

    dist: tuple[tuple[Fraction, ...], ...]
    labels: Optional[tuple[Optional[str], ...]] = None

    @property
    def size(self) -> int:
        return len(self.dist)

    def d(self, i: int, j: int) -> Fraction:
        return self.dist[i][j]

    def index_of(self, label: str) -> int:
        if self.labels is None:
            raise ValidationError("space has no labels")
        return self.labels.index(label)

    def restrict(self, indices: Sequence[int]) -> "MetricSpace":
        """Subspace on the given points, in the given order."""
        rows = tuple(
            tuple(self.dist[i][j] for j in indices) for i in indices
        )
        labels = None
        if self.labels is not None:
            labels = tuple(self.labels[i] for i in indices)
        return MetricSpace(rows, labels)

    def scaled(self, factor: Fraction) -> "MetricSpace":
        if factor <= 0:
            raise ValidationError("scale factor must be positive")
        return MetricSpace(
            tuple(tuple(d * factor for d in row) for row in self.dist), self.labels
        )


@dataclass(frozen=True)
class WeightedGraph:
    """Undirected graph with positive rational edge lengths."""

    vertices: tuple[PointId, ...]
    edges: tuple[tuple[int, int, Fraction], ...]

    def __post_init__(self):
        n = len(self.vertices)
        for k, p in enumerate(self.vertices):
            if p.index != k:
                raise ValidationError(f"vertex indices must be contiguous, got {p.index} at {k}")
        labels = [p.label for p in self.vertices if p.label is not None]
        if len(labels) != len(set(labels)):
            raise ValidationError("vertex labels must be unique when present")
        seen = set()
        for u, v, w in self.edges:
            if u == v:
                raise ValidationError(f"self-loop at vertex {u}")
            if not (0 <= u < n and 0 <= v < n):
                raise ValidationError(f"edge ({u},{v}) out of range")
            if w <= 0:
                raise ValidationError(f"edge ({u},{v}) has non-positive length {w}")
            key = (min(u, v), max(u, v))
            if key in seen:
                raise ValidationError(f"duplicate undirected edge {key}")
            seen.add(key)

    @property
    def size(self) -> int:
        return len(self.vertices)

    def adjacency(self) -> list[list[tuple[int, Fraction]]]:
        adj: list[list[tuple[int, Fraction]]] = [[] for _ in self.vertices]
        for u, v, w in self.edges:
            adj[u].append((v, w))
            adj[v].append((u, w))
        return adj

    def labels(self) -> tuple[Optional[str], ...]:
        return tuple(p.label for p in self.vertices)


@dataclass(frozen=True)
class GeodesicPath:
    """A shortest path given combinatorially: vertices plus cumulative lengths."""

    vertices: tuple[int, ...]
    breakpoints: tuple[Fraction, ...]  # cumulative from 0, one per vertex

    @property
    def length(self) -> Fraction:
        return self.breakpoints[-1]

    def vertex_at(self, t: Fraction) -> Optional[int]:
        """Vertex sitting exactly at parameter t, or None if t is edge-interior."""
        lo, hi = 0, len(self.breakpoints) - 1
        while lo <= hi:
            mid = (lo + hi) // 2
            if self.breakpoints[mid] == t:
                return self.vertices[mid]
            if self.breakpoints[mid] < t:
                lo = mid + 1
            else:
                hi = mid - 1
        return None


def _dijkstra(adj: list[list[tuple[int, Fraction]]], src: int) -> list[Optional[Fraction]]:
    dist: list[Optional[Fraction]] = [None] * len(adj)
    heap: list[tuple[Fraction, int]] = [(Fraction(0), src)]
    while heap:
        d, u = heapq.heappop(heap)
        if dist[u] is not None:
            continue
        dist[u] = d
        for v, w in adj[u]:
            if dist[v] is None:
                heapq.heappush(heap, (d + w, v))
    return dist


def apsp(graph: WeightedGraph) -> MetricSpace:
    """All-pairs shortest-path metric of a connected graph, exact.

    Raises DisconnectedGraphError naming an unreachable pair.
    """
    adj = graph.adjacency()
    n = graph.size
    rows = []
    for src in range(n):
        dist = _dijkstra(adj, src)
        for v, d in enumerate(dist):
            if d is None:
                raise DisconnectedGraphError(src, v)
        rows.append(tuple(dist))
    return MetricSpace(tuple(rows), graph.labels())


@dataclass(frozen=True)
class MetricViolation:
    kind: str  # identity | symmetry | triangle
    where: tuple[int, ...]
    detail: str


@dataclass(frozen=True)
class MetricReport:
    valid: bool
    violations: tuple[MetricViolation, ...]


def verify_metric(space: MetricSpace) -> MetricReport:
    """Report every violated metric-axiom instance (never raises)."""
    d = space.dist
    n = space.size
    out: list[MetricViolation] = []
    for i in range(n):
        if d[i][i] != 0:
            out.append(MetricViolation("identity", (i, i), f"d({i},{i}) = {d[i][i]} != 0"))
    for i in range(n):
        for j in range(i + 1, n):
            if d[i][j] != d[j][i]:
                out.append(
                    MetricViolation("symmetry", (i, j), f"d({i},{j}) = {d[i][j]} != d({j},{i}) = {d[j][i]}")
                )
            if d[i][j] <= 0:
                out.append(MetricViolation("identity", (i, j), f"d({i},{j}) = {d[i][j]} not positive"))
    for i in range(n):
        for j in range(n):
            if i == j:
                continue
            for k in range(n):
                if k == i or k == j:
                    continue
                if d[i][j] > d[i][k] + d[k][j]:
                    out.append(
                        MetricViolation(
                            "triangle",
                            (i, j, k),
                            f"d({i},{j}) = {d[i][j]} > d({i},{k}) + d({k},{j}) = {d[i][k] + d[k][j]}",
                        )
                    )
    return MetricReport(valid=not out, violations=tuple(out))


def enumerate_geodesic_paths(
    graph: WeightedGraph,
    u: int,
    v: int,
    cap: int = GEODESIC_CAP_DEFAULT,
    space: Optional[MetricSpace] = None,
) -> list[GeodesicPath]:
    """All distinct shortest u-v vertex paths, sorted by vertex sequence.

    `space` may pass a precomputed apsp table.  Raises CapExceededError when
    more than `cap` geodesics exist.
    """
    if u == v:
        raise ValidationError("endpoints of a geodesic must differ")
    if space is None:
        space = apsp(graph)
    adj = graph.adjacency()
    total = space.d(u, v)
    results: list[GeodesicPath] = []

    # DFS extending only along prefix-shortest edges that can still reach v
    # on a geodesic.
    stack: list[tuple[tuple[int, ...], tuple[Fraction, ...]]] = [((u,), (Fraction(0),))]
    while stack:
        path, breaks = stack.pop()
        x = path[-1]
        cum = breaks[-1]
        if x == v:
            results.append(GeodesicPath(path, breaks))
            if len(results) > cap:
                raise CapExceededError(
                    f"more than {cap} geodesics between {u} and {v}"
                )
            continue
        for y, w in sorted(adj[x], reverse=True):
            if cum + w == space.d(u, y) and cum + w + space.d(y, v) == total:
                stack.append((path + (y,), breaks + (cum + w,)))
    results.sort(key=lambda g: g.vertices)
    return results


def path_graph(n: int) -> WeightedGraph:
    """Path on n vertices with unit edges (used as a Markov-convex baseline)."""
    if n < 1:
        raise ValidationError("path needs at least one vertex")
    verts = tuple(PointId(i) for i in range(n))
    edges = tuple((i, i + 1, Fraction(1)) for i in range(n - 1))
    return WeightedGraph(verts, edges)
