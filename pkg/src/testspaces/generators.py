"""Generators for every test-space family: binary trees, forks, diamonds,
Laakso graphs, cycles, l1 tree products, and Heisenberg word-metric balls.

Diamond/Laakso constructions keep old vertex indices stable across levels so
the level-(n-1) -> level-n injection is the identity on indices; that makes
the weighted-family isometry checkable by index, not by search.
"""

from __future__ import annotations

import itertools
from collections import deque
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional

from .errors import CapExceededError, ValidationError
from .metric_core import MetricSpace, PointId, WeightedGraph, apsp

VERTEX_CAP_DEFAULT = 200_000


@dataclass(frozen=True)
class Weighting:
    """Edge-length convention: unit edges, or base^(-n) at level n."""

    mode: str  # "unit" | "scaled"
    base: Fraction = Fraction(2)

    def __post_init__(self):
        if self.mode not in ("unit", "scaled"):
            raise ValidationError(f"unknown weighting mode {self.mode!r}")
        if self.base <= 1:
            raise ValidationError("scale base must exceed 1")

    def edge_length(self, level: int) -> Fraction:
        if self.mode == "unit":
            return Fraction(1)
        return Fraction(1) / (self.base**level)


UNIT = Weighting("unit")


def diamond_weighting() -> Weighting:
    return Weighting("scaled", Fraction(2))


def laakso_weighting() -> Weighting:
    return Weighting("scaled", Fraction(4))


# ---------------------------------------------------------------------------
# Trees
# ---------------------------------------------------------------------------

def binary_tree(n: int, vertex_cap: int = VERTEX_CAP_DEFAULT) -> WeightedGraph:
    """Binary tree of depth n: vertices are 0/1 strings of length <= n,
    edges join a string to its one-letter extensions, unit lengths."""
    if n < 0:
        raise ValidationError("depth must be >= 0")
    if 2 ** (n + 1) - 1 > vertex_cap:
        raise CapExceededError(f"binary tree of depth {n} exceeds vertex cap {vertex_cap}")
    labels = [""]
    for depth in range(1, n + 1):
        labels.extend("".join(bits) for bits in itertools.product("01", repeat=depth))
    index = {lab: i for i, lab in enumerate(labels)}
    vertices = tuple(PointId(i, lab) for i, lab in enumerate(labels))
    edges = tuple(
        (index[lab[:-1]], index[lab], Fraction(1)) for lab in labels if lab
    )
    return WeightedGraph(vertices, edges)


def fork() -> WeightedGraph:
    """The 4-vertex fork: root a0, child a1, grandchildren a2 and a2'."""
    vertices = (PointId(0, "a0"), PointId(1, "a1"), PointId(2, "a2"), PointId(3, "a2'"))
    edges = ((0, 1, Fraction(1)), (1, 2, Fraction(1)), (1, 3, Fraction(1)))
    return WeightedGraph(vertices, edges)


def cycle(m: int) -> WeightedGraph:
    """Unit-length m-cycle."""
    if m < 3:
        raise ValidationError("cycle needs m >= 3")
    vertices = tuple(PointId(i) for i in range(m))
    edges = tuple((i, (i + 1) % m, Fraction(1)) for i in range(m))
    return WeightedGraph(vertices, edges)


# ---------------------------------------------------------------------------
# Recursive families (diamonds, Laakso graphs)
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Quad:
    """A quadrilateral introduced at some level of a diamond."""

    qid: int
    level: int
    ends: tuple[int, int]  # the replaced edge's endpoints
    a: int  # first middle vertex ("side 0")
    b: int  # second middle vertex ("side 1")


@dataclass(frozen=True)
class Gadget:
    """One 6-vertex Laakso replacement (two stems, two branches)."""

    gid: int
    level: int
    ends: tuple[int, int]
    stem_in: int
    left: int
    right: int
    stem_out: int


@dataclass(frozen=True)
class RecursiveFamily:
    """A diamond or Laakso instance with its construction metadata."""

    kind: str  # "diamond" | "laakso"
    level: int
    weighting: Weighting
    graph: WeightedGraph
    source: int
    sink: int
    vertex_counts: tuple[int, ...]  # V(0), V(1), ..., V(level)
    quads: tuple[Quad, ...] = ()
    gadgets: tuple[Gadget, ...] = ()
    # vertex index -> chain of (unit_id, side) from outermost to innermost
    chains: tuple[tuple[tuple[int, int], ...], ...] = ()


def diamond(n: int, w: Weighting = UNIT, vertex_cap: int = VERTEX_CAP_DEFAULT) -> RecursiveFamily:
    """Level-n diamond: recursively replace each edge by a quadrilateral."""
    if n < 0:
        raise ValidationError("level must be >= 0")
    # edge record: (u, v, chain)
    edges: list[tuple[int, int, tuple[tuple[int, int], ...]]] = [(0, 1, ())]
    chains: list[tuple[tuple[int, int], ...]] = [(), ()]
    counts = [2]
    quads: list[Quad] = []
    nverts = 2
    for level in range(1, n + 1):
        nverts += 2 * len(edges)
        if nverts > vertex_cap:
            raise CapExceededError(f"diamond level {n} exceeds vertex cap {vertex_cap}")
        new_edges = []
        for x, y, chain in edges:
            qid = len(quads)
            a = len(chains)
            chains.append(chain + ((qid, 0),))
            b = len(chains)
            chains.append(chain + ((qid, 1),))
            quads.append(Quad(qid, level, (x, y), a, b))
            ca, cb = chains[a], chains[b]
            new_edges += [(x, a, ca), (a, y, ca), (x, b, cb), (b, y, cb)]
        edges = new_edges
        counts.append(len(chains))
    length = w.edge_length(n)
    graph = WeightedGraph(
        tuple(PointId(i) for i in range(len(chains))),
        tuple((u, v, length) for u, v, _ in edges),
    )
    return RecursiveFamily(
        "diamond", n, w, graph, 0, 1, tuple(counts), tuple(quads), (), tuple(chains)
    )


def laakso(n: int, w: Weighting = UNIT, vertex_cap: int = VERTEX_CAP_DEFAULT) -> RecursiveFamily:
    """Level-n Laakso graph: recursively replace each edge by the 6-vertex
    gadget (stem, two parallel branches, stem), degree-1 gadget vertices
    identified with the edge's endpoints."""
    if n < 0:
        raise ValidationError("level must be >= 0")
    edges: list[tuple[int, int, tuple[tuple[int, int], ...]]] = [(0, 1, ())]
    chains: list[tuple[tuple[int, int], ...]] = [(), ()]
    counts = [2]
    gadgets: list[Gadget] = []
    for level in range(1, n + 1):
        if len(chains) + 4 * len(edges) > vertex_cap:
            raise CapExceededError(f"laakso level {n} exceeds vertex cap {vertex_cap}")
        new_edges = []
        for x, y, chain in edges:
            gid = len(gadgets)
            # side 0 = left branch, side 1 = right branch, side 2 = stem
            s1, left, right, s2 = range(len(chains), len(chains) + 4)
            chains += [
                chain + ((gid, 2),),
                chain + ((gid, 0),),
                chain + ((gid, 1),),
                chain + ((gid, 2),),
            ]
            gadgets.append(Gadget(gid, level, (x, y), s1, left, right, s2))
            new_edges += [
                (x, s1, chains[s1]),
                (s1, left, chains[left]),
                (s1, right, chains[right]),
                (left, s2, chains[left]),
                (right, s2, chains[right]),
                (s2, y, chains[s2]),
            ]
        edges = new_edges
        counts.append(len(chains))
    length = w.edge_length(n)
    graph = WeightedGraph(
        tuple(PointId(i) for i in range(len(chains))),
        tuple((u, v, length) for u, v, _ in edges),
    )
    return RecursiveFamily(
        "laakso", n, w, graph, 0, 1, tuple(counts), (), tuple(gadgets), tuple(chains)
    )


# ---------------------------------------------------------------------------
# l1 products of trees
# ---------------------------------------------------------------------------

def tree_product(depths: list[int], size_cap: int = 20_000) -> MetricSpace:
    """Cartesian product of binary trees with the l1 (sum) metric."""
    if not depths:
        raise ValidationError("need at least one tree depth")
    spaces = [apsp(binary_tree(d)) for d in depths]
    total = 1
    for s in spaces:
        total *= s.size
    if total > size_cap:
        raise CapExceededError(f"product size {total} exceeds cap {size_cap}")
    points = list(itertools.product(*[range(s.size) for s in spaces]))
    labels = tuple(
        "(" + ",".join(spaces[k].labels[p[k]] or "" for k in range(len(spaces))) + ")"
        for p in points
    )
    dist = tuple(
        tuple(
            sum((spaces[k].d(p[k], q[k]) for k in range(len(spaces))), Fraction(0))
            for q in points
        )
        for p in points
    )
    return MetricSpace(dist, labels)


# ---------------------------------------------------------------------------
# Heisenberg word-metric balls
# ---------------------------------------------------------------------------

# Group law for integer matrices [[1,a,c],[0,1,b],[0,0,1]] as triples (a,b,c):
# (a,b,c)*(a',b',c') = (a+a', b+b', c+c'+a*b').

HEIS_GENERATORS = ((1, 0, 0), (-1, 0, 0), (0, 1, 0), (0, -1, 0))


def heis_mul(g: tuple[int, int, int], h: tuple[int, int, int]) -> tuple[int, int, int]:
    return (g[0] + h[0], g[1] + h[1], g[2] + h[2] + g[0] * h[1])


def heis_inv(g: tuple[int, int, int]) -> tuple[int, int, int]:
    a, b, c = g
    return (-a, -b, a * b - c)


def heisenberg_word_lengths(radius: int) -> dict[tuple[int, int, int], int]:
    """Word lengths (w.r.t. x^{+-1}, y^{+-1}) of all elements within the
    given radius, by breadth-first search from the identity."""
    lengths = {(0, 0, 0): 0}
    frontier = deque([(0, 0, 0)])
    while frontier:
        g = frontier.popleft()
        d = lengths[g]
        if d == radius:
            continue
        for s in HEIS_GENERATORS:
            h = heis_mul(g, s)
            if h not in lengths:
                lengths[h] = d + 1
                frontier.append(h)
    return lengths


def heisenberg_ball(r: int, radius_cap: int = 8) -> MetricSpace:
    """All integer Heisenberg elements at word distance <= r from the
    identity, with exact pairwise word distances.

    d(u, v) is the group word length of u^{-1} v, read off a BFS of radius
    2r (pairwise distances can leave the ball but never exceed 2r).
    """
    if r < 0:
        raise ValidationError("radius must be >= 0")
    if r > radius_cap:
        raise CapExceededError(f"radius {r} exceeds cap {radius_cap} (ball grows ~ r^4)")
    lengths = heisenberg_word_lengths(2 * r)
    ball = sorted(g for g, d in lengths.items() if d <= r)
    ball.sort(key=lambda g: (lengths[g], g))
    labels = tuple(f"{a},{b},{c}" for a, b, c in ball)
    dist = tuple(
        tuple(Fraction(lengths[heis_mul(heis_inv(u), v)]) for v in ball) for u in ball
    )
    return MetricSpace(dist, labels)
