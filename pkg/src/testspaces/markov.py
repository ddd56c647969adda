"""Markov p-convexity functional: exact dynamic programming, Monte Carlo
estimation with per-term substreams, and the built-in walks (downward tree
walk, downhill diamond/Laakso walks, lazy path walk).

Time window: t runs over 1..T and k over 0..ceil(log2 T) with the chain
frozen at its start state for t <= 0.  The truncated left-hand sum is a
lower bound of the bilateral one, so (lhs/rhs)^(1/p) remains a valid lower
bound for the convexity constant.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional

import numpy as np

from .errors import CapExceededError, ValidationError
from .generators import RecursiveFamily, binary_tree
from .metric_core import MetricSpace, apsp, path_graph

TREE_VERTEX_CAP = 100_000


@dataclass(frozen=True)
class MarkovChain:
    """Finite chain: row-stochastic rational transition matrix, start state,
    horizon T (time runs 1..T; the chain sits at `start` for t <= 0)."""

    transition: tuple[tuple[Fraction, ...], ...]
    start: int
    horizon: int

    def __post_init__(self):
        n = len(self.transition)
        if not (0 <= self.start < n):
            raise ValidationError("start state out of range")
        if self.horizon < 1:
            raise ValidationError("horizon must be >= 1")
        for i, row in enumerate(self.transition):
            if len(row) != n:
                raise ValidationError("transition matrix must be square")
            if any(p < 0 for p in row):
                raise ValidationError(f"negative probability in row {i}")
            if sum(row, Fraction(0)) != 1:
                raise ValidationError(f"row {i} does not sum to 1 exactly")

    @property
    def n_states(self) -> int:
        return len(self.transition)


@dataclass(frozen=True)
class MetricMap:
    """State -> point index of some MetricSpace; total on states."""

    point_of_state: tuple[int, ...]

    def __call__(self, state: int) -> int:
        return self.point_of_state[state]


@dataclass(frozen=True)
class MethodInfo:
    kind: str  # "exactDP" | "exactDP(analytic)" | "monteCarlo"
    seed: Optional[int] = None
    samples: Optional[int] = None
    lhs_stderr: Optional[float] = None
    rhs_stderr: Optional[float] = None


@dataclass(frozen=True)
class ConvexityEstimate:
    p: float
    lhs: Fraction | float
    rhs: Fraction | float
    method: MethodInfo

    @property
    def pi_lower(self) -> Optional[float]:
        if self.rhs <= 0:
            return None
        return float(self.lhs / self.rhs) ** (1.0 / self.p)

    @property
    def ratio(self) -> Optional[Fraction]:
        """lhs/rhs = piLower^p, exact when both sums are exact."""
        if self.rhs == 0:
            return None
        return self.lhs / self.rhs


def _k_max(T: int) -> int:
    return max(0, math.ceil(math.log2(T))) if T > 1 else 0


def _split_time(t: int, k: int) -> int:
    return max(t - 2**k, 0)


def exact_convexity(
    chain: MarkovChain, mmap: MetricMap, space: MetricSpace, p: int
) -> ConvexityEstimate:
    """Exact rational evaluation by dynamic programming over matrix powers:
    conditioned on the split-time state, the chain and its re-randomized
    copy are independent runs of the same transition law."""
    if not isinstance(p, int) or p < 1:
        raise ValidationError("exact mode needs integer p >= 1")
    if len(mmap.point_of_state) != chain.n_states:
        raise ValidationError("metric map must cover every state")
    n = chain.n_states
    T = chain.horizon
    P = [list(row) for row in chain.transition]
    dp = [
        [space.d(mmap(a), mmap(b)) ** p for b in range(n)] for a in range(n)
    ]

    # powers[j] = P^j for j = 1..T
    powers = [None, P]
    for _ in range(2, T + 1):
        prev = powers[-1]
        powers.append(
            [
                [
                    sum((prev[u][m] * P[m][v] for m in range(n) if prev[u][m]), Fraction(0))
                    for v in range(n)
                ]
                for u in range(n)
            ]
        )

    # pi[s] = distribution at time s
    start_row = [Fraction(0)] * n
    start_row[chain.start] = Fraction(1)
    pi = [start_row]
    for s in range(1, T + 1):
        prev = pi[-1]
        pi.append(
            [
                sum((prev[u] * P[u][v] for u in range(n) if prev[u]), Fraction(0))
                for v in range(n)
            ]
        )

    # w[j][u] = E[ d(f(A), f(B))^p ] for two independent j-step runs from u
    w = [None] + [
        [
            sum(
                (
                    powers[j][u][a] * powers[j][u][b] * dp[a][b]
                    for a in range(n)
                    if powers[j][u][a]
                    for b in range(n)
                    if powers[j][u][b] and dp[a][b]
                ),
                Fraction(0),
            )
            for u in range(n)
        ]
        for j in range(1, T + 1)
    ]

    lhs = Fraction(0)
    for k in range(_k_max(T) + 1):
        denom = Fraction(2) ** (k * p)
        for t in range(1, T + 1):
            s = _split_time(t, k)
            j = t - s
            term = sum((pi[s][u] * w[j][u] for u in range(n) if pi[s][u]), Fraction(0))
            lhs += term / denom

    rhs = Fraction(0)
    for t in range(1, T + 1):
        rhs += sum(
            (
                pi[t - 1][u] * P[u][v] * dp[u][v]
                for u in range(n)
                if pi[t - 1][u]
                for v in range(n)
                if P[u][v] and dp[u][v]
            ),
            Fraction(0),
        )
    return ConvexityEstimate(float(p), lhs, rhs, MethodInfo("exactDP"))


# ---------------------------------------------------------------------------
# Monte Carlo with independent substreams per (k, t) term
# ---------------------------------------------------------------------------

def _rng_for(seed: int, tag: int, k: int, t: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([seed, tag, k, t]))


def _sim_tables(chain: MarkovChain):
    n = chain.n_states
    deg = max(sum(1 for p in row if p > 0) for row in chain.transition)
    nbrs = np.zeros((n, deg), dtype=np.int64)
    cum = np.ones((n, deg))
    for u, row in enumerate(chain.transition):
        acc = 0.0
        col = 0
        for v, prob in enumerate(row):
            if prob > 0:
                acc += float(prob)
                nbrs[u, col] = v
                cum[u, col] = acc
                col += 1
        if col:
            cum[u, col - 1] = 1.0
        nbrs[u, col:] = nbrs[u, col - 1] if col else u
    return nbrs, cum


def _steps(states: np.ndarray, nbrs, cum, rng, count: int) -> np.ndarray:
    for _ in range(count):
        u = rng.random(states.size)
        idx = (u[:, None] > cum[states]).sum(axis=1)
        states = nbrs[states, idx]
    return states


def mc_convexity(
    chain: MarkovChain,
    mmap: MetricMap,
    space: MetricSpace,
    p: float,
    seed: int,
    samples: int,
) -> ConvexityEstimate:
    """Unbiased sample means of both convexity sums with standard errors;
    bit-identical for a fixed seed."""
    if samples < 1:
        raise ValidationError("need samples >= 1")
    n = chain.n_states
    T = chain.horizon
    nbrs, cum = _sim_tables(chain)
    dmat = np.array(
        [[float(space.d(mmap(a), mmap(b))) ** p for b in range(n)] for a in range(n)]
    )

    lhs = 0.0
    lhs_var = 0.0
    for k in range(_k_max(T) + 1):
        w = 2.0 ** (-k * p)
        for t in range(1, T + 1):
            s = _split_time(t, k)
            rng = _rng_for(seed, 1, k, t)
            states = np.full(samples, chain.start, dtype=np.int64)
            states = _steps(states, nbrs, cum, rng, s)
            a = _steps(states.copy(), nbrs, cum, rng, t - s)
            b = _steps(states, nbrs, cum, rng, t - s)
            vals = dmat[a, b]
            lhs += w * float(vals.mean())
            lhs_var += (w * w) * float(vals.var(ddof=1) if samples > 1 else 0.0) / samples

    rhs = 0.0
    rhs_var = 0.0
    for t in range(1, T + 1):
        rng = _rng_for(seed, 2, 0, t)
        states = np.full(samples, chain.start, dtype=np.int64)
        prev = _steps(states, nbrs, cum, rng, t - 1)
        cur = _steps(prev.copy(), nbrs, cum, rng, 1)
        vals = dmat[prev, cur]
        rhs += float(vals.mean())
        rhs_var += float(vals.var(ddof=1) if samples > 1 else 0.0) / samples

    info = MethodInfo("monteCarlo", seed, samples, math.sqrt(lhs_var), math.sqrt(rhs_var))
    return ConvexityEstimate(float(p), lhs, rhs, info)


# ---------------------------------------------------------------------------
# Built-in walks
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class WalkBundle:
    chain: MarkovChain
    metric_map: MetricMap
    space: MetricSpace


def downward_tree_walk(m: int, vertex_cap: int = TREE_VERTEX_CAP) -> WalkBundle:
    """Downward random walk on T_{2^m}: root start, each non-leaf moves to a
    uniformly random child, leaves absorbing, horizon 2^m.

    Explicit mode materializes the tree; for depths beyond the cap use the
    split-time analytic evaluator tree_walk_convexity_exact instead.
    """
    if m < 1:
        raise ValidationError("need m >= 1")
    depth = 2**m
    n_vertices = 2 ** (depth + 1) - 1
    if n_vertices > vertex_cap:
        raise CapExceededError(
            f"T_{depth} has {n_vertices} vertices (cap {vertex_cap}); "
            "use the analytic mode (tree_walk_convexity_exact / _mc)"
        )
    graph = binary_tree(depth)
    space = apsp(graph)
    labels = space.labels
    index = {lab: i for i, lab in enumerate(labels)}
    rows = []
    for lab in labels:
        row = [Fraction(0)] * len(labels)
        if len(lab) == depth:  # leaf: absorbing
            row[index[lab]] = Fraction(1)
        else:
            row[index[lab + "0"]] = Fraction(1, 2)
            row[index[lab + "1"]] = Fraction(1, 2)
        rows.append(tuple(row))
    chain = MarkovChain(tuple(rows), index[""], depth)
    mmap = MetricMap(tuple(range(len(labels))))
    return WalkBundle(chain, mmap, space)


def tree_walk_convexity_exact(m: int, p: int) -> ConvexityEstimate:
    """Split-time analytic DP for the downward walk on T_{2^m}: within the
    horizon the walk sits at depth t, two copies split at time s first
    disagree at step r with probability 2^{s-r}, and their distance at time
    t is then 2(t - r + 1).  Exact rationals, no tree materialized."""
    if m < 1 or not isinstance(p, int) or p < 1:
        raise ValidationError("need m >= 1 and integer p >= 1")
    T = 2**m

    # F[w] = sum_{i=1..w} 2^(i-1) (2i)^p  so  E[d^p | window w] = F[w] / 2^w
    F = [Fraction(0)]
    for i in range(1, T + 1):
        F.append(F[-1] + Fraction(2) ** (i - 1) * (2 * i) ** p)

    lhs = Fraction(0)
    for k in range(_k_max(T) + 1):
        denom = Fraction(2) ** (k * p)
        for t in range(1, T + 1):
            w = min(2**k, t)
            lhs += Fraction(F[w], 2**w) / denom
    rhs = Fraction(T)  # every step within the horizon moves distance exactly 1
    return ConvexityEstimate(float(p), lhs, rhs, MethodInfo("exactDP(analytic)"))


def tree_walk_convexity_mc(m: int, p: float, seed: int, samples: int) -> ConvexityEstimate:
    """Monte Carlo for the downward tree walk without materializing the tree:
    simulate child choices as bits; distance is set by the first disagreement
    after the split."""
    if m < 1 or samples < 1:
        raise ValidationError("need m >= 1 and samples >= 1")
    T = 2**m
    lhs = 0.0
    lhs_var = 0.0
    for k in range(_k_max(T) + 1):
        wgt = 2.0 ** (-k * p)
        for t in range(1, T + 1):
            s = _split_time(t, k)
            rng = _rng_for(seed, 1, k, t)
            j = t - s
            alive = np.ones(samples, dtype=bool)
            dist_steps = np.zeros(samples, dtype=np.int64)
            for i in range(1, j + 1):
                a = rng.integers(0, 2, samples)
                b = rng.integers(0, 2, samples)
                strike = alive & (a != b)
                dist_steps[strike] = j - i + 1
                alive &= ~strike
            vals = (2.0 * dist_steps) ** p
            vals[dist_steps == 0] = 0.0
            lhs += wgt * float(vals.mean())
            lhs_var += (wgt * wgt) * float(vals.var(ddof=1) if samples > 1 else 0.0) / samples
    # within the horizon every step moves distance exactly 1
    rhs = float(T)
    info = MethodInfo("monteCarlo", seed, samples, math.sqrt(lhs_var), 0.0)
    return ConvexityEstimate(float(p), lhs, rhs, info)


def downhill_walk(
    family: RecursiveFamily, horizon: Optional[int] = None
) -> WalkBundle:
    """From every non-sink vertex move uniformly to a neighbor strictly
    closer to the sink; the sink is absorbing.  Default horizon is the hop
    count of a source-to-sink geodesic."""
    graph = family.graph
    space = apsp(graph)
    sink = family.sink
    adj = graph.adjacency()
    n = graph.size
    edge_len = graph.edges[0][2]
    hops = int(space.d(family.source, sink) / edge_len)
    T = horizon if horizon is not None else hops
    rows = []
    for u in range(n):
        row = [Fraction(0)] * n
        if u == sink:
            row[u] = Fraction(1)
        else:
            downs = sorted(v for v, _ in adj[u] if space.d(v, sink) < space.d(u, sink))
            if not downs:
                raise ValidationError(f"vertex {u} has no neighbor closer to the sink")
            share = Fraction(1, len(downs))
            for v in downs:
                row[v] = share
        rows.append(tuple(row))
    chain = MarkovChain(tuple(rows), family.source, T)
    return WalkBundle(chain, MetricMap(tuple(range(n))), space)


def lazy_path_walk(T: int) -> WalkBundle:
    """Monotone lazy walk on a path: move right or stay with probability 1/2,
    right end absorbing.  Maps onto a single geodesic segment; a recorded
    baseline that the functional stays bounded here (the line is Markov
    convex)."""
    if T < 1:
        raise ValidationError("need horizon >= 1")
    space = apsp(path_graph(T + 1))
    rows = []
    for i in range(T + 1):
        row = [Fraction(0)] * (T + 1)
        if i == T:
            row[i] = Fraction(1)
        else:
            row[i] = Fraction(1, 2)
            row[i + 1] = Fraction(1, 2)
        rows.append(tuple(row))
    chain = MarkovChain(tuple(rows), 0, T)
    return WalkBundle(chain, MetricMap(tuple(range(T + 1))), space)
