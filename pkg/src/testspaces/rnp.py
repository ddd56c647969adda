"""The Radon-Nikodym pipeline: delta-trees and delta-bushes in discretized
L1, the gauge renorming evaluated by exact LP, broken-line families of
geodesics, thickness certification for diamond geodesic families, and the
embedding-to-divergent-martingale construction.

Ambient space throughout: R^(2^n) under the normalized l1 norm (atoms of
equal mass), where everything stays rational.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional, Sequence

from .embeddings import Embedding, NormedTarget, distortion
from .errors import CapExceededError, ValidationError
from .exactlp import solve_lp
from .generators import RecursiveFamily
from .metric_core import GeodesicPath, MetricSpace, apsp, enumerate_geodesic_paths

Vec = tuple


def _l1n(v: Vec, atoms: int) -> Fraction:
    """Normalized l1 norm: atoms carry equal mass 1/atoms."""
    return Fraction(sum(abs(x) for x in v), atoms)


def _mean(v: Vec) -> Fraction:
    return Fraction(sum(v), len(v))


def _sub(a: Vec, b: Vec) -> Vec:
    return tuple(x - y for x, y in zip(a, b))


# ---------------------------------------------------------------------------
# delta-trees and delta-bushes
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DeltaTree:
    """Vectors indexed by 0/1 strings of length <= depth with the exact
    midpoint identity and separation >= delta in normalized l1."""

    depth: int
    atoms: int
    vectors: dict  # label -> tuple of ints
    delta: Fraction


def rademacher_tree(n: int, depth_cap: int = 12) -> DeltaTree:
    """Product construction in discretized L1: the root is the constant-1
    vector over 2^n atoms and each step multiplies by (1 +- r_k), where r_k
    is the k-th Rademacher sign pattern.  All atom values are integers."""
    if n < 1:
        raise ValidationError("depth must be >= 1")
    if n > depth_cap:
        raise CapExceededError(f"depth {n} exceeds cap {depth_cap}")
    atoms = 2**n

    def sign(k: int, atom: int) -> int:
        # k-th pattern flips in blocks of 2^(n-k); +1 on the first block
        return 1 if (atom >> (n - k)) & 1 == 0 else -1

    vectors = {"": tuple(1 for _ in range(atoms))}
    for lab in _labels_through(n)[1:]:
        parent = vectors[lab[:-1]]
        eps = 2 * int(lab[-1]) - 1
        k = len(lab)
        vectors[lab] = tuple(
            parent[a] * (1 + eps * sign(k, a)) for a in range(atoms)
        )
    return DeltaTree(n, atoms, vectors, Fraction(1))


def _labels_through(n: int) -> list[str]:
    out = [""]
    for d in range(1, n + 1):
        out.extend("".join(bits) for bits in itertools.product("01", repeat=d))
    return out


def verify_delta_tree(tree: DeltaTree) -> None:
    """Exact midpoint identity, unit norms, and separation >= delta."""
    for lab, vec in tree.vectors.items():
        if _l1n(vec, tree.atoms) != 1:
            raise ValidationError(f"||x_{lab or 'root'}|| != 1")
        if len(lab) < tree.depth:
            c0, c1 = tree.vectors[lab + "0"], tree.vectors[lab + "1"]
            if any(2 * v != a + b for v, a, b in zip(vec, c0, c1)):
                raise ValidationError(f"midpoint identity fails at {lab or 'root'}")
            for child in (c0, c1):
                if _l1n(_sub(vec, child), tree.atoms) < tree.delta:
                    raise ValidationError(f"separation fails below {lab or 'root'}")


@dataclass(frozen=True)
class DeltaBush:
    """Levels of vectors with block convex-combination identities:
    z_{n-1,k} = sum_{j in A^n_k} lambda_{n,j} z_{n,j}, separation delta."""

    atoms: int
    levels: tuple[tuple[Vec, ...], ...]
    blocks: tuple[tuple[tuple[int, ...], ...], ...]  # blocks[n][k], n >= 1
    weights: tuple[tuple[Fraction, ...], ...]  # weights[n][j], n >= 1
    delta: Fraction

    def parent_of(self, level: int, j: int) -> int:
        for k, block in enumerate(self.blocks[level]):
            if j in block:
                return k
        raise ValidationError(f"index {j} missing from level-{level} partition")


def tree_to_bush(tree: DeltaTree) -> DeltaBush:
    """A delta-tree is a delta-bush with blocks of size 2 and weights 1/2."""
    verify_delta_tree(tree)
    levels = []
    blocks: list = [()]
    weights: list = [()]
    for d in range(tree.depth + 1):
        labs = [lab for lab in _labels_through(tree.depth) if len(lab) == d]
        labs.sort()
        levels.append(tuple(tree.vectors[lab] for lab in labs))
        if d >= 1:
            blocks.append(tuple((2 * k, 2 * k + 1) for k in range(len(labs) // 2)))
            weights.append(tuple(Fraction(1, 2) for _ in labs))
    bush = DeltaBush(tree.atoms, tuple(levels), tuple(blocks), tuple(weights), tree.delta)
    verify_bush(bush)
    return bush


def verify_bush(bush: DeltaBush) -> None:
    if len(bush.levels[0]) != 1:
        raise ValidationError("a bush must start from a single vector (m_0 = 1)")
    for n in range(1, len(bush.levels)):
        seen: set[int] = set()
        for k, block in enumerate(bush.blocks[n]):
            seen.update(block)
            lam = sum((bush.weights[n][j] for j in block), Fraction(0))
            if lam != 1:
                raise ValidationError(f"weights in block ({n},{k}) sum to {lam} != 1")
            parent = bush.levels[n - 1][k]
            combo = [Fraction(0)] * bush.atoms
            for j in block:
                w = bush.weights[n][j]
                if w < 0:
                    raise ValidationError("negative weight")
                for a in range(bush.atoms):
                    combo[a] += w * bush.levels[n][j][a]
                if _l1n(_sub(bush.levels[n][j], parent), bush.atoms) < bush.delta:
                    raise ValidationError(f"separation fails at ({n},{j})")
            if tuple(combo) != tuple(Fraction(x) for x in parent):
                raise ValidationError(f"convexity identity fails at ({n},{k})")
        if seen != set(range(len(bush.levels[n]))):
            raise ValidationError(f"level-{n} blocks are not a partition")


# ---------------------------------------------------------------------------
# The gauge renorming
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class GaugeNorm:
    """Minkowski functional of conv(normalized-l1 ball, {+-x_{i,j}}):
    gauge(v) = min ||w||_1 + sum |mu_j|  over  v = w + sum mu_j x_{i,j},
    an exact rational LP."""

    atoms: int
    generators: tuple[Vec, ...]

    def evaluate(self, v: Vec) -> Fraction:
        if len(v) != self.atoms:
            raise ValidationError("vector lives in the wrong ambient space")
        dim, ng = self.atoms, len(self.generators)
        # columns: w+ (dim), w- (dim), mu+ (ng), mu- (ng)
        A = []
        for a in range(dim):
            row = [Fraction(0)] * (2 * dim + 2 * ng)
            row[a] = Fraction(1)
            row[dim + a] = Fraction(-1)
            for j, g in enumerate(self.generators):
                row[2 * dim + j] = Fraction(g[a])
                row[2 * dim + ng + j] = Fraction(-g[a])
            A.append(row)
        b = [Fraction(x) for x in v]
        unit = Fraction(1, self.atoms)
        c = [unit] * (2 * dim) + [Fraction(1)] * (2 * ng)
        value, _ = solve_lp(A, b, c)
        return value


def bush_gauge(bush: DeltaBush) -> GaugeNorm:
    gens = tuple(vec for level in bush.levels for vec in level)
    return GaugeNorm(bush.atoms, gens)


def gauge_eval(g: GaugeNorm, v: Vec) -> Fraction:
    return g.evaluate(v)


def bush_gauge_delta(bush: DeltaBush, gauge: GaugeNorm) -> Fraction:
    """Separation of the bush measured in the gauge norm (the renorming can
    only shrink the l1 separation, never below zero)."""
    worst = None
    for n in range(1, len(bush.levels)):
        for k, block in enumerate(bush.blocks[n]):
            parent = bush.levels[n - 1][k]
            for j in block:
                sep = gauge.evaluate(_sub(bush.levels[n][j], parent))
                if worst is None or sep < worst:
                    worst = sep
    return worst if worst is not None else Fraction(0)


# ---------------------------------------------------------------------------
# Broken-line family labeled by tree vertices
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BrokenLine:
    """Geodesic from 0 to the bush root as a list of segment vectors; each
    segment is a positive multiple of a bush vector, so its gauge length is
    its coefficient."""

    label: str
    segments: tuple[tuple[Fraction, tuple[int, int]], ...]  # (coef, (level, j))

    def coefficients_sum(self) -> Fraction:
        return sum((c for c, _ in self.segments), Fraction(0))

    def vertices(self, bush: DeltaBush) -> tuple[tuple[Fraction, Vec], ...]:
        """(parameter, point) pairs: prefix sums of the segments."""
        out = [(Fraction(0), tuple(Fraction(0) for _ in range(bush.atoms)))]
        param = Fraction(0)
        for coef, (lvl, j) in self.segments:
            vec = bush.levels[lvl][j]
            param += coef
            prev = out[-1][1]
            out.append((param, tuple(p + coef * x for p, x in zip(prev, vec))))
        return tuple(out)


def broken_line_family(bush: DeltaBush, k: int) -> dict[str, BrokenLine]:
    """Broken lines for every tree label of length <= k, by the two-stage
    replacement rules: the preliminary pass turns each multiple of a bush
    vector into the convex combination through its children's midpoints, and
    the 0/1 pass splits each midpoint multiple into its two halves in one of
    the two orders."""
    if k >= len(bush.levels):
        raise ValidationError("label depth exceeds bush depth")
    for level in bush.levels:
        for vec in level:
            if _mean(vec) != 1:
                raise ValidationError(
                    "bush must lie on the mean-1 hyperplane before building lines"
                )

    # segments in preliminary lines are multiples of midpoints y_{i,j}
    def preliminary(segments):
        out = []
        for coef, (lvl, kidx) in segments:
            for j in bush.blocks[lvl + 1][kidx]:
                out.append((coef * bush.weights[lvl + 1][j], ("y", lvl + 1, j)))
        return out

    def finalize(pre, bit: str):
        out = []
        for coef, (_, lvl, j) in pre:
            parent = (lvl - 1, bush.parent_of(lvl, j))
            child = (lvl, j)
            first, second = (parent, child) if bit == "0" else (child, parent)
            out.append((coef / 2, first))
            out.append((coef / 2, second))
        return out

    lines = {"": BrokenLine("", ((Fraction(1), (0, 0)),))}
    frontier = [""]
    for _ in range(k):
        nxt = []
        for lab in frontier:
            pre = preliminary(lines[lab].segments)
            for bit in "01":
                child = lab + bit
                lines[child] = BrokenLine(child, tuple(finalize(pre, bit)))
                nxt.append(child)
        frontier = nxt
    return lines


def sibling_deviation(
    bush: DeltaBush, gauge: GaugeNorm, line0: BrokenLine, line1: BrokenLine
) -> Fraction:
    """Sum of gauge deviations between two sibling lines at the parameters
    where they differ (the odd-indexed vertices; even ones are shared)."""
    v0 = line0.vertices(bush)
    v1 = line1.vertices(bush)
    if len(v0) != len(v1):
        raise ValidationError("sibling lines must have matching segment counts")
    total = Fraction(0)
    for idx in range(1, len(v0), 2):
        p0, x0 = v0[idx]
        p1, x1 = v1[idx]
        if p0 != p1:
            raise ValidationError("sibling lines disagree on parameters")
        total += gauge.evaluate(_sub(x0, x1))
    return total


# ---------------------------------------------------------------------------
# Thick families of diamond geodesics
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class OracleResponse:
    geodesic: int  # index of the deviating geodesic
    q_params: tuple[Fraction, ...]  # common-point parameters, q_0 = 0 < ... < q_m
    s_params: tuple[Fraction, ...]  # one deviation parameter per gap
    deviations: tuple[Fraction, ...]  # d(g(s_i), g~(s_i)) per gap
    total: Fraction


@dataclass
class GeodesicFamily:
    """All source-sink geodesics of a weighted diamond (or Laakso) instance,
    with the exhaustive-search response oracle of the thickness definition."""

    family: RecursiveFamily
    space: MetricSpace
    geodesics: tuple[GeodesicPath, ...]
    params: tuple[Fraction, ...]

    def __post_init__(self):
        self._vertex_at = [
            tuple(g.vertex_at(p) for p in self.params) for g in self.geodesics
        ]
        if any(v is None for row in self._vertex_at for v in row):
            raise ValidationError("geodesics do not share a parameter grid")
        self._index_of = {row: i for i, row in enumerate(self._vertex_at)}
        n = len(self.geodesics)
        np_ = len(self.params)
        self._dev = [
            [
                tuple(
                    self.space.d(self._vertex_at[a][t], self._vertex_at[b][t])
                    for t in range(np_)
                )
                for b in range(n)
            ]
            for a in range(n)
        ]
        # common-parameter bitmasks for fast control filtering
        self._common = [
            [
                sum(1 << t for t in range(np_) if self._dev[a][b][t] == 0)
                for b in range(n)
            ]
            for a in range(n)
        ]
        self._total = [
            [self._bubble_total(self._dev[a][b])[0] for b in range(n)] for a in range(n)
        ]
        self._nbubbles = [
            [self._bubble_total(self._dev[a][b])[1] for b in range(n)] for a in range(n)
        ]

    @staticmethod
    def _bubble_total(profile) -> tuple[Fraction, int]:
        total = Fraction(0)
        bubbles = 0
        run_max = Fraction(0)
        for d in profile:
            if d == 0:
                total += run_max
                run_max = Fraction(0)
            elif d > run_max:
                if run_max == 0:
                    bubbles += 1
                run_max = d
        return total + run_max, bubbles

    def vertex_at(self, g: int, param: Fraction) -> int:
        return self._vertex_at[g][self.params.index(param)]

    def respond(self, g: int, control_params: Sequence[Fraction]) -> OracleResponse:
        """Deviating geodesic through the control points maximizing the total
        deviation, with its (q, s) structure.  Ties go to the response with
        the fewest deviation bubbles (the coarsest one), then to the smallest
        index; coarse responses keep deeper refinement levels available for
        later rounds of the martingale construction."""
        controls = sorted(set(control_params) | {self.params[0], self.params[-1]})
        missing = [p for p in controls if p not in self.params]
        if missing:
            raise ValidationError(f"control parameters {missing} are not breakpoints")
        mask = sum(1 << self.params.index(p) for p in controls)
        best = None
        best_key = None
        for cand in range(len(self.geodesics)):
            if self._common[g][cand] & mask != mask:
                continue
            key = (-self._total[g][cand], self._nbubbles[g][cand], cand)
            if best is None or key < best_key:
                best, best_key = cand, key
        if best is None:
            raise ValidationError("no geodesic of the family passes the control points")
        profile = self._dev[g][best]
        np_ = len(self.params)

        # q: endpoints, controls, and the common flanks of every bubble
        q_idx = {0, np_ - 1}
        q_idx.update(self.params.index(p) for p in controls)
        t = 0
        while t < np_:
            if profile[t] != 0:
                start = t
                while t < np_ and profile[t] != 0:
                    t += 1
                q_idx.add(start - 1)
                q_idx.add(t)
            else:
                t += 1
        q_sorted = sorted(q_idx)
        q_params = tuple(self.params[i] for i in q_sorted)
        s_params: list[Fraction] = []
        deviations: list[Fraction] = []
        for a, b in zip(q_sorted, q_sorted[1:]):
            inside = range(a + 1, b)
            if not inside:
                # adjacent common vertices: both geodesics traverse the same
                # edge, deviation identically 0 on the open gap
                s_params.append((self.params[a] + self.params[b]) / 2)
                deviations.append(Fraction(0))
                continue
            s_best = max(inside, key=lambda i: (profile[i], -i))
            s_params.append(self.params[s_best])
            deviations.append(profile[s_best])
        total = sum(deviations, Fraction(0))
        if total != self._total[g][best]:
            raise ValidationError("internal error: bubble accounting mismatch")
        return OracleResponse(best, q_params, tuple(s_params), tuple(deviations), total)

    def splice(self, g: int, g_tilde: int, q_idx_pairs, picks) -> int:
        """Index of the geodesic following g or g_tilde per gap (condition
        (iv) guarantees it exists in the family)."""
        row = list(self._vertex_at[g])
        for (a, b), pick in zip(q_idx_pairs, picks):
            if pick:
                for t in range(a, b + 1):
                    row[t] = self._vertex_at[g_tilde][t]
        key = tuple(row)
        if key not in self._index_of:
            raise ValidationError("spliced geodesic is missing from the family")
        return self._index_of[key]


def diamond_geodesic_family(n: int, cap: int = 10**6) -> GeodesicFamily:
    """All source-sink geodesics of the weighted level-n diamond."""
    from .generators import diamond, diamond_weighting

    fam = diamond(n, diamond_weighting())
    space = apsp(fam.graph)
    geos = enumerate_geodesic_paths(fam.graph, fam.source, fam.sink, cap=cap, space=space)
    params = geos[0].breakpoints
    return GeodesicFamily(fam, space, tuple(geos), params)


@dataclass(frozen=True)
class ThicknessCertificate:
    alpha: Fraction
    control_budget: int
    worst_geodesic: int
    worst_controls: tuple[Fraction, ...]
    configurations: int
    partial: bool


def thickness_alpha(
    family: GeodesicFamily, control_budget: int, work_cap: int = 10**7
) -> ThicknessCertificate:
    """Certified thickness constant: minimum over family members and interior
    control sets (size <= budget) of the best achievable total deviation."""
    interior = family.params[1:-1]
    n_geo = len(family.geodesics)
    sets = [
        combo
        for size in range(control_budget + 1)
        for combo in itertools.combinations(range(1, len(family.params) - 1), size)
    ]
    configs = 0
    partial = False
    if n_geo * len(sets) * n_geo > work_cap:
        sets = sets[: max(1, work_cap // (n_geo * n_geo))]
        partial = True
    alpha = None
    worst = (0, ())
    for g in range(n_geo):
        for combo in sets:
            mask = (1 << 0) | (1 << (len(family.params) - 1))
            mask |= sum(1 << i for i in combo)
            best = None
            for cand in range(n_geo):
                if family._common[g][cand] & mask != mask:
                    continue
                tot = family._total[g][cand]
                if best is None or tot > best:
                    best = tot
            configs += 1
            if best is not None and (alpha is None or best < alpha):
                alpha = best
                worst = (g, tuple(family.params[i] for i in combo))
    if alpha is None:
        raise ValidationError("no admissible configuration found")
    return ThicknessCertificate(alpha, control_budget, worst[0], worst[1], configs, partial)


# ---------------------------------------------------------------------------
# Diamond l1 embedding (height + one signed tent per quadrilateral)
# ---------------------------------------------------------------------------

def diamond_l1_embedding(fam: RecursiveFamily) -> Embedding:
    """Cut-style l1 embedding: distance-from-source plus, per quadrilateral,
    a tent coordinate signed by the side of the quad the vertex lies on.
    Not isometric; the martingale construction measures its ell."""
    if fam.kind != "diamond":
        raise ValidationError("tent embedding is defined for diamonds")
    space = apsp(fam.graph)
    h = space.dist[fam.source]
    spans = []
    for quad in fam.quads:
        x, y = quad.ends
        lo, hi = min(h[x], h[y]), max(h[x], h[y])
        spans.append((lo, hi))
    vectors = []
    for v in range(fam.graph.size):
        coord = [h[v]]
        chain = dict(fam.chains[v])
        for quad, (lo, hi) in zip(fam.quads, spans):
            side = chain.get(quad.qid)
            if side is None or not (lo < h[v] < hi):
                coord.append(Fraction(0))
            else:
                tent = min(h[v] - lo, hi - h[v])
                coord.append(tent if side == 0 else -tent)
        vectors.append(tuple(coord))
    return Embedding(space, tuple(vectors), NormedTarget("l1", 1 + len(fam.quads)))


# ---------------------------------------------------------------------------
# Martingales
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PiecewiseLevel:
    """A piecewise-constant function on (0,1]: value[i] on (breaks[i], breaks[i+1]]."""

    breaks: tuple[Fraction, ...]
    values: tuple[Vec, ...]

    def __post_init__(self):
        if len(self.values) != len(self.breaks) - 1:
            raise ValidationError("need one value per interval")
        if self.breaks[0] != 0:
            raise ValidationError("partition must start at 0")
        if any(a >= b for a, b in zip(self.breaks, self.breaks[1:])):
            raise ValidationError("breakpoints must increase strictly")


@dataclass(frozen=True)
class Martingale:
    levels: tuple[PiecewiseLevel, ...]
    target: NormedTarget


def _level_from_points(emb: Embedding, params, points) -> PiecewiseLevel:
    values = []
    for i in range(len(points) - 1):
        num = _sub(emb.vectors[points[i + 1]], emb.vectors[points[i]])
        den = params[i + 1] - params[i]
        values.append(tuple(x / den for x in num))
    return PiecewiseLevel(tuple(params), tuple(values))


def martingale_l1_diff(a: PiecewiseLevel, b: PiecewiseLevel, target: NormedTarget) -> Fraction:
    """Bochner L1 norm of a - b on (0,1] (exact for rational targets)."""
    from .embeddings import norm as tnorm

    breaks = sorted(set(a.breaks) | set(b.breaks))
    total = Fraction(0)
    for lo, hi in zip(breaks, breaks[1:]):
        va = a.values[_interval_index(a.breaks, lo)]
        vb = b.values[_interval_index(b.breaks, lo)]
        total += (hi - lo) * tnorm(target, _sub(va, vb))
    return total


def _interval_index(breaks, t) -> int:
    for i in range(len(breaks) - 1):
        if breaks[i] <= t < breaks[i + 1]:
            return i
    raise ValidationError("parameter outside the partition")


@dataclass(frozen=True)
class MartingaleRun:
    martingale: Martingale
    ell: Fraction  # measured lower bilipschitz constant of the normalized map
    scale: Fraction  # vectors were divided by this to make the map 1-Lipschitz
    diff_norms: tuple[Fraction, ...]  # ||M_{2k} - M_{2k-1}||_{L1}, k = 1..K
    quadruple_checks: int  # selection inequalities verified exactly


def martingale_from_embedding(
    family: GeodesicFamily, emb: Embedding, steps: int
) -> MartingaleRun:
    """Alternating oracle responses and farthest-ratio point selections on a
    bilipschitz image of a thick geodesic family; produces a bounded
    martingale with ||M_{2k} - M_{2k-1}|| >= ell * (total deviation) / 4."""
    if steps < 1:
        raise ValidationError("need at least one double-step")
    if emb.space.size != family.space.size:
        raise ValidationError("embedding must live on the family's host space")
    if emb.target.kind not in ("l1", "linf", "summing"):
        raise ValidationError("martingale construction needs an exact rational norm")
    rep = distortion(emb)
    lip, colip = rep.lip, rep.colip
    normalized = Embedding(
        emb.space, tuple(tuple(x / lip for x in v) for v in emb.vectors), emb.target
    )
    ell = Fraction(1) / (lip * colip)

    params_all = family.params
    g_cur = 0
    v_params: list[Fraction] = [params_all[0], params_all[-1]]
    points = [family.vertex_at(g_cur, p) for p in v_params]
    levels = [_level_from_points(normalized, v_params, points)]
    diff_norms: list[Fraction] = []
    checks = 0

    from .embeddings import norm as tnorm

    for _ in range(steps):
        controls = v_params[1:-1]
        resp = family.respond(g_cur, controls)
        q = list(resp.q_params)
        w_points = [family.vertex_at(g_cur, p) for p in q]
        m_odd = _level_from_points(normalized, q, w_points)
        levels.append(m_odd)

        q_idx = [params_all.index(p) for p in q]
        even_params: list[Fraction] = [q[0]]
        even_points: list[int] = [w_points[0]]
        picks: list[bool] = []
        contribution = Fraction(0)
        for i in range(len(q) - 1):
            s = resp.s_params[i]
            dev = resp.deviations[i]
            if dev == 0 or s not in params_all:
                picks.append(False)
                even_params.append(q[i + 1])
                even_points.append(w_points[i + 1])
                continue
            z = family.vertex_at(g_cur, s)
            zt = family.vertex_at(resp.geodesic, s)
            A = s - q[i]
            B = q[i + 1] - s
            f_w0 = normalized.vectors[w_points[i]]
            f_w1 = normalized.vectors[w_points[i + 1]]

            def jump(zv):
                fz = normalized.vectors[zv]
                left = tuple((x - y) / A for x, y in zip(fz, f_w0))
                right = tuple((x - y) / B for x, y in zip(f_w1, fz))
                return tnorm(emb.target, _sub(right, left))

            jz, jzt = jump(z), jump(zt)
            pick_z = jz > jzt  # ties go to z-tilde
            chosen = z if pick_z else zt
            needed = (ell / 2) * family.space.d(z, zt) * (Fraction(1) / A + Fraction(1) / B)
            if max(jz, jzt) < needed:
                raise ValidationError("selection inequality failed; embedding is not bilipschitz")
            checks += 1
            contribution += dev
            picks.append(pick_z is False)
            even_params.extend([s, q[i + 1]])
            even_points.extend([chosen, w_points[i + 1]])
        gap_pairs = list(zip(q_idx, q_idx[1:]))
        g_cur = family.splice(g_cur, resp.geodesic, gap_pairs, picks)
        m_even = _level_from_points(normalized, even_params, even_points)
        levels.append(m_even)
        diff_norms.append(martingale_l1_diff(m_even, m_odd, emb.target))
        v_params = even_params

    mart = Martingale(tuple(levels), emb.target)
    return MartingaleRun(mart, ell, lip, tuple(diff_norms), checks)


@dataclass(frozen=True)
class MartingaleReport:
    valid: bool
    refinement_ok: bool
    conditional_expectation_ok: bool
    bounded_ok: bool
    failures: tuple[str, ...]


def martingale_check(mart: Martingale, bound: Fraction = Fraction(1)) -> MartingaleReport:
    """Exact verification: partitions refine, the length-weighted average of
    each level over a parent interval equals the parent value, and all values
    stay inside the unit ball."""
    from .embeddings import norm as tnorm

    failures: list[str] = []
    refinement = True
    condexp = True
    bounded = True
    for k, level in enumerate(mart.levels):
        for value in level.values:
            if tnorm(mart.target, value) > bound:
                bounded = False
                failures.append(f"level {k}: value norm exceeds {bound}")
        if k == 0:
            continue
        prev = mart.levels[k - 1]
        if not set(prev.breaks) <= set(level.breaks):
            refinement = False
            failures.append(f"level {k} does not refine level {k - 1}")
            continue
        for i in range(len(prev.breaks) - 1):
            lo, hi = prev.breaks[i], prev.breaks[i + 1]
            acc = [Fraction(0)] * len(prev.values[i])
            for j in range(len(level.breaks) - 1):
                a, b = level.breaks[j], level.breaks[j + 1]
                if a >= lo and b <= hi:
                    for t, x in enumerate(level.values[j]):
                        acc[t] += (b - a) * x
            expect = tuple(x * (hi - lo) for x in prev.values[i])
            if tuple(acc) != expect:
                condexp = False
                failures.append(f"conditional expectation fails on ({lo},{hi}] at level {k}")
    return MartingaleReport(
        valid=not failures,
        refinement_ok=refinement,
        conditional_expectation_ok=condexp,
        bounded_ok=bounded,
        failures=tuple(failures),
    )
