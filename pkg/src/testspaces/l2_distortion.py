"""Minimum distortion into Euclidean space via semidefinite feasibility plus
bisection, and the fork-selection self-improvement pipeline.

The feasibility problem for distortion c: find a Gram matrix Q >= 0 with
d(i,j)^2 <= Q_ii + Q_jj - 2 Q_ij <= c^2 d(i,j)^2 for all pairs.  It is solved
by alternating projection: clip the pair constraints (a Jacobi sweep), then
project onto the PSD cone by eigenvalue clipping.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional

import numpy as np

from .embeddings import DistortionReport, Embedding, NormedTarget, distortion
from .errors import UndecidedError, ValidationError
from .metric_core import MetricSpace

STALL_REL = 1e-9
STALL_WINDOW = 200
MAX_ITER_DEFAULT = 50_000


@dataclass(frozen=True)
class GramCertificate:
    Q: np.ndarray
    c: float
    max_psd_violation: float
    max_constraint_violation: float


@dataclass(frozen=True)
class SdpOutcome:
    status: str  # "feasible" | "stalled" | "undecided"
    certificate: Optional[GramCertificate]
    iterations: int
    residual: float


def _distance_squares(space: MetricSpace) -> np.ndarray:
    return np.array([[float(d) ** 2 for d in row] for row in space.dist])


def sdp_feasible(
    space: MetricSpace,
    c: float,
    tol: float = 1e-7,
    max_iter: int = MAX_ITER_DEFAULT,
    warm_start: Optional[np.ndarray] = None,
) -> SdpOutcome:
    """Alternating-projection feasibility probe at distortion bound c.

    Outcomes: "feasible" (certificate at tol), "stalled" (relative progress
    below 1e-9: treated as infeasible at this c), "undecided" (iteration cap
    hit while still progressing).
    """
    if c < 1:
        raise ValidationError("distortion bound must be >= 1")
    if tol <= 0:
        raise ValidationError("tolerance must be positive")
    n = space.size
    D2 = _distance_squares(space)
    lo, hi = D2, (c * c) * D2
    off = ~np.eye(n, dtype=bool)

    if warm_start is not None:
        Q = warm_start.copy()
    else:
        # classical MDS double-centering as the starting Gram matrix
        J = np.eye(n) - np.ones((n, n)) / n
        Q = -0.5 * J @ D2 @ J

    best_residual = math.inf
    last_check = math.inf
    it = 0
    while it < max_iter:
        it += 1
        # pair-constraint sweep (diagonal untouched)
        diag = np.diag(Q)
        E = diag[:, None] + diag[None, :] - 2.0 * Q
        Ec = np.clip(E, lo, hi)
        Qnew = (diag[:, None] + diag[None, :] - Ec) / 2.0
        Q = np.where(off, Qnew, Q)
        # PSD projection
        w, V = np.linalg.eigh((Q + Q.T) / 2.0)
        psd_violation = max(0.0, float(-w[0]))
        w = np.clip(w, 0.0, None)
        Q = (V * w) @ V.T
        Q = (Q + Q.T) / 2.0
        # residual: how far the PSD iterate is from the pair constraints
        diag = np.diag(Q)
        E = diag[:, None] + diag[None, :] - 2.0 * Q
        viol = np.maximum(lo - E, E - hi)
        np.fill_diagonal(viol, 0.0)
        constraint_violation = max(0.0, float(viol.max()))
        residual = max(constraint_violation, psd_violation)
        if residual <= tol:
            return SdpOutcome(
                "feasible",
                GramCertificate(Q, c, psd_violation, constraint_violation),
                it,
                residual,
            )
        best_residual = min(best_residual, residual)
        if it % STALL_WINDOW == 0:
            if last_check - best_residual <= STALL_REL * max(best_residual, 1e-300):
                return SdpOutcome("stalled", None, it, residual)
            last_check = best_residual
    return SdpOutcome("undecided", None, it, best_residual)


def embedding_from_gram(space: MetricSpace, Q: np.ndarray) -> Embedding:
    """Eigendecomposition of Q into coordinates (negative eigenvalues clipped)."""
    w, V = np.linalg.eigh((Q + Q.T) / 2.0)
    w = np.clip(w, 0.0, None)
    X = V * np.sqrt(w)
    vectors = tuple(tuple(float(x) for x in row) for row in X)
    return Embedding(space, vectors, NormedTarget("l2", X.shape[1]))


@dataclass(frozen=True)
class L2Result:
    c_star: float
    embedding: Embedding
    report: DistortionReport
    bracket: tuple[float, float]
    undecided_probes: tuple[float, ...]
    probes: int


def min_distortion_l2(
    space: MetricSpace,
    tol: float = 1e-4,
    feas_tol: float = 1e-7,
    max_iter: int = MAX_ITER_DEFAULT,
) -> L2Result:
    """Bisection over sdp_feasible; the returned c_star is the feasible end
    of the final bracket, and the embedding is reconstructed from its Gram
    certificate."""
    if tol <= 0:
        raise ValidationError("tolerance must be positive")
    if space.size < 2:
        raise ValidationError("need at least 2 points")

    # scale to unit diameter for well-conditioned tolerances
    diam = max(max(row) for row in space.dist)
    scaled = space.scaled(Fraction(1) / diam)

    # guaranteed-feasible upper bound: the Frechet rows read as l2 vectors
    fre = [[float(d) for d in row] for row in scaled.dist]
    hi_emb = Embedding(scaled, tuple(tuple(r) for r in fre), NormedTarget("l2", space.size))
    hi_rep = distortion(hi_emb)
    hi = float(hi_rep.distortion) * (1.0 + 1e-9) + 1e-9
    X = np.array(fre) / float(hi_rep.lip)
    warm = X @ X.T

    undecided: list[float] = []
    probes = 0

    out = sdp_feasible(scaled, hi, feas_tol, max_iter, warm_start=warm)
    probes += 1
    if out.status != "feasible":
        # the warm start is an exactly feasible point, so this cannot stall
        raise UndecidedError(f"solver failed at the guaranteed bracket top {hi}")
    best = out.certificate

    lo = 1.0
    out1 = sdp_feasible(scaled, 1.0, feas_tol, max_iter, warm_start=best.Q)
    probes += 1
    if out1.status == "feasible":
        best = out1.certificate
        hi = 1.0
    else:
        if out1.status == "undecided":
            undecided.append(1.0)
        while hi - lo > tol:
            mid = 0.5 * (lo + hi)
            out = sdp_feasible(scaled, mid, feas_tol, max_iter, warm_start=best.Q)
            probes += 1
            if out.status == "feasible":
                hi = mid
                best = out.certificate
            else:
                if out.status == "undecided":
                    undecided.append(mid)
                lo = mid

    emb_scaled = embedding_from_gram(scaled, best.Q)
    emb = Embedding(
        space,
        tuple(tuple(x * float(diam) for x in v) for v in emb_scaled.vectors),
        emb_scaled.target,
    )
    report = distortion(emb)
    return L2Result(hi, emb, report, (lo, hi), tuple(undecided), probes)


# ---------------------------------------------------------------------------
# Kloeckner self-improvement: fork gap, fork selection, iterated bound
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ConvexityModulus:
    """delta_X(eps) >= c * eps^q."""

    c: float
    q: float

    def __post_init__(self):
        if self.c <= 0 or self.q < 2:
            raise ValidationError("need c > 0 and q >= 2")


def l2_modulus() -> ConvexityModulus:
    # 1 - sqrt(1 - eps^2/4) >= eps^2/8 on (0, 2]
    return ConvexityModulus(1.0 / 8.0, 2.0)


@dataclass(frozen=True)
class ForkGapParams:
    D: float
    q: float
    K: float


# fork distances: a0-a1 = 1, a1-a2 = a1-a2' = 1, a0-a2 = a0-a2' = 2, a2-a2' = 2
_FORK_PAIRS = (
    ((0, 1), 1.0),
    ((1, 2), 1.0),
    ((1, 3), 1.0),
    ((0, 2), 2.0),
    ((0, 3), 2.0),
    ((2, 3), 2.0),
)


@dataclass(frozen=True)
class ForkGapEstimate:
    D: float
    q: float
    K: float  # gap * D^(q-1)
    gap: float  # guaranteed per-round distortion improvement K / D^(q-1)
    worst_min_norm: float  # sup over feasible forks of min(|x2|, |x2'|)
    feasible: bool
    warning: Optional[str]


def fork_gap_estimate(
    D: float,
    q: float = 2.0,
    modulus: Optional[ConvexityModulus] = None,
    n_starts: int = 16,
    seed: int = 20240,
) -> ForkGapEstimate:
    """Numerically maximize min(|x2|, |x2'|) over D-Lipschitz non-contractive
    fork images in R^3 (deterministic multi-start SLSQP); the gap is
    D - max/2, scaled to K = gap * D^(q-1).

    The convexity modulus sets the analytic rate behind the gap; the
    numeric route measures the gap directly, so the modulus only
    documents which geometry (c, q) the estimate instantiates.

    At D = 1 the constraint set is empty (an isometric l2 fork would force
    x2 = x2'), reported as feasible=False with gap = +inf.
    """
    from scipy.optimize import minimize

    if D < 1:
        raise ValidationError("D must be >= 1")
    if modulus is None:
        modulus = l2_modulus()
    if abs(modulus.q - q) > 1e-12:
        raise ValidationError("exponent q must match the modulus exponent")

    # variables: x1 (3), x2 (3), x2' (3), t;  maximize t
    img = {0: None, 1: slice(0, 3), 2: slice(3, 6), 3: slice(6, 9)}

    def point(z, idx):
        if idx == 0:
            return np.zeros(3)
        return z[img[idx]]

    cons = []
    for (i, j), dij in _FORK_PAIRS:
        cons.append(
            {
                "type": "ineq",
                "fun": (lambda z, i=i, j=j, dij=dij: np.linalg.norm(point(z, i) - point(z, j)) - dij),
            }
        )
        cons.append(
            {
                "type": "ineq",
                "fun": (lambda z, i=i, j=j, dij=dij: D * dij - np.linalg.norm(point(z, i) - point(z, j))),
            }
        )
    cons.append({"type": "ineq", "fun": lambda z: np.linalg.norm(z[3:6]) - z[9]})
    cons.append({"type": "ineq", "fun": lambda z: np.linalg.norm(z[6:9]) - z[9]})

    rng = np.random.default_rng(seed)
    best_t = None
    any_feasible = False
    for _ in range(n_starts):
        x1 = np.array([D, 0.0, 0.0]) + 0.2 * rng.standard_normal(3)
        w = rng.standard_normal(3)
        w /= np.linalg.norm(w)
        z0 = np.concatenate([x1, x1 + D * w, x1 - D * w, [1.5 * D]])
        res = minimize(
            lambda z: -z[9],
            z0,
            constraints=cons,
            method="SLSQP",
            options={"maxiter": 400, "ftol": 1e-12},
        )
        z = res.x
        feas_violation = max(
            max(
                np.linalg.norm(point(z, i) - point(z, j)) - D * dij,
                dij - np.linalg.norm(point(z, i) - point(z, j)),
            )
            for (i, j), dij in _FORK_PAIRS
        )
        if feas_violation <= 1e-7:
            any_feasible = True
            t = min(np.linalg.norm(z[3:6]), np.linalg.norm(z[6:9]))
            if best_t is None or t > best_t:
                best_t = t
    if not any_feasible:
        return ForkGapEstimate(D, q, math.inf, math.inf, 0.0, False, None)
    if best_t is None or best_t <= 0:
        return ForkGapEstimate(D, q, 0.0, 0.0, 0.0, True, "optimizer stalled; widest valid lower bound 0")
    gap = D - best_t / 2.0
    if gap < 0:
        gap = 0.0
    K = gap * D ** (q - 1.0)
    return ForkGapEstimate(D, q, K, gap, best_t, True, None)


def kloeckner_bound(n: int, K: float, q: float = 2.0) -> float:
    """Least D >= 1 with D - floor(log2 n) * K / D^(q-1) >= 1."""
    if n < 1:
        raise ValidationError("depth must be >= 1")
    if K <= 0 or q < 2:
        raise ValidationError("need K > 0 and q >= 2")
    budget = int(math.floor(math.log2(n))) if n > 1 else 0
    if budget == 0:
        return 1.0
    if q == 2.0:
        return 0.5 * (1.0 + math.sqrt(1.0 + 4.0 * budget * K))
    lo, hi = 1.0, 1.0 + budget * K + 1.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if mid - budget * K / mid ** (q - 1.0) >= 1.0:
            hi = mid
        else:
            lo = mid
    return hi


def normalize_noncontractive(emb: Embedding) -> tuple[Embedding, DistortionReport]:
    """Rescale so every pair satisfies d <= ||df||; the Lipschitz constant of
    the result equals the original distortion."""
    rep = distortion(emb)
    scaled = emb.rescaled(float(rep.colip))
    return scaled, distortion(scaled)


@dataclass(frozen=True)
class ForkSelection:
    selected_labels: tuple[str, ...]
    new_labels: tuple[str, ...]  # labels in T_{floor(n/2)}
    embedding: Embedding  # on the half-distance selected space
    input_report: DistortionReport
    report: DistortionReport
    improvement: float


def fork_select(n: int, emb: Embedding) -> ForkSelection:
    """Kloeckner's grandchild selection on a non-contractive embedding of
    T_n: child 0 is the daughter; per selected vertex keep the grandchild
    mapped closest to it on each side (ties to the lexicographically smaller
    label).  The selected set carries half the tree distance and is exactly
    isometric to T_{floor(n/2)}."""
    if n < 2:
        raise ValidationError("need depth >= 2")
    space = emb.space
    if space.labels is None:
        raise ValidationError("embedding space must carry tree labels")
    rep = distortion(emb)
    if float(rep.colip) > 1.0 + 1e-9:
        raise ValidationError(
            "embedding must be non-contractive: rescale vectors by the colipschitz "
            "constant first (see normalize_noncontractive)"
        )
    index = {lab: i for i, lab in enumerate(space.labels)}

    def img(lab):
        return np.array([float(x) for x in emb.vectors[index[lab]]])

    selected = {"": ""}
    frontier = [""]
    while frontier:
        nxt = []
        for old in frontier:
            if len(old) + 2 > n:
                continue
            base = img(old)
            for bit, child in (("0", old + "0"), ("1", old + "1")):
                cands = sorted([child + "0", child + "1"])
                d0 = np.linalg.norm(img(cands[0]) - base)
                d1 = np.linalg.norm(img(cands[1]) - base)
                pick = cands[0] if d0 <= d1 else cands[1]
                selected[pick] = selected[old] + bit
                nxt.append(pick)
        frontier = nxt

    old_labels = sorted(selected, key=lambda L: (len(L), L))
    new_labels = tuple(selected[L] for L in old_labels)
    idxs = [index[L] for L in old_labels]
    half_space = MetricSpace(
        tuple(tuple(space.d(i, j) / 2 for j in idxs) for i in idxs), new_labels
    )
    sub = Embedding(half_space, tuple(emb.vectors[i] for i in idxs), emb.target)

    # structural exactness: half distances must equal T_{floor(n/2)} distances
    for a, la in enumerate(new_labels):
        for b, lb in enumerate(new_labels):
            common = 0
            for x, y in zip(la, lb):
                if x != y:
                    break
                common += 1
            expect = (len(la) - common) + (len(lb) - common)
            if half_space.d(a, b) != expect:
                raise ValidationError("selected set is not isometric to the half tree")

    sub_rep = distortion(sub)
    return ForkSelection(
        tuple(old_labels),
        new_labels,
        sub,
        rep,
        sub_rep,
        float(rep.distortion) - float(sub_rep.distortion),
    )
