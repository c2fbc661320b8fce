"""V-polytope engine: projections, hull volumes, distance oracle, subspace metrics."""

from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass
from typing import TYPE_CHECKING

import numpy as np
from scipy.linalg import expm
from scipy.spatial import ConvexHull, QhullError

from .numerics import (
    MCEstimate,
    RngStream,
    as_generator,
    operator_norm,
    random_rotation,
)

if TYPE_CHECKING:
    from .sampling import Subspace

log = logging.getLogger(__name__)

# Facet counts of symmetric hulls grow fast with dimension; Qhull stays
# under a second per hull up to 8 dimensions at the vertex counts used here.
MAX_EXACT_DIM = 8
HULL_TOL = 1e-9
STALL_ITERS = 50
FW_ITERS = 500
ZONOTOPE_BUDGET = 1_000_000


@dataclass(frozen=True, eq=False)
class Polytope:
    """Convex hull of a finite vertex list in intrinsic coordinates."""

    vertices: np.ndarray
    symmetric: bool = False

    def __post_init__(self):
        v = np.atleast_2d(np.asarray(self.vertices, dtype=float))
        if v.size == 0:
            raise ValueError("polytope needs at least one vertex")
        object.__setattr__(self, "vertices", v)

    @property
    def dim(self) -> int:
        return self.vertices.shape[1]

    def __len__(self) -> int:
        return self.vertices.shape[0]

    @classmethod
    def symmetric_hull(cls, points: np.ndarray) -> "Polytope":
        """``conv{±x_1, ..., ±x_N}``."""
        points = np.atleast_2d(np.asarray(points, dtype=float))
        return cls(np.vstack([points, -points]), symmetric=True)


def project_polytope(P: Polytope, F: "Subspace") -> Polytope:
    if P.dim != F.ambient_dim:
        raise ValueError(f"polytope lives in R^{P.dim}, subspace in R^{F.ambient_dim}")
    return Polytope(P.vertices @ F.basis, symmetric=P.symmetric)


def affine_rank(points: np.ndarray, tol: float = HULL_TOL) -> int:
    pts = np.asarray(points, dtype=float)
    if len(pts) < 2:
        return 0
    centered = pts - pts.mean(axis=0)
    s = np.linalg.svd(centered, compute_uv=False)
    scale = max(1.0, float(np.max(np.abs(pts))))
    return int(np.sum(s > tol * scale))


def hull_volume(P: Polytope | np.ndarray, method: str = "qhull", seed: int = 0) -> float:
    """Exact volume of the convex hull of the vertices, for dimension <= 8.

    Affinely degenerate vertex sets give 0.  ``method="beneath-beyond"``
    runs the in-house incremental construction instead of Qhull; the two
    are cross-checked in the test suite.
    """
    pts = P.vertices if isinstance(P, Polytope) else np.atleast_2d(np.asarray(P, dtype=float))
    m, k = pts.shape
    if k > MAX_EXACT_DIM:
        raise ValueError(f"exact hull volume limited to dimension {MAX_EXACT_DIM}; use mc_volume")
    if k == 1:
        return float(pts.max() - pts.min())
    if m < k + 1 or affine_rank(pts) < k:
        return 0.0
    if method == "qhull":
        try:
            return float(ConvexHull(pts).volume)
        except QhullError:
            return 0.0
    if method == "beneath-beyond":
        rot = random_rotation(k, RngStream(seed, 0))
        return beneath_beyond_volume(pts @ rot.T)
    raise ValueError(f"unknown hull method {method!r}")


def _facet_plane(pts: np.ndarray, interior: np.ndarray) -> tuple[np.ndarray, float]:
    # normal of the hyperplane through k points in R^k, oriented away from `interior`
    diffs = pts[1:] - pts[0]
    _, _, vt = np.linalg.svd(diffs)
    a = vt[-1]
    b = float(a @ pts[0])
    if a @ interior > b:
        a, b = -a, -b
    return a, b


def beneath_beyond_volume(points: np.ndarray, tol: float = HULL_TOL) -> float:
    """Hull volume by incremental (beneath-beyond) insertion.

    Keeps a simplicial boundary; each new point removes the facets it sees
    and cones the horizon ridges to itself.  The volume is the sum of the
    cones from an interior point over the final facets.
    """
    pts = np.asarray(points, dtype=float)
    m, k = pts.shape
    scale = max(1.0, float(np.max(np.abs(pts))))
    eps = tol * scale

    # initial simplex: greedy farthest points from the running affine hull
    first = int(np.argmax(np.linalg.norm(pts - pts.mean(axis=0), axis=1)))
    chosen = [first]
    for _ in range(k):
        base = pts[chosen[0]]
        diffs = pts[chosen[1:]] - base
        rel = pts - base
        if len(diffs):
            q, _ = np.linalg.qr(diffs.T)
            rel = rel - (rel @ q) @ q.T
        dist = np.linalg.norm(rel, axis=1)
        nxt = int(np.argmax(dist))
        if dist[nxt] <= eps:
            return 0.0
        chosen.append(nxt)

    interior = pts[chosen].mean(axis=0)
    facets: dict[int, tuple[tuple[int, ...], np.ndarray, float]] = {}
    ridges: dict[tuple[int, ...], set[int]] = {}
    counter = itertools.count()

    def add_facet(verts: tuple[int, ...]):
        a, b = _facet_plane(pts[list(verts)], interior)
        fid = next(counter)
        facets[fid] = (verts, a, b)
        for r in itertools.combinations(verts, k - 1):
            ridges.setdefault(r, set()).add(fid)

    def drop_facet(fid: int):
        verts, _, _ = facets.pop(fid)
        for r in itertools.combinations(verts, k - 1):
            owners = ridges[r]
            owners.discard(fid)
            if not owners:
                del ridges[r]

    for verts in itertools.combinations(sorted(chosen), k):
        add_facet(verts)

    in_simplex = set(chosen)
    for i in range(m):
        if i in in_simplex:
            continue
        p = pts[i]
        ids = list(facets)
        normals = np.array([facets[f][1] for f in ids])
        offsets = np.array([facets[f][2] for f in ids])
        above = normals @ p - offsets > eps
        if not above.any():
            continue
        visible = {ids[j] for j in np.flatnonzero(above)}
        horizon = []
        for fid in visible:
            for r in itertools.combinations(facets[fid][0], k - 1):
                if any(g not in visible for g in ridges[r]):
                    horizon.append(r)
        for fid in visible:
            drop_facet(fid)
        for r in horizon:
            add_facet(tuple(sorted(r + (i,))))

    total = 0.0
    for verts, _, _ in facets.values():
        total += abs(np.linalg.det(pts[list(verts)] - interior))
    return total / math.factorial(k)


def facet_inequalities(P: Polytope) -> tuple[np.ndarray, np.ndarray]:
    """Outer facet description ``A x <= b`` (unit normals) via Qhull."""
    if P.dim > MAX_EXACT_DIM:
        raise ValueError("facet enumeration limited to low dimension")
    eq = ConvexHull(P.vertices).equations
    return eq[:, :-1], -eq[:, -1]


def inradius_at_origin(P: Polytope) -> float:
    """Largest r with ``r B_2^k`` inside P (negative if 0 is outside)."""
    _, b = facet_inequalities(P)
    return float(np.min(b))


def zonotope_projection_volume(F: "Subspace", side: float = 1.0, linear_map: np.ndarray | None = None) -> float:
    """``vol_k(P_F(side * [-1/2, 1/2]^n))`` as a sum of k x k minors.

    A projected cube is the zonotope generated by the projected edge vectors
    ``side * B^T M e_j``; its volume is the sum of ``|det|`` over every
    k-subset of generators.
    """
    gens = F.basis.T if linear_map is None else F.basis.T @ linear_map
    k, n = gens.shape
    count = math.comb(n, k)
    if count > ZONOTOPE_BUDGET:
        raise ValueError(f"C({n},{k}) = {count} subsets exceeds the budget; use mc_volume")
    total = 0.0
    combos = itertools.combinations(range(n), k)
    while True:
        chunk = np.array(list(itertools.islice(combos, 65536)), dtype=np.intp)
        if chunk.size == 0:
            break
        blocks = np.transpose(gens[:, chunk], (1, 0, 2))
        total += float(np.abs(np.linalg.det(blocks)).sum())
    return side**k * total


def hull_distances(vertices: np.ndarray, points: np.ndarray, tol: float = HULL_TOL, max_iter: int = FW_ITERS) -> np.ndarray:
    """Euclidean distance from each point to ``conv(vertices)``.

    Away-step Frank-Wolfe on the barycentric weights, run on all points at
    once.  A point stops when the residual norm (upper bound) and the
    supporting-halfspace bound (lower bound) agree to ``tol``; points
    within ``tol`` of the hull report exactly 0.  Points still open after
    ``max_iter`` sweeps (near-boundary points on badly conditioned faces
    converge slowly) are finished by Wolfe's min-norm-point method.
    """
    return _hull_query(vertices, points, tol, max_iter, decide_only=False)


def hull_contains(vertices: np.ndarray, points: np.ndarray, tol: float = 1e-10, max_iter: int = FW_ITERS) -> np.ndarray:
    """Membership of each point in ``conv(vertices)``, up to distance ``tol``.

    Stops as soon as either certificate appears: residual below ``tol``
    (inside) or a strictly separating supporting halfspace (outside).
    """
    return _hull_query(vertices, points, tol, max_iter, decide_only=True) == 0.0


def _hull_query(vertices, points, tol, max_iter, decide_only):
    V = np.atleast_2d(np.asarray(vertices, dtype=float))
    X = np.atleast_2d(np.asarray(points, dtype=float))
    out = _frank_wolfe(V, X, tol, max_iter, decide_only)
    for i in np.flatnonzero(np.isnan(out)):
        d = min_norm_point(V - X[i])
        out[i] = 0.0 if d <= tol else d
    return out


def _frank_wolfe(V, X, tol, max_iter, decide_only):
    # unresolved points come back as NaN
    nb, m = X.shape[0], V.shape[0]
    out = np.full(nb, np.nan)
    start = np.argmin(((X[:, None, :] - V[None, :, :]) ** 2).sum(axis=2), axis=1)
    lam = np.zeros((nb, m))
    lam[np.arange(nb), start] = 1.0
    y = V[start].copy()
    live = np.arange(nb)
    best = np.full(nb, np.inf)
    stall = np.zeros(nb, dtype=int)
    for _ in range(max_iter):
        x = X[live]
        r = y - x
        ub = np.linalg.norm(r, axis=1)
        g = r @ V.T
        s = np.argmin(g, axis=1)
        rows = np.arange(len(live))
        gmin = g[rows, s]
        rx = np.einsum("ij,ij->i", r, x)
        ry = np.einsum("ij,ij->i", r, y)
        with np.errstate(divide="ignore", invalid="ignore"):
            lb = np.where(ub > 0, np.maximum(0.0, (gmin - rx) / ub), 0.0)
        inside = ub <= tol
        # once the residual stops shrinking the lower bound is lost in rounding
        # (r = y - x cancels); ub is then as accurate as float64 allows
        improved = ub < best * (1.0 - 1e-12)
        stall = np.where(improved, 0, stall + 1)
        best = np.minimum(best, ub)
        done = inside | ((lb > 0) if decide_only else (ub - lb <= tol)) | (stall >= STALL_ITERS)
        if done.any():
            out[live[done]] = np.where(inside[done], 0.0, ub[done])
            keep = ~done
            live, lam, y = live[keep], lam[keep], y[keep]
            best, stall = best[keep], stall[keep]
            r, g, s, gmin, ry = r[keep], g[keep], s[keep], gmin[keep], ry[keep]
            if live.size == 0:
                return out
            rows = np.arange(len(live))
        fw_gap = ry - gmin
        g_active = np.where(lam > 0, g, -np.inf)
        a = np.argmax(g_active, axis=1)
        away_gap = g_active[rows, a] - ry
        use_fw = fw_gap >= away_gap
        lam_a = lam[rows, a]
        d = np.where(use_fw[:, None], V[s] - y, y - V[a])
        with np.errstate(divide="ignore", invalid="ignore"):
            gmax = np.where(use_fw, 1.0, lam_a / (1.0 - lam_a))
            dd = np.einsum("ij,ij->i", d, d)
            gamma = np.where(dd > 0, -np.einsum("ij,ij->i", r, d) / dd, 0.0)
        gamma = np.clip(gamma, 0.0, gmax)
        fw_rows, away_rows = rows[use_fw], rows[~use_fw]
        lam[fw_rows] *= (1.0 - gamma[fw_rows])[:, None]
        lam[fw_rows, s[fw_rows]] += gamma[fw_rows]
        lam[away_rows] *= (1.0 + gamma[away_rows])[:, None]
        lam[away_rows, a[away_rows]] -= gamma[away_rows]
        drop = away_rows[gamma[away_rows] >= gmax[away_rows]]
        lam[drop, a[drop]] = 0.0
        y = y + gamma[:, None] * d
    return out


def _affine_min_norm(S: np.ndarray) -> np.ndarray:
    # weights a with sum 1 minimizing |a @ S|: bordered normal equations
    q = len(S)
    M = np.zeros((q + 1, q + 1))
    M[:q, :q] = S @ S.T
    M[:q, q] = M[q, :q] = 1.0
    rhs = np.zeros(q + 1)
    rhs[q] = 1.0
    return np.linalg.lstsq(M, rhs, rcond=None)[0][:q]


def min_norm_point(W: np.ndarray, rel_tol: float = 1e-12, max_major: int | None = None) -> float:
    """Norm of the point of ``conv(rows of W)`` closest to the origin (Wolfe 1976).

    Finite active-set method: add the most violating vertex, then walk to
    the affine minimizer of the active set, dropping vertices whose weight
    hits zero on the way.
    """
    W = np.atleast_2d(np.asarray(W, dtype=float))
    m = len(W)
    scale = float(np.max(np.einsum("ij,ij->i", W, W)))
    if max_major is None:
        max_major = 50 * m + 100
    act = [int(np.argmin(np.einsum("ij,ij->i", W, W)))]
    lam = np.array([1.0])
    y = W[act[0]].copy()
    for _ in range(max_major):
        yy = float(y @ y)
        if yy <= (rel_tol * scale) ** 2:
            return 0.0
        g = W @ y
        j = int(np.argmin(g))
        if yy - g[j] <= rel_tol * scale or j in act:
            return math.sqrt(yy)
        act.append(j)
        lam = np.append(lam, 0.0)
        while True:
            alpha = _affine_min_norm(W[act])
            if np.all(alpha > 1e-14):
                lam = alpha
                break
            neg = alpha <= 1e-14
            with np.errstate(divide="ignore", invalid="ignore"):
                ratios = np.where(neg, lam / (lam - alpha), np.inf)
            theta = float(np.clip(np.min(ratios), 0.0, 1.0))
            lam = lam + theta * (alpha - lam)
            keep = lam > 1e-14
            if keep.all():
                keep[int(np.argmin(np.where(neg, ratios, np.inf)))] = False
            act = [a for a, kp in zip(act, keep) if kp]
            lam = lam[keep]
            lam /= lam.sum()
        y = lam @ W[act]
    raise RuntimeError("min-norm-point iteration did not converge")


def hull_distance(P: Polytope | np.ndarray, x: np.ndarray, tol: float = HULL_TOL) -> float:
    V = P.vertices if isinstance(P, Polytope) else P
    return float(hull_distances(V, np.asarray(x, dtype=float)[None, :], tol=tol)[0])


def mc_volume(P: Polytope, trials: int, rng: RngStream | np.random.Generator | int, batch: int = 4096) -> MCEstimate:
    """Rejection volume estimate from the circumscribed ball around the vertex barycenter."""
    if trials < 1000:
        raise ValueError("mc_volume needs at least 1000 trials")
    seed = rng.seed if isinstance(rng, RngStream) else None
    V = P.vertices
    k = P.dim
    if affine_rank(V) < k:
        return MCEstimate(0.0, 0.0, trials, seed, flags=("degenerate",))
    g = as_generator(rng)
    center = V.mean(axis=0)
    radius = float(np.max(np.linalg.norm(V - center, axis=1)))
    hits = 0
    done = 0
    while done < trials:
        b = min(batch, trials - done)
        dirs = g.standard_normal((b, k))
        dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
        pts = center + radius * dirs * g.random(b)[:, None] ** (1.0 / k)
        hits += int(np.sum(hull_contains(V, pts, tol=HULL_TOL)))
        done += b
    ball = math.pi ** (k / 2) / math.gamma(k / 2 + 1) * radius**k
    frac = hits / trials
    flags: tuple[str, ...] = ()
    if frac < 1e-3:
        log.warning("mc_volume acceptance %.2e is below 1e-3", frac)
        flags = ("low-acceptance",)
    if hits == 0:
        flags += ("zero-hits",)
    se = ball * math.sqrt(frac * (1 - frac) / trials)
    return MCEstimate(ball * frac, se, trials, seed, flags=flags)


def sigma_inf(E: "Subspace", F: "Subspace") -> float:
    """Operator norm of the difference of the orthogonal projectors."""
    if E.ambient_dim != F.ambient_dim or E.dim != F.dim:
        raise ValueError("subspaces must share ambient dimension and dimension")
    return operator_norm(E.projector() - F.projector())


def perturb_subspace(F: "Subspace", eps: float, rng: RngStream | np.random.Generator | int) -> "Subspace":
    """Rotate F by ``U = exp(A)``, A random skew-symmetric with ``||I - U|| <= eps``.

    For skew A with largest rotation angle t, ``||I - exp(A)|| = 2 sin(t/2)``,
    so A is scaled to angle ``2 asin(eps/2)``.
    """
    from .sampling import Subspace

    if eps <= 0:
        raise ValueError("eps must be positive")
    g = as_generator(rng)
    n = F.ambient_dim
    G = g.standard_normal((n, n))
    A = G - G.T
    angle = 2 * math.asin(min(eps, 2.0) / 2) * (1 - 1e-9)
    top = np.max(np.abs(np.linalg.eigvals(A).imag))
    A *= angle / top
    U = expm(A)
    return Subspace(U @ F.basis)
