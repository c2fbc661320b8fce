"""Convex bodies: support functions, gauges, membership, volumes, isotropic position.

Every body is a base shape (ball, cube, cross-polytope, simplex or a vertex
list) optionally pushed through a determinant-one linear map.  The map is
kept separate so affine-invariance checks can switch it on and off while
samplers keep drawing from the base shape.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import hulls
from .numerics import DegenerateInputError, RngStream, as_generator, log_gamma

KINDS = ("ball", "cube", "cross", "simplex", "vpoly")
ANALYTIC_KINDS = ("ball", "cube", "cross", "simplex")
ISOTROPIC_SAMPLES = 100_000


@dataclass(frozen=True, eq=False)
class BodySpec:
    kind: str
    dim: int
    scale: float = 1.0
    vertices: np.ndarray | None = None
    symmetric: bool = False
    linear_map: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown body kind {self.kind!r}")
        if self.dim < 1:
            raise ValueError("dimension must be positive")
        if self.kind != "vpoly" and not self.scale > 0:
            raise ValueError("radius/side/scale must be positive")
        if self.kind == "vpoly":
            v = np.atleast_2d(np.asarray(self.vertices, dtype=float))
            if v.shape[1] != self.dim:
                raise ValueError("vertex dimension mismatch")
            if hulls.affine_rank(v) < self.dim:
                raise DegenerateInputError("vertices do not span R^n")
            if self.symmetric and not _closed_under_negation(v):
                raise ValueError("symmetric flag set but vertex list is not closed under negation")
            object.__setattr__(self, "vertices", v)
        if self.linear_map is not None:
            m = np.asarray(self.linear_map, dtype=float)
            if m.shape != (self.dim, self.dim) or abs(np.linalg.det(m) - 1.0) > 1e-8:
                raise ValueError("linear map must be n x n with determinant 1")
            object.__setattr__(self, "linear_map", m)

    @property
    def analytic(self) -> bool:
        return self.kind in ANALYTIC_KINDS

    @property
    def is_symmetric(self) -> bool:
        return self.kind in ("ball", "cube", "cross") or (self.kind == "vpoly" and self.symmetric)

    def base(self) -> "BodySpec":
        return replace(self, linear_map=None)


def _closed_under_negation(v: np.ndarray) -> bool:
    d = np.linalg.norm(v[:, None, :] + v[None, :, :], axis=2)
    return bool(np.all(d.min(axis=1) <= 1e-9 * max(1.0, float(np.abs(v).max()))))


def ball(n: int, radius: float = 1.0) -> BodySpec:
    return BodySpec("ball", n, radius)


def cube(n: int, side: float = 1.0) -> BodySpec:
    """``side * [-1/2, 1/2]^n``."""
    return BodySpec("cube", n, side)


def cross_polytope(n: int, scale: float = 1.0) -> BodySpec:
    """``scale * conv{±e_1, ..., ±e_n}``."""
    return BodySpec("cross", n, scale)


def simplex(n: int, scale: float = 1.0) -> BodySpec:
    """``scale * conv{0, e_1, ..., e_n}`` translated so its barycenter is 0."""
    return BodySpec("simplex", n, scale)


def vpolytope(vertices, symmetric: bool = False) -> BodySpec:
    v = np.atleast_2d(np.asarray(vertices, dtype=float))
    return BodySpec("vpoly", v.shape[1], 1.0, v, symmetric)


def with_linear_map(body: BodySpec, matrix: np.ndarray) -> BodySpec:
    """Compose a determinant-one map on top of whatever map the body already carries."""
    m = np.asarray(matrix, dtype=float)
    if body.linear_map is not None:
        m = m @ body.linear_map
    return replace(body, linear_map=m)


def random_slmap(n: int, rng: RngStream | np.random.Generator | int, spread: float = 0.5) -> np.ndarray:
    """Random determinant-one matrix ``Q1 diag(exp(s)) Q2`` with log singular values in ``[-spread, spread]``."""
    g = as_generator(rng)
    q1, _ = np.linalg.qr(g.standard_normal((n, n)))
    q2, _ = np.linalg.qr(g.standard_normal((n, n)))
    s = g.uniform(-spread, spread, n)
    s -= s.mean()
    m = q1 @ np.diag(np.exp(s)) @ q2
    if np.linalg.det(m) < 0:
        m[:, 0] *= -1
    return m


def body_from_config(cfg: dict) -> BodySpec:
    """Build a body from ``{"kind", "dim", "scale", "vertices", "apply_random_slmap", "slmap_seed"}``."""
    kind = cfg["kind"]
    if kind == "vpoly":
        body = vpolytope(cfg["vertices"], symmetric=bool(cfg.get("symmetric", False)))
    else:
        body = BodySpec(kind, int(cfg["dim"]), float(cfg.get("scale", 1.0)))
    if cfg.get("apply_random_slmap"):
        body = with_linear_map(body, random_slmap(body.dim, RngStream(int(cfg.get("slmap_seed", 0)), 0)))
    return body


def body_to_config(body: BodySpec) -> dict:
    out = {"kind": body.kind, "dim": body.dim, "scale": body.scale}
    if body.kind == "vpoly":
        out["vertices"] = body.vertices.tolist()
        out["symmetric"] = body.symmetric
    if body.linear_map is not None:
        out["linear_map"] = body.linear_map.tolist()
    return out


def _simplex_vertices(n: int, s: float) -> np.ndarray:
    v = np.vstack([np.zeros(n), s * np.eye(n)])
    return v - v.mean(axis=0)


def base_vertices(body: BodySpec) -> np.ndarray:
    """Vertex list of the base shape (before the linear map)."""
    n = body.dim
    if body.kind == "cross":
        return body.scale * np.vstack([np.eye(n), -np.eye(n)])
    if body.kind == "simplex":
        return _simplex_vertices(n, body.scale)
    if body.kind == "vpoly":
        return body.vertices
    if body.kind == "cube":
        if n > 16:
            raise ValueError("cube vertex enumeration limited to n <= 16")
        corners = np.array(np.meshgrid(*[[-0.5, 0.5]] * n, indexing="ij")).reshape(n, -1).T
        return body.scale * corners
    raise ValueError("a ball has no vertex list")


def vertex_array(body: BodySpec) -> np.ndarray:
    v = base_vertices(body)
    return v if body.linear_map is None else v @ body.linear_map.T


def _support_base(body: BodySpec, xi: np.ndarray) -> np.ndarray:
    if body.kind == "ball":
        return body.scale * np.linalg.norm(xi, axis=-1)
    if body.kind == "cube":
        return 0.5 * body.scale * np.abs(xi).sum(axis=-1)
    if body.kind == "cross":
        return body.scale * np.abs(xi).max(axis=-1)
    return (xi @ base_vertices(body).T).max(axis=-1)


def support_values(body: BodySpec, xi: np.ndarray) -> np.ndarray:
    """Support function at each row of ``xi``; rows need not be unit vectors."""
    xi = np.asarray(xi, dtype=float)
    if body.linear_map is not None:
        xi = xi @ body.linear_map
    return _support_base(body, xi)


def support(body: BodySpec, xi) -> float:
    xi = np.asarray(xi, dtype=float)
    if abs(np.linalg.norm(xi) - 1.0) > 1e-10:
        raise ValueError("support direction must be a unit vector")
    return float(support_values(body, xi))


def _gauge_base(body: BodySpec, x: np.ndarray) -> np.ndarray:
    n = body.dim
    if body.kind == "ball":
        return np.linalg.norm(x, axis=-1) / body.scale
    if body.kind == "cube":
        return 2.0 * np.abs(x).max(axis=-1) / body.scale
    if body.kind == "cross":
        return np.abs(x).sum(axis=-1) / body.scale
    if body.kind == "simplex":
        # facets -x_i <= s/(n+1) and sum x_i <= s/(n+1) of the centered corner simplex
        worst = np.maximum((-x).max(axis=-1), x.sum(axis=-1))
        return np.maximum(worst, 0.0) * (n + 1) / body.scale
    if n <= hulls.MAX_EXACT_DIM:
        return _gauge_facets(body.vertices, np.atleast_2d(x)).reshape(np.shape(x)[:-1])
    return _gauge_bisection(body.vertices, np.atleast_2d(x)).reshape(np.shape(x)[:-1])


def _gauge_facets(V: np.ndarray, X: np.ndarray) -> np.ndarray:
    # K = {a_j . x <= b_j} with b_j > 0 when 0 is interior, so ||x||_K = max_j a_j . x / b_j
    A, b = hulls.facet_inequalities(hulls.Polytope(V))
    if np.min(b) <= 0:
        raise DegenerateInputError("origin is not interior to the vertex hull")
    return np.maximum((X @ A.T / b).max(axis=1), 0.0)


def _gauge_bisection(V: np.ndarray, X: np.ndarray, rel_tol: float = 1e-9, max_iter: int = 60) -> np.ndarray:
    # x in tK  <=>  dist(x/t, K) == 0; bracket then bisect all points together
    norms = np.linalg.norm(X, axis=1)
    out = np.zeros(len(X))
    nz = norms > 0
    if not nz.any():
        return out
    Xn = X[nz]
    R = float(np.max(np.linalg.norm(V, axis=1)))
    lo = norms[nz] / R
    hi = 2.0 * lo
    dist_tol = 1e-11 * R
    inside = hulls.hull_contains(V, Xn / hi[:, None], tol=dist_tol)
    guard = 0
    while not inside.all():
        hi = np.where(inside, hi, 2.0 * hi)
        inside = hulls.hull_contains(V, Xn / hi[:, None], tol=dist_tol)
        guard += 1
        if guard > 200:
            raise DegenerateInputError("origin is not interior to the vertex hull")
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        ok = hulls.hull_contains(V, Xn / mid[:, None], tol=dist_tol)
        hi = np.where(ok, mid, hi)
        lo = np.where(ok, lo, mid)
        if np.all(hi - lo <= rel_tol * 1e-1 * hi):
            break
    out[nz] = 0.5 * (lo + hi)
    return out


def gauge_values(body: BodySpec, x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if body.linear_map is not None:
        x = np.linalg.solve(body.linear_map, x.T).T if x.ndim > 1 else np.linalg.solve(body.linear_map, x)
    return _gauge_base(body, x)


def gauge(body: BodySpec, x) -> float:
    """Minkowski functional ``||x||_K`` (0 at the origin)."""
    return float(gauge_values(body, np.asarray(x, dtype=float)))


def contains(body: BodySpec, x, tol: float = 0.0) -> bool:
    if tol < 0:
        raise ValueError("tol must be nonnegative")
    return gauge(body, x) <= 1.0 + tol


def unit_ball_volume(k: int) -> float:
    """``omega_k = pi^(k/2) / Gamma(k/2 + 1)``."""
    if k < 0:
        raise ValueError("dimension must be nonnegative")
    return math.exp(log_unit_ball_volume(k))


def log_unit_ball_volume(k: float) -> float:
    return 0.5 * k * math.log(math.pi) - log_gamma(0.5 * k + 1.0)


def volume(body: BodySpec) -> float:
    n, s = body.dim, body.scale
    if body.kind == "ball":
        return unit_ball_volume(n) * s**n
    if body.kind == "cube":
        return s**n
    if body.kind == "cross":
        return math.exp(n * math.log(2 * s) - math.lgamma(n + 1))
    if body.kind == "simplex":
        return math.exp(n * math.log(s) - math.lgamma(n + 1))
    if n > hulls.MAX_EXACT_DIM:
        raise ValueError(f"vpoly volume in dimension {n} > {hulls.MAX_EXACT_DIM}: use hulls.mc_volume")
    return hulls.hull_volume(body.vertices)


@dataclass(frozen=True)
class IsotropicData:
    scale_to_volume_one: float
    L: float
    analytic: bool
    whitening_residual: float = 0.0


def isotropic_position(body: BodySpec, rng: RngStream | np.random.Generator | int = 0) -> tuple[BodySpec, IsotropicData]:
    """Volume-one, centered body with covariance ``L^2 I``, plus its isotropic constant.

    The analytic kinds are affinely equivalent to their isotropic copy, so
    any linear map on the input is discarded.  Vertex bodies are whitened
    with the covariance of uniform samples.
    """
    n = body.dim
    if body.kind == "cube":
        return cube(n, 1.0), IsotropicData(1.0 / body.scale, 1.0 / math.sqrt(12.0), True)
    if body.kind == "ball":
        r = math.exp(-log_unit_ball_volume(n) / n)
        return ball(n, r), IsotropicData(r / body.scale, r / math.sqrt(n + 2), True)
    if body.kind == "cross":
        t = math.exp((math.lgamma(n + 1) - n * math.log(2.0)) / n)
        L = t * math.sqrt(2.0 / ((n + 1) * (n + 2)))
        return cross_polytope(n, t), IsotropicData(t / body.scale, L, True)
    if body.kind == "simplex":
        return _isotropic_simplex(n)
    return _isotropic_vpoly(body, rng)


def simplex_covariance(n: int, s: float) -> np.ndarray:
    """Exact covariance of the uniform law on the centered corner simplex of size s."""
    return s**2 * ((n + 1) * np.eye(n) - np.ones((n, n))) / ((n + 1) ** 2 * (n + 2))


def _inverse_sqrt_det_one(cov: np.ndarray) -> np.ndarray:
    w, q = np.linalg.eigh(cov)
    if np.min(w) <= 1e-14 * np.max(w):
        raise DegenerateInputError("degenerate covariance")
    m = q @ np.diag(w**-0.5) @ q.T
    return m / np.linalg.det(m) ** (1.0 / len(w))


def _isotropic_simplex(n: int) -> tuple[BodySpec, IsotropicData]:
    s = math.exp(math.lgamma(n + 1) / n)
    m = _inverse_sqrt_det_one(simplex_covariance(n, s))
    cov = m @ simplex_covariance(n, s) @ m.T
    L = math.sqrt(float(np.mean(np.diag(cov))))
    return with_linear_map(simplex(n, s), m), IsotropicData(1.0, L, True)


def _isotropic_vpoly(body: BodySpec, rng) -> tuple[BodySpec, IsotropicData]:
    from .sampling import sample_uniform

    n = body.dim
    g = as_generator(rng)
    V = vertex_array(body)
    X = sample_uniform(vpolytope(V, body.symmetric), g, size=ISOTROPIC_SAMPLES)
    center = np.zeros(n) if body.symmetric else X.mean(axis=0)
    cov = np.cov((X - center).T, bias=True)
    m = _inverse_sqrt_det_one(cov)
    W = (V - center) @ m.T
    vol = hulls.hull_volume(W) if n <= hulls.MAX_EXACT_DIM else hulls.mc_volume(hulls.Polytope(W), 200_000, g).value
    if vol <= 0:
        raise DegenerateInputError("whitened polytope has zero volume")
    c = vol ** (-1.0 / n)
    L = c * math.sqrt(float(np.mean(np.diag(m @ cov @ m.T))))
    out = vpolytope(c * W, body.symmetric)
    # fresh draw: the fitting sample is white by construction
    check = sample_uniform(out, g, size=ISOTROPIC_SAMPLES // 5)
    cov2 = np.cov(check.T, bias=True)
    residual = float(np.max(np.abs(cov2 - L**2 * np.eye(n))) / L**2)
    return out, IsotropicData(c, L, False, residual)
