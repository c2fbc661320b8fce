"""Exact samplers: sphere, uniform on a body, cone measure, beta laws, Haar subspaces."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import hulls
from .bodies import BodySpec, gauge_values, volume
from .numerics import DegenerateInputError, as_generator, orthonormalize

MEASURES = ("uniform", "cone", "beta")
REJECTION_MIN_ACCEPTANCE = 1e-4


@dataclass(frozen=True, eq=False)
class Subspace:
    """k-dimensional subspace of R^n, carried by an orthonormal n x k basis."""

    basis: np.ndarray

    def __post_init__(self):
        b = np.asarray(self.basis, dtype=float)
        if b.ndim != 2 or b.shape[1] > b.shape[0]:
            raise ValueError("basis must be n x k with k <= n")
        object.__setattr__(self, "basis", b)

    @property
    def ambient_dim(self) -> int:
        return self.basis.shape[0]

    @property
    def dim(self) -> int:
        return self.basis.shape[1]

    def projector(self) -> np.ndarray:
        return self.basis @ self.basis.T

    @classmethod
    def coordinate(cls, n: int, coords) -> "Subspace":
        return cls(np.eye(n)[:, list(coords)])


def sample_sphere(n: int, rng, size: int | None = None) -> np.ndarray:
    if n < 1:
        raise ValueError("dimension must be positive")
    g = as_generator(rng)
    shape = (n,) if size is None else (size, n)
    x = g.standard_normal(shape)
    norms = np.linalg.norm(x, axis=-1, keepdims=True)
    while np.any(norms == 0):  # measure zero
        bad = (norms == 0).ravel()
        x[bad] = g.standard_normal((int(bad.sum()), n)) if size is not None else g.standard_normal(n)
        norms = np.linalg.norm(x, axis=-1, keepdims=True)
    return x / norms


def uniform_is_exact(body: BodySpec) -> bool:
    """False when uniform sampling for this body falls back to hit-and-run."""
    if body.kind != "vpoly":
        return True
    return _rejection_acceptance(body) >= REJECTION_MIN_ACCEPTANCE


def _rejection_acceptance(body: BodySpec) -> float:
    V = body.vertices
    box = float(np.prod(V.max(axis=0) - V.min(axis=0)))
    if body.dim > hulls.MAX_EXACT_DIM:
        return 0.0
    return volume(body) / box


def sample_uniform(body: BodySpec, rng, size: int | None = None) -> np.ndarray:
    """Uniform point(s) in the body; draws in the base shape, then applies the linear map."""
    g = as_generator(rng)
    m = 1 if size is None else size
    n, s = body.dim, body.scale
    if body.kind == "ball":
        x = sample_sphere(n, g, m) * (s * g.random(m) ** (1.0 / n))[:, None]
    elif body.kind == "cube":
        x = g.uniform(-0.5 * s, 0.5 * s, (m, n))
    elif body.kind == "cross":
        e = g.standard_exponential((m, n))
        signs = np.where(g.random((m, n)) < 0.5, -1.0, 1.0)
        x = signs * e / e.sum(axis=1, keepdims=True) * (s * g.random(m) ** (1.0 / n))[:, None]
    elif body.kind == "simplex":
        w = g.dirichlet(np.ones(n + 1), m)
        x = s * (w[:, 1:] - 1.0 / (n + 1))
    elif body.kind == "vpoly":
        x = _sample_vpoly(body, g, m)
    else:
        raise ValueError(f"no uniform sampler for {body.kind!r}")
    if body.linear_map is not None:
        x = x @ body.linear_map.T
    return x[0] if size is None else x


def _sample_vpoly(body: BodySpec, g: np.random.Generator, m: int) -> np.ndarray:
    V = body.vertices
    n = body.dim
    A, b = hulls.facet_inequalities(hulls.Polytope(V))
    lo, hi = V.min(axis=0), V.max(axis=0)
    acc = _rejection_acceptance(body)
    if acc >= REJECTION_MIN_ACCEPTANCE:
        out = []
        got = 0
        batch = int(min(1e6, max(1024, 2 * m / acc)))
        while got < m:
            pts = g.uniform(lo, hi, (batch, n))
            keep = pts[np.all(pts @ A.T <= b, axis=1)]
            out.append(keep)
            got += len(keep)
        return np.vstack(out)[:m]
    return hit_and_run(A, b, V.mean(axis=0), g, m, burn_in=10 * n * n, thin=n * n)


def hit_and_run(A: np.ndarray, b: np.ndarray, start: np.ndarray, g: np.random.Generator, m: int, burn_in: int, thin: int) -> np.ndarray:
    """Hit-and-run chain in ``{x : A x <= b}``; output is approximately uniform."""
    x = np.array(start, dtype=float)
    n = len(x)
    out = np.empty((m, n))
    total = burn_in + m * thin
    for step in range(total):
        d = g.standard_normal(n)
        d /= np.linalg.norm(d)
        ad = A @ d
        slack = b - A @ x
        with np.errstate(divide="ignore"):
            t = slack / ad
        t_hi = np.min(t[ad > 0]) if np.any(ad > 0) else 0.0
        t_lo = np.max(t[ad < 0]) if np.any(ad < 0) else 0.0
        x = x + g.uniform(t_lo, t_hi) * d
        if step >= burn_in and (step - burn_in) % thin == thin - 1:
            out[(step - burn_in) // thin] = x
    return out


def sample_cone(body: BodySpec, rng, size: int | None = None) -> np.ndarray:
    """Point(s) on the boundary distributed by the cone measure: ``y / ||y||_K`` with y uniform."""
    g = as_generator(rng)
    y = np.atleast_2d(sample_uniform(body, g, 1 if size is None else size))
    gy = np.atleast_1d(gauge_values(body, y))
    while np.any(gy == 0):
        bad = gy == 0
        y[bad] = np.atleast_2d(sample_uniform(body, g, int(bad.sum())))
        gy = np.atleast_1d(gauge_values(body, y))
    x = y / gy[:, None]
    return x[0] if size is None else x


def sample_beta(n: int, beta: float, rng, size: int | None = None) -> np.ndarray:
    """Point(s) in B_2^n with density proportional to ``(1 - |x|^2)^beta``.

    The squared radius is Beta(n/2, beta + 1) distributed, the direction uniform.
    """
    if beta <= -1:
        raise DegenerateInputError("beta must exceed -1")
    g = as_generator(rng)
    m = 1 if size is None else size
    r = np.sqrt(g.beta(n / 2.0, beta + 1.0, m))
    x = sample_sphere(n, g, m) * r[:, None]
    return x[0] if size is None else x


def sample_grassmannian(n: int, k: int, rng) -> Subspace:
    """Haar-random k-dimensional subspace: orthonormalized Gaussian n x k matrix."""
    if not 1 <= k <= n:
        raise ValueError(f"need 1 <= k <= n, got k={k}, n={n}")
    g = as_generator(rng)
    while True:
        try:
            return Subspace(orthonormalize(g.standard_normal((n, k))))
        except DegenerateInputError:  # measure zero
            continue


def project_point(F: Subspace, x) -> np.ndarray:
    """Intrinsic coordinates ``B^T x`` of the orthogonal projection onto F."""
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != F.ambient_dim:
        raise ValueError(f"point has dimension {x.shape[-1]}, subspace lives in R^{F.ambient_dim}")
    return x @ F.basis


def sample_measure(measure: str, body: BodySpec, rng, size: int) -> np.ndarray:
    if measure == "uniform":
        return sample_uniform(body, rng, size)
    if measure == "cone":
        return sample_cone(body, rng, size)
    raise ValueError(f"unknown measure {measure!r}; expected one of {MEASURES}")
