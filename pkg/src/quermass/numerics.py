"""Dense linear algebra, special functions and log-domain moment accumulation.

Matrices are plain ``numpy`` arrays throughout; problem sizes never exceed
n = 64 so nothing here bothers with sparsity.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

RANK_TOL = 1e-12


class DegenerateInputError(ValueError):
    """Raised when an input is rank deficient or lies outside an operation's domain."""


@dataclass(frozen=True)
class RngStream:
    """Counter-based random stream keyed by ``(seed, stream_index)``.

    Each stream drives a Philox generator whose key is derived from the seed
    and the full index path, so trial ``i`` sees the same numbers no matter
    which worker runs it or in what order.
    """

    seed: int
    stream_index: int = 0
    path: tuple[int, ...] = field(default=())

    def generator(self) -> np.random.Generator:
        ss = np.random.SeedSequence(self.seed, spawn_key=self.path + (self.stream_index,))
        return np.random.Generator(np.random.Philox(ss))

    def child(self, index: int) -> "RngStream":
        """Independent sub-stream ``index`` nested below this one."""
        return RngStream(self.seed, index, self.path + (self.stream_index,))


def as_generator(rng: RngStream | np.random.Generator | int) -> np.random.Generator:
    if isinstance(rng, np.random.Generator):
        return rng
    if isinstance(rng, RngStream):
        return rng.generator()
    return RngStream(int(rng)).generator()


def orthonormalize(a: np.ndarray) -> np.ndarray:
    """Orthonormal basis of the column space of ``a`` (n x k, n >= k).

    Householder QR with the sign convention ``diag(R) > 0``, so an input whose
    columns are already orthonormal (and positively oriented) comes back
    unchanged.
    """
    a = np.asarray(a, dtype=float)
    if a.ndim != 2:
        raise ValueError("expected a 2-d array")
    n, k = a.shape
    if k > n:
        raise DegenerateInputError(f"cannot orthonormalize {k} columns in R^{n}")
    q, r = np.linalg.qr(a)
    d = np.diag(r)
    scale = max(1.0, float(np.max(np.linalg.norm(a, axis=0)))) if k else 1.0
    if k and np.min(np.abs(d)) < RANK_TOL * scale:
        raise DegenerateInputError("rank-deficient input to orthonormalize")
    return q * np.where(d < 0, -1.0, 1.0)


def determinant(a: np.ndarray) -> float:
    """Determinant by partially pivoted LU; 0 for singular input."""
    a = np.asarray(a, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError("determinant needs a square matrix")
    if a.shape[0] == 0:
        return 1.0
    return float(np.linalg.det(a))


def operator_norm(a: np.ndarray, tol: float = 1e-10, max_iter: int = 100_000) -> float:
    """Largest singular value via power iteration on ``A^T A``.

    The start vector is drawn from a fixed-seed stream; if the iterate
    collapses (start orthogonal to the top eigenspace) the next stream is
    tried.
    """
    a = np.asarray(a, dtype=float)
    if a.size == 0:
        return 0.0
    ata = a.T @ a
    if not np.any(ata):
        return 0.0
    for restart in range(8):
        v = RngStream(0x5EED, restart).generator().standard_normal(ata.shape[0])
        v /= np.linalg.norm(v)
        lam = float(v @ ata @ v)
        for _ in range(max_iter):
            w = ata @ v
            nw = np.linalg.norm(w)
            if nw == 0.0:
                break
            v = w / nw
            new = float(v @ ata @ v)
            if abs(new - lam) <= 1e-2 * tol * new:
                return math.sqrt(max(new, 0.0))
            lam = new
        else:
            raise RuntimeError("power iteration did not converge")
    return 0.0


def log_gamma(x: float) -> float:
    if x <= 0:
        raise DegenerateInputError(f"log_gamma needs x > 0, got {x}")
    return math.lgamma(x)


def mean_of_powers_log(values: Sequence[float] | np.ndarray, p: float) -> float:
    """``log(mean(values**p))`` evaluated as a shifted exponential sum.

    Safe for p = -n with tiny values, where the direct power overflows.
    Zero entries are allowed only for p > 0.
    """
    v = np.asarray(values, dtype=float).ravel()
    if v.size == 0:
        raise DegenerateInputError("empty value list")
    if p == 0:
        raise DegenerateInputError("p must be nonzero")
    if np.any(v < 0) or (p < 0 and np.any(v == 0)) or not np.all(np.isfinite(v)):
        raise DegenerateInputError("values must be positive (a projection volume degenerated upstream)")
    with np.errstate(divide="ignore"):
        logs = p * np.log(v)
    top = float(np.max(logs))
    if top == -math.inf:
        return -math.inf
    return top + math.log(float(np.mean(np.exp(logs - top))))


def power_weights(values: np.ndarray, p: float) -> np.ndarray:
    """``values**p`` rescaled to mean one, computed without overflow."""
    with np.errstate(divide="ignore"):
        logs = p * np.log(np.asarray(values, dtype=float))
    w = np.exp(logs - np.max(logs))
    return w / np.mean(w)


def random_rotation(k: int, rng: RngStream | np.random.Generator | int) -> np.ndarray:
    """Haar-distributed orthogonal k x k matrix."""
    g = as_generator(rng)
    q = orthonormalize(g.standard_normal((k, k)))
    return q


@dataclass(frozen=True)
class MCEstimate:
    """Monte Carlo estimate with its standard error and provenance."""

    value: float
    stderr: float
    n_samples: int
    seed: int | None = None
    approximate: bool = False
    flags: tuple[str, ...] = ()

    def to_json(self) -> dict:
        return {
            "value": self.value,
            "stderr": self.stderr,
            "n": self.n_samples,
            "seed": self.seed,
            "approx": self.approximate,
            "flags": list(self.flags),
        }

    def within(self, target: float, sigmas: float = 3.0) -> bool:
        return abs(self.value - target) <= sigmas * self.stderr
