"""Monte Carlo estimators of projection-volume functionals and related averages.

Every moment of the form ``mean(v**p)`` goes through the log domain, since
``p = -n`` with projection volumes near 1e-2 leaves double range quickly.
Subspace ``j`` of an estimate is drawn from ``rng.child(j)``, which makes
the sample independent of how the work was split.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import hulls
from .bodies import (
    BodySpec,
    log_unit_ball_volume,
    support_values,
    vertex_array,
    volume,
)
from .hulls import Polytope
from .numerics import (
    DegenerateInputError,
    MCEstimate,
    RngStream,
    mean_of_powers_log,
    power_weights,
)
from .sampling import Subspace, sample_grassmannian, sample_sphere, sample_uniform

DEFAULT_M = 2000
MIN_M = 100
MC_VOLUME_TRIALS = 200_000
HEAVY_TAIL_SHARE = 0.5
SKEW_WARN = 10.0
CONST_RTOL = 1e-12

Convex = BodySpec | Polytope


@dataclass(frozen=True)
class ProjectionVolumeSample:
    subspace_seed: int | None
    k: int
    volume: float
    method: str  # "analytic", "exact-hull", "zonotope" or "mc"


def _stream(rng) -> RngStream:
    if isinstance(rng, RngStream):
        return rng
    if isinstance(rng, (int, np.integer)):
        return RngStream(int(rng))
    raise TypeError("estimators need an RngStream or an integer seed so subspaces can be indexed")


def ambient_dim(K: Convex) -> int:
    return K.dim


def projection_volume(K: Convex, F: Subspace, seed: int | None = None, rng=None) -> ProjectionVolumeSample:
    """``vol_k(P_F K)`` by the cheapest exact route available for K.

    Balls and cubes have closed forms (ellipsoid determinant, zonotope
    minors); everything with a vertex list is projected and hulled.  Above
    the exact hull dimension the volume is a Monte Carlo estimate and
    ``rng`` must be supplied.
    """
    k, n = F.dim, F.ambient_dim
    if ambient_dim(K) != n:
        raise ValueError(f"body lives in R^{ambient_dim(K)}, subspace in R^{n}")
    method = "exact-hull"
    if isinstance(K, BodySpec) and k == n:
        vol, method = volume(K), "analytic"
    elif isinstance(K, BodySpec) and K.kind == "ball":
        vol = math.exp(log_unit_ball_volume(k)) * K.scale**k
        if K.linear_map is not None:
            # P_F(M B) is the ellipsoid with Gram matrix B^T M M^T B
            g = F.basis.T @ K.linear_map
            vol *= math.sqrt(max(np.linalg.det(g @ g.T), 0.0))
        method = "analytic"
    elif isinstance(K, BodySpec) and K.kind == "cube":
        vol = hulls.zonotope_projection_volume(F, K.scale, K.linear_map)
        method = "zonotope"
    else:
        V = K.vertices if isinstance(K, Polytope) else vertex_array(K)
        P = Polytope(V @ F.basis)
        if k <= hulls.MAX_EXACT_DIM:
            vol = hulls.hull_volume(P)
        else:
            if rng is None:
                raise ValueError(f"projection to dimension {k} needs Monte Carlo; pass rng")
            vol = hulls.mc_volume(P, MC_VOLUME_TRIALS, rng).value
            method = "mc"
    if not vol > 0:
        raise DegenerateInputError(f"projection volume is zero (subspace seed {seed}); the input body is lower dimensional")
    return ProjectionVolumeSample(seed, k, float(vol), method)


def projection_volumes(K: Convex, k: int, m: int, rng) -> np.ndarray:
    """Projection volumes onto m Haar subspaces; subspace j comes from ``rng.child(j)``."""
    stream = _stream(rng)
    n = ambient_dim(K)
    out = np.empty(m)
    for j in range(m):
        child = stream.child(j)
        F = sample_grassmannian(n, k, child)
        out[j] = projection_volume(K, F, seed=stream.seed, rng=child.child(1)).volume
    return out


def body_log_volume(K: Convex, rng=None) -> tuple[float, float, bool]:
    """``(log vol_n(K), stderr of that log, approximate)``."""
    if isinstance(K, BodySpec) and (K.analytic or K.dim <= hulls.MAX_EXACT_DIM):
        return math.log(volume(K)), 0.0, False
    V = K.vertices if isinstance(K, Polytope) else vertex_array(K)
    if V.shape[1] <= hulls.MAX_EXACT_DIM:
        vol = hulls.hull_volume(V)
        if vol <= 0:
            raise DegenerateInputError("body has zero volume")
        return math.log(vol), 0.0, False
    est = hulls.mc_volume(Polytope(V), MC_VOLUME_TRIALS, _stream(0 if rng is None else rng).child(2**31))
    if est.value <= 0:
        raise DegenerateInputError("Monte Carlo volume found no hits")
    return math.log(est.value), est.stderr / est.value, True


@dataclass(frozen=True)
class PowerMean:
    """``log((mean v^p)^(1/p))`` with its standard error and diagnostic flags."""

    log_value: float
    log_stderr: float
    flags: tuple[str, ...]


def power_mean(values: np.ndarray, p: float, jackknife: bool | None = None) -> PowerMean:
    """Log power mean of positive samples with a delta-method or jackknife error.

    The jackknife is used by default for negative exponents, where a few
    small values carry the sum and the delta method is optimistic.
    """
    v = np.asarray(values, dtype=float).ravel()
    m = v.size
    lm = mean_of_powers_log(v, p) / p
    if m == 1 or np.ptp(v) <= CONST_RTOL * np.max(v):
        return PowerMean(lm, 0.0, ("constant",))
    w = power_weights(v, p)
    flags: list[str] = []
    if np.max(w) / np.sum(w) > HEAVY_TAIL_SHARE:
        flags.append("heavy-tail")
    sd = float(np.std(w, ddof=1))
    if sd > 0:
        skew = float(np.mean((w - 1.0) ** 3)) / sd**3
        if skew > SKEW_WARN:
            flags.append("skewed")
    if jackknife is None:
        jackknife = p < 0
    if jackknife:
        # leave-one-out means of the normalized weights, then log / p
        loo = np.log(np.maximum((m - w) / (m - 1), np.finfo(float).tiny)) / p
        se = math.sqrt((m - 1) / m * float(np.sum((loo - loo.mean()) ** 2)))
    else:
        se = sd / math.sqrt(m) / abs(p)
    return PowerMean(lm, se, tuple(flags))


def w_kp_from_volumes(vols: np.ndarray, k: int, p: float, log_vol: float, log_vol_se: float = 0.0, n: int | None = None, seed=None, approximate: bool = False) -> MCEstimate:
    """``W_[k,p]`` from a fixed sample of projection volumes.

    Shared samples make the estimate exactly monotone in p.
    """
    if p == 0:
        raise DegenerateInputError("p must be nonzero")
    if n is None:
        raise ValueError("ambient dimension n is required")
    pm = power_mean(vols, p)
    logw = -log_vol / n + pm.log_value / k
    value = math.exp(logw)
    se = value * math.hypot(pm.log_stderr / k, log_vol_se / n)
    return MCEstimate(value, se, len(vols), seed, approximate, pm.flags)


def w_kp(K: Convex, k: int, p: float, m: int = DEFAULT_M, rng=0) -> MCEstimate:
    """Plug-in estimate of ``W_[k,p](K)`` over m Haar subspaces."""
    n = ambient_dim(K)
    if not 1 <= k <= n:
        raise ValueError(f"need 1 <= k <= n, got k={k}, n={n}")
    if p == 0:
        raise DegenerateInputError("p must be nonzero")
    stream = _stream(rng)
    if k == n:
        # the Grassmannian is a point and both factors cancel
        return MCEstimate(1.0, 0.0, 1, stream.seed, False, ("constant",))
    if m < MIN_M:
        raise ValueError(f"need at least {MIN_M} subspaces, got {m}")
    log_vol, log_vol_se, approx = body_log_volume(K, stream)
    vols = projection_volumes(K, k, m, stream)
    return w_kp_from_volumes(vols, k, p, log_vol, log_vol_se, n, stream.seed, approx)


def phi_k(K: Convex, k: int, m: int = DEFAULT_M, rng=0) -> MCEstimate:
    """Normalized affine quermassintegral, ``W_[k,-n]``."""
    return w_kp(K, k, -ambient_dim(K), m, rng)


def q_k_from_volumes(vols: np.ndarray, k: int, seed=None) -> MCEstimate:
    v = np.asarray(vols, dtype=float)
    mean = float(np.mean(v))
    value = math.exp((math.log(mean) - log_unit_ball_volume(k)) / k)
    if np.ptp(v) <= CONST_RTOL * np.max(v):
        return MCEstimate(value, 0.0, len(v), seed, flags=("constant",))
    se = value / k * float(np.std(v, ddof=1)) / (math.sqrt(len(v)) * mean)
    return MCEstimate(value, se, len(v), seed)


def q_k(K: Convex, k: int, m: int = DEFAULT_M, rng=0) -> MCEstimate:
    """``Q_k(K) = ((1/omega_k) E vol_k(P_F K))^(1/k)``."""
    n = ambient_dim(K)
    stream = _stream(rng)
    if k == n:
        v = np.array([math.exp(body_log_volume(K, stream)[0])])
        return q_k_from_volumes(v, k, stream.seed)
    if m < MIN_M:
        raise ValueError(f"need at least {MIN_M} subspaces, got {m}")
    return q_k_from_volumes(projection_volumes(K, k, m, stream), k, stream.seed)


def _support(K: Convex, xi: np.ndarray) -> np.ndarray:
    if isinstance(K, Polytope):
        return (xi @ K.vertices.T).max(axis=-1)
    return support_values(K, xi)


def _mean_estimate(x: np.ndarray, seed) -> MCEstimate:
    if np.ptp(x) <= CONST_RTOL * max(float(np.max(np.abs(x))), 1e-300):
        return MCEstimate(float(np.mean(x)), 0.0, len(x), seed, flags=("constant",))
    return MCEstimate(float(np.mean(x)), float(np.std(x, ddof=1)) / math.sqrt(len(x)), len(x), seed)


def mean_width(K: Convex, m: int = DEFAULT_M, rng=0) -> MCEstimate:
    """``w(K)``, the sphere average of ``h_K`` (not ``h_K + h_{-K}``)."""
    if m < MIN_M:
        raise ValueError(f"need at least {MIN_M} directions, got {m}")
    stream = _stream(rng)
    xi = sample_sphere(ambient_dim(K), stream, m)
    return _mean_estimate(_support(K, xi), stream.seed)


def _power_estimate(values: np.ndarray, q: float, seed, approximate: bool = False) -> MCEstimate:
    pm = power_mean(values, q, jackknife=False)
    value = math.exp(pm.log_value)
    return MCEstimate(value, value * pm.log_stderr, len(values), seed, approximate, pm.flags)


def w_q(K: Convex, q: float, m: int = DEFAULT_M, rng=0) -> MCEstimate:
    """``(int h_K^q dsigma)^(1/q)`` for nonzero q in [-n, n]."""
    n = ambient_dim(K)
    if q == 0 or abs(q) > n:
        raise ValueError(f"q must be nonzero with |q| <= n, got {q}")
    stream = _stream(rng)
    h = _support(K, sample_sphere(n, stream, m))
    if np.any(h <= 0):
        raise DegenerateInputError("support function vanishes: origin is not interior")
    return _power_estimate(h, q, stream.seed)


def w_q_curve(K: Convex, qs, m: int = DEFAULT_M, rng=0) -> list[MCEstimate]:
    """``w_q`` at several q on one shared direction sample."""
    stream = _stream(rng)
    h = _support(K, sample_sphere(ambient_dim(K), stream, m))
    if np.any(h <= 0):
        raise DegenerateInputError("support function vanishes: origin is not interior")
    return [_power_estimate(h, q, stream.seed) for q in qs]


def _uniform_points(K: Convex, m: int, stream: RngStream) -> np.ndarray:
    if isinstance(K, Polytope):
        from .bodies import vpolytope

        K = vpolytope(K.vertices, K.symmetric)
    return sample_uniform(K, stream, m)


def _check_unit_volume(K: Convex) -> None:
    try:
        log_vol = body_log_volume(K)[0] if (isinstance(K, BodySpec) and K.analytic) or K.dim <= hulls.MAX_EXACT_DIM else None
    except DegenerateInputError:
        log_vol = -math.inf
    if log_vol is not None and abs(math.expm1(log_vol)) > 1e-6:
        raise ValueError(f"body must have volume 1, has {math.exp(log_vol):.6g}; isotropize first")


def zq_support_curve(K: Convex, qs, xi, m: int = DEFAULT_M, rng=0) -> list[MCEstimate]:
    """``h_{Z_q(K)}(xi)`` at several q on one shared uniform sample."""
    _check_unit_volume(K)
    xi = np.asarray(xi, dtype=float)
    if abs(np.linalg.norm(xi) - 1.0) > 1e-10:
        raise ValueError("xi must be a unit vector")
    if any(q < 1 for q in qs):
        raise ValueError("Z_q needs q >= 1")
    stream = _stream(rng)
    t = np.abs(_uniform_points(K, m, stream) @ xi)
    return [_power_estimate(t, q, stream.seed) for q in qs]


def zq_support(K: Convex, q: float, xi, m: int = DEFAULT_M, rng=0) -> MCEstimate:
    """``||<., xi>||_{L_q(K)}`` for a volume-one body K and q >= 1."""
    return zq_support_curve(K, [q], xi, m, rng)[0]


def i_q_curve(K: Convex, qs, m: int = DEFAULT_M, rng=0) -> list[MCEstimate]:
    _check_unit_volume(K)
    n = ambient_dim(K)
    if any(q == 0 or q <= -n for q in qs):
        raise ValueError("I_q needs q > -n, q != 0")
    stream = _stream(rng)
    r = np.linalg.norm(_uniform_points(K, m, stream), axis=1)
    return [_power_estimate(r, q, stream.seed) for q in qs]


def i_q(K: Convex, q: float, m: int = DEFAULT_M, rng=0) -> MCEstimate:
    """``(int_K |x|^q dx)^(1/q)`` for a volume-one body K."""
    return i_q_curve(K, [q], m, rng)[0]


def vrad(P: Convex, trials: int = MC_VOLUME_TRIALS, rng=0) -> MCEstimate:
    """Volume radius ``(vol_n(P) / omega_n)^(1/n)``.

    Exact hull volume up to the exact-hull dimension, Monte Carlo above;
    a degenerate polytope gives 0.
    """
    n = ambient_dim(P)
    stream = _stream(rng)
    if isinstance(P, BodySpec) and (P.analytic or n <= hulls.MAX_EXACT_DIM):
        vol, se, approx = volume(P), 0.0, False
    else:
        V = P.vertices if isinstance(P, Polytope) else vertex_array(P)
        if n <= hulls.MAX_EXACT_DIM:
            vol, se, approx = hulls.hull_volume(V), 0.0, False
        else:
            est = hulls.mc_volume(Polytope(V), trials, stream)
            vol, se, approx = est.value, est.stderr, True
    if vol <= 0:
        return MCEstimate(0.0, 0.0, trials, stream.seed, approx, ("degenerate",))
    value = math.exp((math.log(vol) - log_unit_ball_volume(n)) / n)
    return MCEstimate(value, value * se / (n * vol), trials, stream.seed, approx)
