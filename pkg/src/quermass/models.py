"""Random polytope models, beta-polytope analytics and cross-polytope constructions."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate

from . import hulls
from .bodies import BodySpec, gauge_values, log_unit_ball_volume, volume
from .hulls import Polytope
from .numerics import DegenerateInputError, MCEstimate, RngStream, as_generator, log_gamma
from .sampling import Subspace, sample_beta, sample_grassmannian, sample_uniform

MODELS = ("kn", "mn", "beta")
C_GUARD = 4.0
ISOTROPIC_VOLUME_TOL = 1e-6


# ---------------------------------------------------------------- beta analytics


@dataclass(frozen=True)
class BetaParams:
    """Density ``c_{n,beta} (1 - |x|^2)^beta`` on the unit ball and its marginal constant."""

    n: int
    beta: float

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("dimension must be positive")
        if self.beta <= -1:
            raise DegenerateInputError("beta must exceed -1")

    @property
    def log_c(self) -> float:
        return log_c_beta(self.n, self.beta)

    @property
    def log_alpha(self) -> float:
        return log_c_beta(self.n, self.beta) - log_c_beta(self.n - 1, self.beta)

    @property
    def marginal_exponent(self) -> float:
        return self.beta + (self.n - 1) / 2.0

    def marginal_density(self, t):
        t = np.asarray(t, dtype=float)
        return np.exp(self.log_alpha) * np.clip(1.0 - t * t, 0.0, None) ** self.marginal_exponent


def log_c_beta(n: int, beta: float) -> float:
    """``log c_{n,beta}``; n = 0 gives 0 (a point mass)."""
    return -0.5 * n * math.log(math.pi) + log_gamma(beta + n / 2.0 + 1.0) - log_gamma(beta + 1.0)


def beta_B(d: float, n: int, beta: float) -> float:
    """Tail ``B(d)`` of the one-dimensional marginal: mass of ``{<x, e_1> >= d}``.

    Quadrature uses the algebraic weight ``(1 - t)^e`` so the endpoint
    singularity for negative exponents costs nothing.
    """
    if not 0.0 <= d <= 1.0:
        raise DegenerateInputError(f"d must lie in [0, 1], got {d}")
    bp = BetaParams(n, beta)
    if d == 1.0:
        return 0.0
    e = bp.marginal_exponent
    alpha = math.exp(bp.log_alpha)
    val, _ = integrate.quad(lambda t: (1.0 + t) ** e, d, 1.0, weight="alg", wvar=(0.0, e), epsabs=1e-13, epsrel=1e-12, limit=200)
    return alpha * val


def beta_B_bounds(d: float, n: int, beta: float) -> tuple[float, float]:
    """Closed-form lower and upper bounds on ``B(d)`` for d in (0, 1)."""
    if not 0.0 < d < 1.0:
        raise DegenerateInputError(f"d must lie in (0, 1), got {d}")
    BetaParams(n, beta)
    core = (1.0 - d * d) ** (beta + (n + 1) / 2.0) / (2.0 * math.sqrt(math.pi))
    return core / math.sqrt(beta + n / 2.0 + 1.0), core / (d * math.sqrt(beta + n / 2.0))


def g_n_beta(n: int, beta: float) -> float:
    if beta <= -1:
        raise DegenerateInputError("beta must exceed -1")
    s = math.sqrt(beta + n / 2.0 + 1.0)
    return 2.0 * math.sqrt(math.pi) * n * s * (1.0 + math.log(4.0 * s))


def inradius_guarantee(n: int, beta: float, N: int) -> float:
    """Radius ``(1/2) sqrt(1 - (g/N)^(2/(2 beta + n + 1)))`` of the ball a beta polytope should contain."""
    ratio = g_n_beta(n, beta) / N
    if ratio >= 1:
        return 0.0
    return 0.5 * math.sqrt(1.0 - ratio ** (2.0 / (2.0 * beta + n + 1.0)))


def kubota_r(n: int, k: int) -> float:
    """``binom(n, k) omega_n / (omega_k omega_{n-k})``, evaluated in logs."""
    if not 1 <= k <= n:
        raise ValueError(f"need 1 <= k <= n, got k={k}, n={n}")
    log_binom = math.lgamma(n + 1) - math.lgamma(k + 1) - math.lgamma(n - k + 1)
    return math.exp(log_binom + log_unit_ball_volume(n) - log_unit_ball_volume(k) - log_unit_ball_volume(n - k))


# ---------------------------------------------------------------- random polytopes


def _require_unit_volume(body: BodySpec) -> None:
    if body.analytic or body.dim <= hulls.MAX_EXACT_DIM:
        vol = volume(body)
        if abs(vol - 1.0) > ISOTROPIC_VOLUME_TOL:
            raise ValueError(f"body must be in isotropic position (volume 1), has volume {vol:.6g}")


def gen_kn(body: BodySpec, N: int, rng) -> Polytope:
    """``conv{±x_1, ..., ±x_N}`` with x_i uniform in the body."""
    _require_unit_volume(body)
    return Polytope.symmetric_hull(np.atleast_2d(sample_uniform(body, as_generator(rng), N)))


def gen_mn(body: BodySpec, N: int, rng) -> Polytope:
    """``conv{±x_1, ..., ±x_N}`` with x_i from the cone measure.

    Draws the same uniform points as ``gen_kn`` on the same stream and
    pushes them radially to the boundary, so the two are coupled.
    """
    _require_unit_volume(body)
    g = as_generator(rng)
    y = np.atleast_2d(sample_uniform(body, g, N))
    gy = gauge_values(body, y)
    while np.any(gy == 0):  # measure zero
        bad = gy == 0
        y[bad] = np.atleast_2d(sample_uniform(body, g, int(bad.sum())))
        gy = gauge_values(body, y)
    return Polytope.symmetric_hull(y / gy[:, None])


def gen_beta(n: int, beta: float, N: int, rng) -> Polytope:
    """``conv{x_1, ..., x_N}`` with x_i drawn from the beta density; not symmetrized."""
    if N < n + 1:
        raise ValueError(f"need N >= n + 1, got N={N}, n={n}")
    return Polytope(np.atleast_2d(sample_beta(n, beta, as_generator(rng), N)))


@dataclass(frozen=True)
class RandomPolytopeSpec:
    """Declarative random polytope: ``model`` in {"kn", "mn", "beta"}."""

    model: str
    N: int
    body: BodySpec | None = None
    n: int | None = None
    beta: float | None = None

    def __post_init__(self):
        if self.model not in MODELS:
            raise ValueError(f"unknown model {self.model!r}; expected one of {MODELS}")
        if self.model == "beta":
            if self.n is None or self.beta is None:
                raise ValueError("beta model needs n and beta")
            BetaParams(self.n, self.beta)
        elif self.body is None:
            raise ValueError(f"{self.model} model needs a body")
        if self.N < self.dim + 1:
            raise ValueError(f"need N >= n + 1, got N={self.N}")

    @property
    def dim(self) -> int:
        return self.n if self.model == "beta" else self.body.dim

    @property
    def symmetrize(self) -> bool:
        return self.model != "beta"

    def generate(self, rng) -> Polytope:
        if self.model == "kn":
            return gen_kn(self.body, self.N, rng)
        if self.model == "mn":
            return gen_mn(self.body, self.N, rng)
        return gen_beta(self.n, self.beta, self.N, rng)


def kubota_trial(n: int, k: int, beta: float, N: int, stream: RngStream) -> tuple[float, float]:
    """One unbiased pair: projection volume of a beta polytope onto a Haar subspace,
    and the volume of a k-dimensional beta polytope with parameter ``beta + (n-k)/2``."""
    g = stream.generator()
    P = gen_beta(n, beta, N, g)
    F = sample_grassmannian(n, k, g)
    lhs = hulls.hull_volume(P.vertices @ F.basis)
    rhs = hulls.hull_volume(gen_beta(k, beta + (n - k) / 2.0, N, g).vertices)
    return lhs, rhs


def kubota_check(n: int, k: int, beta: float, N: int, trials: int, rng) -> tuple[MCEstimate, MCEstimate]:
    """Both sides of the averaged Kubota identity for beta polytopes, trial i on ``rng.child(i)``."""
    if k > hulls.MAX_EXACT_DIM:
        raise ValueError("kubota_check needs exact hull volumes")
    if N < max(n, k) + 1:
        raise ValueError("need N >= n + 1")
    stream = rng if isinstance(rng, RngStream) else RngStream(int(rng))
    pairs = np.array([kubota_trial(n, k, beta, N, stream.child(i)) for i in range(trials)])
    return summarize_pairs(pairs, stream.seed)


def summarize_pairs(pairs: np.ndarray, seed=None) -> tuple[MCEstimate, MCEstimate]:
    m = len(pairs)
    out = []
    for col in pairs.T:
        out.append(MCEstimate(float(col.mean()), float(col.std(ddof=1)) / math.sqrt(m), m, seed))
    return out[0], out[1]


def beta_inradius_trial(n: int, beta: float, N: int, stream: RngStream) -> tuple[float, float]:
    """``(inradius of the polytope about 0, guaranteed radius)`` for one draw."""
    P = gen_beta(n, beta, N, stream)
    return hulls.inradius_at_origin(P), inradius_guarantee(n, beta, N)


# ---------------------------------------------------------------- cross-polytope constructions


def partition_sizes(n: int, k: int) -> list[int]:
    q = n // k
    return [q] * (k - 1) + [n - (k - 1) * q]


def cross_partition_subspace(n: int, k: int) -> tuple[Subspace, float]:
    """Span of normalized block indicators of a k-block partition of the coordinates,
    with the closed-form volume of the cross-polytope's projection onto it."""
    if not 1 <= k <= n:
        raise ValueError(f"need 1 <= k <= n, got k={k}, n={n}")
    sizes = partition_sizes(n, k)
    B = np.zeros((n, k))
    start = 0
    for i, m in enumerate(sizes):
        B[start : start + m, i] = 1.0 / math.sqrt(m)
        start += m
    log_vol = k * math.log(2.0) - math.lgamma(k + 1) - 0.5 * sum(math.log(m) for m in sizes)
    return Subspace(B), math.exp(log_vol)


def cross_projection_volume(F: Subspace) -> float:
    """``vol_k(P_F B_1^n)``: hull of the projected ``±e_j``, i.e. of the basis rows."""
    B = F.basis
    return hulls.hull_volume(np.vstack([B, -B]))


def cross_tail_ratio(n: int, k: int, stream) -> float:
    """``vol_k(P_F B_1^n)^(1/k) sqrt(kn) / sqrt(log(1 + n/k))`` for one Haar F."""
    F = sample_grassmannian(n, k, stream)
    vol = cross_projection_volume(F)
    return vol ** (1.0 / k) * math.sqrt(k * n) / math.sqrt(math.log(1.0 + n / k))


def cross_projection_tail(n: int, k: int, draws: int, rng, c_guard: float = C_GUARD) -> float:
    """Fraction of Haar subspaces whose normalized projection volume stays below ``c_guard``."""
    if k > hulls.MAX_EXACT_DIM:
        raise ValueError("cross_projection_tail needs exact hull volumes")
    stream = rng if isinstance(rng, RngStream) else RngStream(int(rng))
    ratios = np.array([cross_tail_ratio(n, k, stream.child(i)) for i in range(draws)])
    return float(np.mean(ratios <= c_guard))


def jl_max_norm(n: int, k: int, stream) -> float:
    """``max_j |P_F e_j|`` for one Haar F: the largest row norm of its basis."""
    F = sample_grassmannian(n, k, stream)
    return float(np.max(np.linalg.norm(F.basis, axis=1)))


def jl_frequency(n: int, k: int, eps: float, draws: int, rng) -> float:
    """Fraction of Haar subspaces with ``max_j |P_F e_j| <= (1 + eps) sqrt(k/n)``."""
    if eps < 0:
        raise ValueError("eps must be nonnegative")
    stream = rng if isinstance(rng, RngStream) else RngStream(int(rng))
    norms = np.array([jl_max_norm(n, k, stream.child(i)) for i in range(draws)])
    # k = n gives norms of exactly 1 up to rounding
    return float(np.mean(norms <= (1.0 + eps) * math.sqrt(k / n) * (1.0 + 1e-12)))


def stability_trial(n: int, k: int, eps: float, stream) -> tuple[float, float, float]:
    """``(vol_k(P_E B_1^n), vol_k(P_F0 B_1^n), sigma_inf(E, F0))`` for one perturbation E of
    the partition subspace F0."""
    F0, _ = cross_partition_subspace(n, k)
    E = hulls.perturb_subspace(F0, eps, stream)
    return cross_projection_volume(E), cross_projection_volume(F0), hulls.sigma_inf(E, F0)
