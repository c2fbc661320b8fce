import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import integrate, special

from quermass import bodies, models
from quermass.numerics import DegenerateInputError, RngStream

grid = [(5, 2.0), (3, 0.0), (8, -0.5), (1, -0.5), (2, 3.5)]


@pytest.mark.parametrize("n,beta", grid)
def test_beta_density_normalizes(n, beta):
    # c_{n,beta} int_0^1 (1-r^2)^beta n omega_n r^(n-1) dr = 1
    c = math.exp(models.log_c_beta(n, beta))
    radial = integrate.quad(lambda r: (1 - r * r) ** beta * r ** (n - 1), 0, 1)[0]
    assert c * n * bodies.unit_ball_volume(n) * radial == pytest.approx(1.0, rel=1e-8)


@pytest.mark.parametrize("n,beta", grid)
def test_marginal_density_integrates_to_one(n, beta):
    p = models.BetaParams(n, beta)
    assert integrate.quad(p.marginal_density, -1, 1)[0] == pytest.approx(1.0, rel=1e-7)


@given(st.sampled_from(grid), st.floats(0.001, 0.999))
def test_B_matches_incomplete_beta_oracle(nb, d):
    n, beta = nb
    ref = 0.5 * special.betainc(beta + (n + 1) / 2, 0.5, 1 - d * d)
    assert models.beta_B(d, n, beta) == pytest.approx(ref, rel=1e-9, abs=1e-15)


@pytest.mark.parametrize("n,beta", [(5, 2.0), (3, 0.0), (8, -0.5)])
def test_B_bounds_are_strict_on_grid(n, beta):
    for d in np.arange(1, 100) / 100:
        lo, hi = models.beta_B_bounds(float(d), n, beta)
        assert lo < models.beta_B(float(d), n, beta) < hi


def test_B_endpoints():
    assert models.beta_B(0.0, 4, 1.0) == pytest.approx(0.5)
    assert models.beta_B(1.0, 4, 1.0) == 0.0


def test_g_and_inradius_guarantee_formulae():
    n, beta, N = 4, 1.0, 874
    s = math.sqrt(beta + n / 2 + 1)
    g = 2 * math.sqrt(math.pi) * n * s * (1 + math.log(4 * s))
    assert models.g_n_beta(n, beta) == pytest.approx(g)
    assert models.inradius_guarantee(n, beta, N) == pytest.approx(0.5 * math.sqrt(1 - (g / N) ** (2 / (2 * beta + n + 1))))


def test_kubota_constant():
    # r_{n,k} = binom(n,k) omega_n / (omega_k omega_{n-k}); r_{2,1} = pi/2, r_{n,n} = 1
    assert models.kubota_r(2, 1) == pytest.approx(math.pi / 2)
    assert models.kubota_r(5, 5) == pytest.approx(1.0)


def test_random_polytopes_are_symmetric_and_coupled():
    K = bodies.cube(4)
    A = models.gen_kn(K, 20, RngStream(1))
    B = models.gen_mn(K, 20, RngStream(1))
    assert A.symmetric and len(A) == 40
    assert np.allclose(A.vertices[:20], -A.vertices[20:])
    # M_N pushes the same points radially to the boundary
    g = bodies.gauge_values(K, A.vertices[:20])
    assert np.allclose(B.vertices[:20], A.vertices[:20] / g[:, None])
    assert np.allclose(bodies.gauge_values(K, B.vertices), 1.0)


def test_generators_require_unit_volume():
    with pytest.raises(ValueError):
        models.gen_kn(bodies.cube(3, 2.0), 10, 0)


def test_random_polytope_spec():
    spec = models.RandomPolytopeSpec("beta", 10, n=3, beta=0.5)
    P = spec.generate(RngStream(2))
    assert P.dim == 3 and len(P) == 10 and not spec.symmetrize
    with pytest.raises(ValueError):
        models.RandomPolytopeSpec("kn", 10)
    with pytest.raises(ValueError):
        models.RandomPolytopeSpec("zz", 10, n=3, beta=0.0)
    with pytest.raises(DegenerateInputError):
        models.RandomPolytopeSpec("beta", 10, n=3, beta=-2.0)


def test_kubota_check_small():
    lhs, rhs = models.kubota_check(3, 2, 0.0, 8, 2000, RngStream(3))
    assert abs(lhs.value - rhs.value) <= 3 * math.hypot(lhs.stderr, rhs.stderr)


def test_beta_inradius_exceeds_guarantee():
    hits = [models.beta_inradius_trial(4, 1.0, 874, RngStream(5).child(i)) for i in range(20)]
    assert all(r >= g for r, g in hits)


@pytest.mark.parametrize("n,k,expected", [(10, 2, 0.4), (4, 4, 2.0**4 / 24), (7, 1, 2 / math.sqrt(7))])
def test_partition_subspace_closed_form(n, k, expected):
    F, vol = models.cross_partition_subspace(n, k)
    assert vol == pytest.approx(expected, rel=1e-12)
    assert models.cross_projection_volume(F) == pytest.approx(expected, rel=1e-9)


def test_partition_sizes_cover_coordinates():
    for n in range(1, 20):
        for k in range(1, n + 1):
            s = models.partition_sizes(n, k)
            assert len(s) == k and sum(s) == n and min(s) >= n // k


def test_jl_and_tail_helpers():
    assert models.jl_frequency(16, 16, 0.0, 3, 0) == 1.0
    r = models.cross_tail_ratio(16, 4, RngStream(0))
    assert 3.0 < r < 5.5
    with pytest.raises(ValueError):
        models.jl_frequency(4, 2, -1.0, 3, 0)


def test_stability_trial_bound():
    volE, volF, s = models.stability_trial(12, 3, 1 / math.sqrt(12), RngStream(1))
    assert volE <= 27 * volF
    assert s <= 1 / math.sqrt(12) + 1e-12
