import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from quermass import bodies
from quermass.numerics import DegenerateInputError, RngStream
from quermass.sampling import sample_uniform

dims = st.integers(1, 8)


@pytest.mark.parametrize("n", range(1, 13))
def test_unit_ball_volume_recurrence(n):
    # omega_1 = 2, omega_2 = pi, omega_n = 2 pi / n omega_{n-2}
    ref = {1: 2.0, 2: math.pi}
    for j in range(3, n + 1):
        ref[j] = 2 * math.pi / j * ref[j - 2]
    assert bodies.unit_ball_volume(n) == pytest.approx(ref[n], rel=1e-14)
    assert math.exp(bodies.log_unit_ball_volume(n)) == pytest.approx(ref[n], rel=1e-13)


@pytest.mark.parametrize("n", [1, 2, 5, 9])
def test_volumes_closed_forms(n):
    assert bodies.volume(bodies.cube(n, 2.0)) == pytest.approx(2.0**n)
    assert bodies.volume(bodies.cross_polytope(n)) == pytest.approx(2.0**n / math.factorial(n))
    assert bodies.volume(bodies.ball(n, 0.5)) == pytest.approx(bodies.unit_ball_volume(n) * 0.5**n)


def test_simplex_volume_matches_hull():
    S = bodies.simplex(4, 2.0)
    from quermass import hulls

    assert bodies.volume(S) == pytest.approx(hulls.hull_volume(bodies.vertex_array(S)), rel=1e-12)


@given(dims, st.integers(0, 1000))
def test_support_is_max_over_vertices(n, seed):
    g = np.random.default_rng(seed)
    xi = g.standard_normal(n)
    for K in (bodies.cube(n, 1.5), bodies.cross_polytope(n, 0.7)):
        V = bodies.vertex_array(K)
        assert bodies.support_values(K, xi) == pytest.approx(np.max(V @ xi), rel=1e-12)


@given(dims, st.integers(0, 1000))
def test_gauge_closed_forms(n, seed):
    x = np.random.default_rng(seed).standard_normal(n)
    assert bodies.gauge(bodies.cube(n, 2.0), x) == pytest.approx(np.max(np.abs(x)))
    assert bodies.gauge(bodies.cross_polytope(n), x) == pytest.approx(np.sum(np.abs(x)))
    assert bodies.gauge(bodies.ball(n, 3.0), x) == pytest.approx(np.linalg.norm(x) / 3)


@settings(max_examples=10)
@given(st.integers(0, 10_000))
def test_vpoly_bisection_gauge_matches_l1(seed):
    # n = 10 is above the facet-enumeration limit, so this exercises the bisection path
    n = 10
    V = np.vstack([np.eye(n), -np.eye(n)])
    K = bodies.vpolytope(V, symmetric=True)
    x = np.random.default_rng(seed).standard_normal((3, n))
    assert np.allclose(bodies.gauge_values(K, x), np.abs(x).sum(axis=1), rtol=1e-8, atol=0)


@given(st.integers(0, 10_000))
def test_vpoly_facet_gauge_matches_l1(seed):
    n = 5
    K = bodies.vpolytope(np.vstack([np.eye(n), -np.eye(n)]), symmetric=True)
    x = np.random.default_rng(seed).standard_normal((4, n))
    assert np.allclose(bodies.gauge_values(K, x), np.abs(x).sum(axis=1), rtol=1e-12)


def test_linear_map_transforms_support_and_gauge():
    n = 3
    M = bodies.random_slmap(n, RngStream(2))
    K = bodies.with_linear_map(bodies.cube(n), M)
    xi = np.array([0.3, -1.0, 0.5])
    assert bodies.support_values(K, xi) == pytest.approx(bodies.support_values(bodies.cube(n), M.T @ xi))
    x = np.array([0.1, 0.2, -0.3])
    assert bodies.gauge(K, x) == pytest.approx(bodies.gauge(bodies.cube(n), np.linalg.solve(M, x)))
    assert bodies.volume(K) == pytest.approx(1.0)


def test_contains_boundary_and_outside():
    K = bodies.cross_polytope(3)
    assert bodies.contains(K, [0.5, 0.5, 0.0])
    assert not bodies.contains(K, [0.5, 0.5, 0.1])


def test_body_validation():
    with pytest.raises(ValueError):
        bodies.BodySpec("blob", 3)
    with pytest.raises(ValueError):
        bodies.cube(3, -1.0)
    with pytest.raises(DegenerateInputError):
        bodies.vpolytope(np.array([[0.0, 0.0], [1.0, 1.0], [2.0, 2.0]]))
    with pytest.raises(ValueError):
        bodies.vpolytope(np.array([[1.0, 0.0], [0.0, 1.0], [-1.0, 0.0]]), symmetric=True)
    with pytest.raises(ValueError):
        bodies.with_linear_map(bodies.cube(2), 2 * np.eye(2))


def test_config_round_trip():
    K = bodies.body_from_config({"kind": "cross", "dim": 4, "scale": 2.0})
    cfg = bodies.body_to_config(K)
    K2 = bodies.body_from_config(cfg)
    assert (K2.kind, K2.dim, K2.scale) == ("cross", 4, 2.0)


@pytest.mark.parametrize("kind", ["cube", "cross", "ball", "simplex"])
def test_isotropic_position_has_unit_volume_and_covariance_L2(kind):
    n = 4
    iso, data = bodies.isotropic_position(bodies.body_from_config({"kind": kind, "dim": n, "scale": 3.0}))
    assert bodies.volume(iso) == pytest.approx(1.0, rel=1e-12)
    x = sample_uniform(iso, RngStream(9), 60000)
    assert np.allclose(x.mean(axis=0), 0, atol=0.01)
    cov = np.cov(x.T)
    assert np.allclose(cov, data.L**2 * np.eye(n), atol=0.06 * data.L**2)


def test_isotropic_constants_closed_forms():
    assert bodies.isotropic_position(bodies.cube(5))[1].L == pytest.approx(1 / math.sqrt(12))
    # n = 2 simplex: L = (6 sqrt 3)^(-1/2)
    assert bodies.isotropic_position(bodies.simplex(2))[1].L == pytest.approx((6 * math.sqrt(3)) ** -0.5, rel=1e-12)


def test_isotropic_vpoly_whitening():
    V = np.array([[2.0, 0.0], [0.0, 0.5], [-2.0, 0.0], [0.0, -0.5], [1.0, 0.4]])
    iso, data = bodies.isotropic_position(bodies.vpolytope(V), RngStream(0))
    assert bodies.volume(iso) == pytest.approx(1.0, rel=1e-9)
    assert not data.analytic
    assert data.whitening_residual < 0.1
