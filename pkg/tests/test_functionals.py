import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra import numpy as nps

from quermass import bodies, functionals as fn
from quermass.hulls import Polytope
from quermass.numerics import DegenerateInputError, RngStream
from quermass.sampling import Subspace, sample_grassmannian

vols = nps.arrays(np.float64, st.integers(2, 40), elements=st.floats(1e-3, 1e3))


def ball_phi(n, k):
    return bodies.unit_ball_volume(n) ** (-1 / n) * bodies.unit_ball_volume(k) ** (1 / k)


@pytest.mark.parametrize("n", range(3, 9))
def test_ball_phi_is_exact_for_every_k(n):
    for k in range(1, n + 1):
        e = fn.phi_k(bodies.ball(n, 0.3), k, m=fn.MIN_M, rng=1)
        assert e.value == pytest.approx(ball_phi(n, k), rel=1e-10)
        assert e.stderr == 0.0


def test_ball_phi_example_value():
    assert fn.phi_k(bodies.ball(4), 2, m=fn.MIN_M).value == pytest.approx(2**0.25, rel=1e-12)


def test_phi_is_invariant_under_volume_preserving_maps():
    n, k = 4, 2
    M = bodies.random_slmap(n, RngStream(3))
    ell = bodies.with_linear_map(bodies.ball(n), M)
    e = fn.phi_k(ell, k, m=1000, rng=2)
    assert e.within(ball_phi(n, k), 4)
    assert e.stderr > 0


# frozen oracle values: projections of the unit cube onto a line in direction theta
# have length |theta|_1, and onto theta-perp have area |theta|_1; in R^3, E|theta_1| = 1/2
def test_cube_q1_and_q2_against_cauchy_formula():
    K = bodies.cube(3)
    q1 = fn.q_k(K, 1, m=4000, rng=5)
    q2 = fn.q_k(K, 2, m=4000, rng=6)
    assert q1.within(0.75)
    assert q2.within(0.690988298942671)


def test_mean_width_of_cube():
    # w = E h(theta) = E |theta|_1 / 2 = 5 E|theta_1| / 2 with E|theta_1| = 3/8 in R^5
    assert fn.mean_width(bodies.cube(5), m=20000, rng=1).within(0.9375)


def test_mean_width_of_ball_is_constant():
    e = fn.mean_width(bodies.ball(4, 2.0), m=fn.MIN_M)
    assert e.value == pytest.approx(2.0) and e.stderr == 0.0 and "constant" in e.flags


@given(vols, st.integers(1, 5))
def test_w_kp_shared_sample_is_monotone_in_p(v, k):
    ps = [-40.0, -8.0, -1.0, 0.5, 1.0, 3.0, 20.0]
    w = [fn.w_kp_from_volumes(v, k, p, 0.0, n=6).value for p in ps]
    assert all(a <= b * (1 + 1e-12) for a, b in zip(w, w[1:]))


@given(vols, st.floats(-20, 20).filter(lambda p: abs(p) > 0.1), st.floats(0.01, 100))
def test_power_mean_is_homogeneous(v, p, c):
    a = fn.power_mean(v, p).log_value
    b = fn.power_mean(c * v, p).log_value
    assert b == pytest.approx(a + math.log(c), abs=1e-9)


def test_power_mean_flags():
    assert fn.power_mean(np.full(10, 2.0), -3).flags == ("constant",)
    v = np.ones(100)
    v[0] = 1e-3
    assert "heavy-tail" in fn.power_mean(v, -3).flags


def test_w_kp_full_dimension_is_one():
    e = fn.w_kp(bodies.cube(4), 4, -4)
    assert (e.value, e.stderr) == (1.0, 0.0)


def test_w_kp_argument_checks():
    with pytest.raises(ValueError):
        fn.w_kp(bodies.cube(3), 4, -3)
    with pytest.raises(DegenerateInputError):
        fn.w_kp(bodies.cube(3), 2, 0)
    with pytest.raises(ValueError):
        fn.w_kp(bodies.cube(3), 2, -3, m=10)
    with pytest.raises(TypeError):
        fn.w_kp(bodies.cube(3), 2, -3, rng="seed")


def test_projection_routes_agree():
    n = 5
    F = sample_grassmannian(n, 3, RngStream(4))
    cube = bodies.cube(n, 1.3)
    via_zonotope = fn.projection_volume(cube, F)
    via_hull = fn.projection_volume(Polytope(bodies.vertex_array(cube)), F)
    assert via_zonotope.method == "zonotope" and via_hull.method == "exact-hull"
    assert via_zonotope.volume == pytest.approx(via_hull.volume, rel=1e-10)


def test_projection_of_flat_polytope_raises_with_seed():
    P = Polytope(np.array([[1.0, 0, 0], [0, 1.0, 0], [-1.0, 0, 0], [0, -1.0, 0]]))
    with pytest.raises(DegenerateInputError, match="seed 17"):
        fn.projection_volume(P, Subspace.coordinate(3, [2]), seed=17)


def test_high_dimensional_projection_needs_rng():
    P = Polytope(np.vstack([np.eye(10), -np.eye(10)]))
    with pytest.raises(ValueError, match="Monte Carlo"):
        fn.projection_volume(P, sample_grassmannian(10, 9, RngStream(0)))


def test_estimates_replay_with_same_seed():
    a = fn.phi_k(bodies.cross_polytope(5), 2, m=200, rng=RngStream(9))
    b = fn.phi_k(bodies.cross_polytope(5), 2, m=200, rng=RngStream(9))
    assert a == b


def test_zq_support_of_cube_closed_form():
    # h_{Z_q}(e_1) = (E|x_1|^q)^(1/q) = ((1/2)^q / (q+1))^(1/q)
    qs = [1.0, 2.0, 4.0]
    est = fn.zq_support_curve(bodies.cube(3), qs, [1.0, 0, 0], m=40000, rng=3)
    for q, e in zip(qs, est):
        assert e.within((0.5**q / (q + 1)) ** (1 / q))
    assert est[0].value <= est[1].value <= est[2].value


def test_zq_requires_unit_volume_and_q_ge_1():
    with pytest.raises(ValueError):
        fn.zq_support(bodies.cube(3, 2.0), 2, [1.0, 0, 0])
    with pytest.raises(ValueError):
        fn.zq_support(bodies.cube(3), 0.5, [1.0, 0, 0])


def test_i2_of_cube():
    # I_2 of the unit cube is sqrt(n/12)
    assert fn.i_q(bodies.cube(6), 2, m=40000, rng=4).within(math.sqrt(0.5))


def test_w_q_of_ball_is_radius():
    assert fn.w_q(bodies.ball(3, 1.7), -2, m=fn.MIN_M).value == pytest.approx(1.7)
    with pytest.raises(ValueError):
        fn.w_q(bodies.ball(3), 4)


def test_vrad_exact_paths():
    assert fn.vrad(bodies.ball(5, 0.4)).value == pytest.approx(0.4)
    P = Polytope(np.vstack([np.eye(3), -np.eye(3)]))
    assert fn.vrad(P).value == pytest.approx((4 / 3 / (4 * math.pi / 3)) ** (1 / 3))
