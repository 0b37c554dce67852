import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from geolatent import geometry as geo
from conftest import random_point, random_tangent


def test_encode_uniform_is_zero():
    s = np.full((4, 5), 0.2)
    np.testing.assert_array_equal(geo.encode(s), np.zeros((4, 4)))


def test_encode_hand_value():
    theta = geo.encode(np.array([[0.5, 0.25, 0.25]]))
    np.testing.assert_allclose(theta, [[np.log(2.0), 0.0]], atol=1e-15)


def test_decode_hand_value():
    s = geo.decode(np.array([[np.log(2.0), 0.0]]))
    np.testing.assert_allclose(s, [[0.5, 0.25, 0.25]], atol=1e-15)


def test_decode_zero_is_uniform():
    np.testing.assert_allclose(geo.decode(np.zeros((3, 6))), np.full((3, 7), 1 / 7), atol=1e-15)


@pytest.mark.parametrize("big", [700.0, -700.0])
def test_decode_stable_at_extremes(big):
    theta = np.zeros((2, 4))
    theta[0, 0] = big
    s = geo.decode(theta)
    assert np.all(np.isfinite(s))
    assert np.all(s > 0)
    np.testing.assert_allclose(s.sum(axis=-1), 1.0, atol=1e-12)


def test_encode_rejects_boundary_and_names_factor():
    s = np.array([[0.5, 0.5], [1.0, 0.0], [0.3, 0.7]])
    with pytest.raises(geo.DomainError, match="factor 1") as info:
        geo.encode(s)
    assert info.value.factor == 1


def test_chart_round_trip_theta(rng):
    theta = rng.uniform(-10, 10, size=(1000, 3, 4))
    assert np.max(np.abs(geo.encode(geo.decode(theta)) - theta)) < 1e-10


def test_as_product_point_normalizes():
    s = geo.as_product_point(np.array([[2.0, 2.0], [1.0, 3.0]]))
    np.testing.assert_allclose(s, [[0.5, 0.5], [0.25, 0.75]])
    with pytest.raises(ValueError):
        geo.as_product_point(np.array([[0.6, 0.6]]), normalize=False)


def test_e_distance_basics(rng):
    s = random_point(rng, 3, 4)
    assert geo.e_distance(s, s) == 0.0
    u = np.full((3, 4), 0.25)
    assert np.isclose(geo.e_distance(u, s), np.linalg.norm(geo.encode(s)))


def test_e_distance_symmetry_and_triangle(rng):
    a, b, c = (np.stack([random_point(rng, 4, 5) for _ in range(1000)]) for _ in range(3))
    dab, dba = geo.e_distance(a, b), geo.e_distance(b, a)
    np.testing.assert_array_equal(dab, dba)
    assert np.all(geo.e_distance(a, c) <= dab + geo.e_distance(b, c) + 1e-12)


def _fd_encode(s, q, h=1e-6):
    return (geo.encode(s + h * q) - geo.encode(s - h * q)) / (2 * h)


def test_push_tangent_matches_finite_differences(rng):
    for _ in range(100):
        n, c = rng.integers(1, 6), rng.integers(2, 7)
        s = random_point(rng, n, c, spread=0.5)
        q = random_tangent(rng, n, c)
        q *= 0.1 * s.min()  # keep s +- h q interior and well resolved
        exact = geo.push_tangent_to_theta(s, q)
        fd = _fd_encode(s, q)
        assert np.linalg.norm(exact - fd) <= 1e-6 * np.linalg.norm(exact)


def test_push_tangent_two_categories_uniform(rng):
    a = 0.3
    s = np.array([[0.5, 0.5]])
    q = np.array([[a, -a]])
    np.testing.assert_allclose(geo.push_tangent_to_theta(s, q), _fd_encode(s, q), rtol=1e-6)
    np.testing.assert_array_equal(geo.push_tangent_to_theta(s, 0 * q), [[0.0]])


def test_push_theta_to_tangent_inverse_and_tangent(rng):
    for _ in range(100):
        n, c = rng.integers(1, 6), rng.integers(2, 7)
        theta = rng.uniform(-3, 3, size=(n, c - 1))
        dtheta = rng.standard_normal((n, c - 1))
        q = geo.push_theta_to_tangent(theta, dtheta)
        assert np.max(np.abs(q.sum(axis=-1))) < 1e-10
        back = geo.push_tangent_to_theta(geo.decode(theta), q)
        assert np.max(np.abs(back - dtheta)) < 1e-10
    assert np.all(geo.push_theta_to_tangent(theta, 0 * dtheta) == 0)


def test_push_theta_to_tangent_matches_finite_differences(rng):
    h = 1e-6
    for _ in range(100):
        n, c = rng.integers(1, 6), rng.integers(2, 7)
        theta = rng.uniform(-3, 3, size=(n, c - 1))
        dtheta = rng.standard_normal((n, c - 1))
        exact = geo.push_theta_to_tangent(theta, dtheta)
        fd = (geo.decode(theta + h * dtheta) - geo.decode(theta - h * dtheta)) / (2 * h)
        assert np.linalg.norm(exact - fd) <= 1e-6 * np.linalg.norm(exact)


def test_e_norm_zero_and_homogeneous(rng):
    s = random_point(rng, 3, 4)
    q = random_tangent(rng, 3, 4)
    assert geo.e_norm(s, 0 * q) == 0.0
    for alpha in (-2.5, 0.1, 7.0):
        assert np.isclose(geo.e_norm(s, alpha * q), abs(alpha) * geo.e_norm(s, q), rtol=1e-13)


def test_e_metric_tensor_agrees_with_e_norm(rng):
    for _ in range(50):
        s = random_point(rng, 3, 5)
        q, r = random_tangent(rng, 3, 5), random_tangent(rng, 3, 5)
        G = geo.e_metric(s)
        quad = np.einsum("jk,jkl,jl->", q, G, q)
        assert np.isclose(quad, geo.e_norm(s, q) ** 2, rtol=1e-10)
        polar = 0.25 * (geo.e_norm(s, q + r) ** 2 - geo.e_norm(s, q - r) ** 2)
        assert np.isclose(np.einsum("jk,jkl,jl->", q, G, r), polar, rtol=1e-8, atol=1e-8)


def test_e_norm_of_geodesic_velocity_is_constant(rng):
    s0, s1 = random_point(rng, 3, 4), random_point(rng, 3, 4)
    dist = geo.e_distance(s0, s1)
    for t in (0.0, 0.25, 0.5, 0.75, 1.0):
        st = geo.e_geodesic(s0, s1, t)
        speed = geo.e_norm(st, geo.geodesic_velocity(s0, s1, t))
        assert abs(speed - dist) < 1e-8


def test_geodesic_endpoints(rng):
    s0, s1 = random_point(rng, 4, 3), random_point(rng, 4, 3)
    assert np.max(np.abs(geo.e_geodesic(s0, s1, 0.0) - s0)) < 1e-12
    assert np.max(np.abs(geo.e_geodesic(s0, s1, 1.0) - s1)) < 1e-12


def test_geodesic_midpoint_from_uniform(rng):
    s = random_point(rng, 3, 4)
    u = np.full((3, 4), 0.25)
    mid = geo.e_geodesic(u, s, 0.5)
    np.testing.assert_allclose(geo.encode(mid), geo.encode(s) / 2, atol=1e-12)


def test_geodesic_distance_is_proportional(rng):
    for _ in range(200):
        s0, s1 = random_point(rng, 3, 4), random_point(rng, 3, 4)
        t, u = rng.random(2)
        d = geo.e_distance(geo.e_geodesic(s0, s1, t), geo.e_geodesic(s0, s1, u))
        assert abs(d - abs(t - u) * geo.e_distance(s0, s1)) < 1e-10


def test_geodesic_extrapolation_stays_on_line(rng):
    s0, s1 = random_point(rng, 2, 3), random_point(rng, 2, 3)
    th = geo.encode(geo.e_geodesic(s0, s1, 1.5))
    np.testing.assert_allclose(th, -0.5 * geo.encode(s0) + 1.5 * geo.encode(s1), atol=1e-12)


def test_geodesic_velocity(rng):
    h = 1e-6
    s0, s1 = random_point(rng, 3, 4), random_point(rng, 3, 4)
    assert np.all(geo.geodesic_velocity(s0, s0, 0.3) == 0)
    for t in rng.random(20):
        v = geo.geodesic_velocity(s0, s1, t)
        st = geo.e_geodesic(s0, s1, t)
        assert np.max(np.abs(geo.push_tangent_to_theta(st, v) - (geo.encode(s1) - geo.encode(s0)))) < 1e-10
        fd = (geo.e_geodesic(s0, s1, t + h) - geo.e_geodesic(s0, s1, t - h)) / (2 * h)
        assert np.linalg.norm(v - fd) <= 1e-6 * np.linalg.norm(v)


def test_batched_geodesic_broadcasts_time(rng):
    s0 = np.stack([random_point(rng, 2, 3) for _ in range(5)])
    s1 = np.stack([random_point(rng, 2, 3) for _ in range(5)])
    t = rng.random(5)
    batched = geo.e_geodesic(s0, s1, t)
    for i in range(5):
        np.testing.assert_allclose(batched[i], geo.e_geodesic(s0[i], s1[i], t[i]), atol=1e-15)


finite_theta = st.lists(st.floats(-50, 50), min_size=6, max_size=6)


@settings(max_examples=200, deadline=None)
@given(finite_theta)
def test_round_trip_property(values):
    theta = np.array(values).reshape(2, 3)
    assert np.max(np.abs(geo.encode(geo.decode(theta)) - theta)) < 1e-9


@settings(max_examples=200, deadline=None)
@given(st.lists(st.floats(0.01, 1.0), min_size=8, max_size=8))
def test_decode_encode_property(values):
    s = geo.as_product_point(np.array(values).reshape(2, 4))
    assert np.max(np.abs(geo.decode(geo.encode(s)) - s)) < 1e-10
