import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cocycle_lab import NonFiniteObservable, OrbitBuffer, birkhoff_average, circle_rotation, periodic_orbit, \
    torus_automorphism
from cocycle_lab.base import make_rng, torus_distance

CAT = [[2, 1], [1, 1]]


def test_circle_step_forward():
    b = circle_rotation(math.sqrt(2) - 1)
    assert b.step(0.0) == pytest.approx(0.41421356237309515, abs=1e-15)


def test_torus_fixed_point():
    b = torus_automorphism(CAT)
    assert np.array_equal(b.step(np.array([0.0, 0.0])), [0.0, 0.0])


def test_periodic_wraps():
    pts = np.array([0.1, 0.5, 0.9])
    b = periodic_orbit(pts)
    assert b.step(0.9) == pytest.approx(0.1)
    assert b.step(0.1, "backward") == pytest.approx(0.9)


def test_invalid_inputs():
    with pytest.raises(ValueError):
        torus_automorphism([[2, 0], [0, 1]])
    with pytest.raises(ValueError):
        torus_automorphism([[1.5, 0], [0, 1]])
    with pytest.raises(ValueError):
        periodic_orbit([])
    with pytest.raises(ValueError):
        circle_rotation(0.3).step(0.1, "sideways")


def test_alpha_stored_mod_one():
    assert circle_rotation(1.25).alpha == pytest.approx(0.25)
    assert circle_rotation(-0.25).alpha == pytest.approx(0.75)


def test_sample_periodic_returns_orbit():
    pts = np.array([0.1, 0.5, 0.9])
    assert np.array_equal(periodic_orbit(pts).sample(3), pts)


def test_sample_reproducible():
    b = circle_rotation(0.3)
    assert np.array_equal(b.sample(2, seed=11), b.sample(2, seed=11))
    assert not np.array_equal(b.sample(2, seed=11), b.sample(2, seed=12))


def test_philox_generator():
    assert isinstance(make_rng(0).bit_generator, np.random.Philox)


def test_torus_sample_mean():
    xs = torus_automorphism(CAT).sample(10_000, seed=3)
    assert np.all(np.abs(xs.mean(axis=0) - 0.5) < 0.02)
    assert np.all((xs >= 0) & (xs < 1))


def test_birkhoff_constant_and_cos():
    b = circle_rotation(math.sqrt(2) - 1)
    assert birkhoff_average(b, 0.0, lambda x: np.ones_like(x), 100) == 1.0
    assert abs(birkhoff_average(b, 0.0, lambda x: np.cos(2 * np.pi * x), 100_000)) < 5e-5


def test_birkhoff_periodic_mean():
    b = periodic_orbit(np.array([0.0, 1.0, 2.0]))
    vals = {0.0: 1.0, 1.0: 2.0, 2.0: 6.0}
    assert birkhoff_average(b, 0.0, lambda x: np.array([vals[float(v)] for v in x]), 3) == 3.0


def test_birkhoff_reports_index():
    b = circle_rotation(0.25)
    with pytest.raises(NonFiniteObservable) as err:
        birkhoff_average(b, 0.0, lambda x: np.where(np.isclose(x, 0.5), np.nan, 1.0), 8)
    assert err.value.index == 2


def test_fixed_points_of_cat_map():
    fp = torus_automorphism(CAT).fixed_points(1)
    assert fp.shape == (1, 2) and np.allclose(fp, 0.0)
    assert len(torus_automorphism(CAT).fixed_points(2)) == 5


def test_orbit_negative_and_positive():
    b = torus_automorphism(CAT)
    x = b.sample(3, seed=1)
    orb = b.orbit(x, -5, 5)
    assert orb.shape == (10, 3, 2)
    assert np.array_equal(orb[5], x)
    OrbitBuffer(orb[:, 0]).check(b, atol=1e-12)


def test_orbit_buffer_detects_break():
    b = circle_rotation(0.3)
    pts = b.orbit(np.array([0.1]), 0, 5)[:, 0].copy()
    pts[3] += 0.01
    with pytest.raises(AssertionError):
        OrbitBuffer(pts).check(b)


@settings(max_examples=200, deadline=None)
@given(st.floats(0, 1, exclude_max=True), st.floats(0, 1, exclude_max=True))
def test_torus_round_trip(x1, x2):
    b = torus_automorphism(CAT)
    x = np.array([x1, x2])
    back = b.step(b.step(x), "backward")
    assert torus_distance(back, x) <= 1e-14


@settings(max_examples=200, deadline=None)
@given(st.floats(0, 1, exclude_max=True), st.floats(0, 1, exclude_max=True))
def test_circle_round_trip(alpha, x):
    b = circle_rotation(alpha)
    assert torus_distance(b.step(b.step(x), "backward"), x, 0) <= 1e-14


@settings(max_examples=50, deadline=None)
@given(st.integers(1, 400), st.floats(0, 1, exclude_max=True))
def test_coboundary_average(n, x0):
    b = circle_rotation(math.sqrt(2) - 1)

    def f(x):
        return np.sin(2 * np.pi * x) + x

    avg = birkhoff_average(b, x0, lambda x: f(b.forward(x)) - f(x), n)
    assert abs(avg) <= 2 * 2.0 / n + 1e-12
