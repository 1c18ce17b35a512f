import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dyadlab import Cube, Exponent, build_system, conjugate, worked_instances
from dyadlab.measures import (
    average,
    box_integral,
    cube_integral,
    ell2_slice,
    lp_norm,
    mass,
    mixed_norm,
    zero_preserving_power,
)

import _reference as ref


W = worked_instances()


def test_exponent_conjugacy():
    for p in (1.5, 2.0, 2.5, 3.0, 4.0, 10.0):
        e = Exponent.of(p)
        assert 1.0 / e.p + 1.0 / e.q == pytest.approx(1.0, abs=1e-15)
    assert conjugate(2.0) == 2.0
    for bad in (1.0, 0.5, -2.0, math.inf):
        with pytest.raises(ValueError):
            Exponent.of(bad)


def test_ell2_slice_examples():
    w1 = W["w1"]
    assert np.allclose(ell2_slice(np.zeros((2, 2))), 0.0)
    assert np.allclose(ell2_slice(np.ones((2, 2))), math.sqrt(2.0))
    assert ell2_slice(np.array([[8.0]]))[0] == 8.0


def test_mixed_norm_examples():
    assert mixed_norm(np.ones((2, 2)), np.array([1.0, 1.0]), 2.0) == pytest.approx(2.0)
    assert mixed_norm(np.ones((2, 2)), np.zeros(2), 2.0) == 0.0
    assert mixed_norm(np.array([[2.0]]), np.array([1.0]), 4.0) == pytest.approx(2.0)


def test_lp_norm_examples():
    assert lp_norm(np.ones(2), np.array([1.0, 1.0]), 2.0) == pytest.approx(math.sqrt(2))
    assert lp_norm(np.zeros(2), np.ones(2), 2.0) == 0.0
    assert lp_norm(np.array([2.0]), np.array([3.0]), 2.0) == pytest.approx(2 * math.sqrt(3))


def test_box_integral_examples():
    s = build_system(1, 1)
    ones = np.ones((2, 2))
    sig = np.array([1.0, 1.0])
    assert box_integral(s, ones, ones, sig, s.root) == 4.0
    assert box_integral(s, ones, ones, sig, Cube(1, (0,))) == 1.0
    assert box_integral(s, ones, np.zeros((2, 2)), sig, s.root) == 0.0


def test_cube_integral_and_average_examples():
    s = build_system(1, 1)
    g = np.ones(2)
    w = np.array([1.0, 1.0])
    assert cube_integral(s, g, w, s.root) == 2.0
    assert average(s, g, w, s.root) == 1.0
    assert average(s, g, np.zeros(2), s.root) == 0.0
    assert cube_integral(s, np.zeros(2), w, s.root) == 0.0


@pytest.mark.parametrize("n,d,p", [(1, 3, 2.0), (2, 2, 2.5), (1, 2, 4.0)])
def test_against_reference(n, d, p):
    s = build_system(n, d)
    rng = np.random.Generator(np.random.Philox(key=[11, n * 10 + d]))
    f = rng.random((s.num_levels, s.num_atoms))
    mu = rng.random((s.num_levels, s.num_atoms))
    sigma = rng.random(s.num_atoms)
    g = rng.random(s.num_atoms)

    assert mixed_norm(f, sigma, p) == pytest.approx(
        ref.mixed_norm(f.tolist(), sigma.tolist(), p), rel=1e-13
    )
    assert lp_norm(g, sigma, p) == pytest.approx(
        ref.lp_norm(g.tolist(), sigma.tolist(), p), rel=1e-13
    )
    for lin in range(0, s.num_cubes, 3):
        cube = s.cube_at(lin)
        assert box_integral(s, f, mu, sigma, cube) == pytest.approx(
            ref.box_integral(n, d, f.tolist(), mu.tolist(), sigma.tolist(), cube.level, cube.index),
            rel=1e-12,
        )
        assert cube_integral(s, g, sigma, cube) == pytest.approx(
            ref.cube_integral(n, d, g.tolist(), sigma.tolist(), cube.level, cube.index),
            rel=1e-12,
        )


@given(st.integers(0, 10**9), st.sampled_from([1.5, 2.0, 3.0, 4.0]))
@settings(max_examples=40, deadline=None)
def test_norm_homogeneity_and_triangle(seed, p):
    s = build_system(1, 3)
    rng = np.random.Generator(np.random.Philox(key=[seed, 1]))
    f = rng.random((s.num_levels, s.num_atoms))
    h = rng.random((s.num_levels, s.num_atoms))
    sigma = rng.random(s.num_atoms)
    c = 1.0 + rng.random() * 5.0
    n_f = mixed_norm(f, sigma, p)
    assert mixed_norm(c * f, sigma, p) == pytest.approx(c * n_f, rel=1e-12)
    assert mixed_norm(f + h, sigma, p) <= (n_f + mixed_norm(h, sigma, p)) * (1 + 1e-12)


@given(st.integers(0, 10**9), st.sampled_from([2.0, 2.5, 3.0, 4.0]))
@settings(max_examples=40, deadline=None)
def test_box_integral_hoelder(seed, p):
    s = build_system(1, 3)
    rng = np.random.Generator(np.random.Philox(key=[seed, 2]))
    f = rng.random((s.num_levels, s.num_atoms))
    mu = rng.random((s.num_levels, s.num_atoms))
    sigma = rng.random(s.num_atoms)
    for lin in (0, 3, 7):
        cube = s.cube_at(lin)
        bm = s.box_mask(cube)
        lhs = box_integral(s, f, mu, sigma, cube)
        rhs = mixed_norm(f * bm, sigma, p) * mixed_norm(mu * bm, sigma, conjugate(p))
        assert lhs <= rhs * (1 + 1e-12)


def test_average_bounds():
    s = build_system(1, 2)
    rng = np.random.Generator(np.random.Philox(key=[3, 3]))
    g = rng.random(s.num_atoms)
    w = rng.random(s.num_atoms)
    for lin in range(s.num_cubes):
        cube = s.cube_at(lin)
        assert average(s, g, w, cube) <= g.max() * (1 + 1e-12)
        if mass(s, w, cube) > 0:
            assert average(s, np.full(s.num_atoms, 0.7), w, cube) == pytest.approx(0.7, rel=1e-13)


def test_mixed_norm_vanishes_only_off_support():
    s = build_system(1, 1)
    sigma = np.array([0.0, 2.0])
    f = np.zeros((2, 2))
    f[:, 0] = 3.0  # lives only on the weightless atom
    assert mixed_norm(f, sigma, 2.0) == 0.0
    f[1, 1] = 1e-12
    assert mixed_norm(f, sigma, 2.0) > 0.0


def test_zero_preserving_power():
    x = np.array([0.0, 1.0, 4.0])
    assert np.array_equal(zero_preserving_power(x, -0.5), [0.0, 1.0, 0.5])
    assert np.array_equal(zero_preserving_power(x, 0.0), [0.0, 1.0, 1.0])
    assert np.array_equal(zero_preserving_power(x, 2.0), [0.0, 1.0, 16.0])


def test_validation_rejects_bad_values():
    from dyadlab.measures import as_scale_function, as_weights

    s = build_system(1, 1)
    with pytest.raises(ValueError):
        as_weights(s, [-1.0, 0.0])
    with pytest.raises(ValueError):
        as_weights(s, [math.nan, 0.0])
    with pytest.raises(ValueError):
        as_weights(s, [1.0])
    with pytest.raises(ValueError):
        as_scale_function(s, np.ones((3, 2)))
