#!/usr/bin/env python3
"""
Tests for the Navier Green's tensor, its stress kernel and Im Pi
"""

import math

import numpy as np
import pytest
from hypothesis import assume, given, settings, strategies as st

from harness.validation import fd_gradient
from src.errors import SingularPointError
from src.greens import (
    SCALE_IMAG, CurvePoint, f2_audit, funk_hecke_scalar, green_gradient, green_regular_limit, green_tensor,
    im_green_at_coincidence, im_green_closed, im_green_direct, im_green_funk, kelvin_double_layer_limit,
    navier_green, phi_k, stress_kernel,
)
from src.medium_geom import ElasticMedium, surface_registry
from src.specfun import bessel_j

MEDIUM = ElasticMedium(1.0, 1.0, 20.0)
coord = st.floats(min_value=-3.0, max_value=3.0, allow_nan=False)


@settings(max_examples=50, deadline=None)
@given(coord, coord, coord, coord)
def test_reciprocity(x1, x2, z1, z2):
    x, z = np.array([x1, x2]), np.array([z1, z2])
    assume(np.linalg.norm(x - z) > 1e-3)
    g = navier_green(x, z, MEDIUM)
    np.testing.assert_allclose(g, g.T, atol=1e-14)
    np.testing.assert_allclose(g, navier_green(z, x, MEDIUM), atol=1e-14)


def test_broadcast_shapes(medium):
    x = np.zeros((4, 3, 2)) + [0.0, 1.0]
    z = np.array([0.5, 0.0])
    assert navier_green(x, z, medium).shape == (4, 3, 2, 2)
    assert green_gradient(x, z, medium).shape == (4, 3, 2, 2, 2)


def test_singular_at_coincidence(medium):
    x = np.array([0.2, 0.3])
    with pytest.raises(SingularPointError):
        navier_green(x, x, medium)
    with pytest.raises(SingularPointError):
        phi_k(x, x, medium.ks)


def test_im_routes_agree(medium, rng):
    count = 60
    z = rng.uniform(-1.0, 1.0, (count, 2))
    sep = rng.uniform(0.05, 40.0, count) * medium.wavelength_s
    ang = rng.uniform(0.0, 2 * math.pi, count)
    x = z + sep[:, None] * np.stack([np.cos(ang), np.sin(ang)], axis=-1)

    direct = im_green_direct(x, z, medium)
    closed = im_green_closed(x, z, medium)
    funk = im_green_funk(x, z, medium)
    np.testing.assert_allclose(closed, direct, atol=1e-10)
    np.testing.assert_allclose(funk, closed, atol=1e-8)


def test_printed_f2_fails_and_corrected_passes(medium):
    audit = f2_audit(medium, pairs=40)
    assert audit['corrected'] < 1e-8
    assert audit['printed'] > 1e-3


def test_coincident_limit(medium, low_medium):
    x = np.array([0.4, -0.2])
    for m in (medium, low_medium):
        expected = im_green_at_coincidence(m)
        np.testing.assert_allclose(im_green_closed(x, x, m), expected, atol=1e-15)
        np.testing.assert_allclose(green_tensor(x, x, m, 'j', SCALE_IMAG), expected, atol=1e-15)
        np.testing.assert_allclose(im_green_funk(x, x, m, mq=64), expected, atol=1e-14)
        near = im_green_direct(x, x + [1e-7, 0.0], m)
        np.testing.assert_allclose(near, expected, atol=1e-8)
    # lambda = mu = 1: (1/8)(1 + 1/3)
    assert im_green_at_coincidence(medium)[0, 0] == pytest.approx(1.0 / 6.0)


def test_funk_hecke_scalar(rng):
    v = rng.uniform(-5.0, 5.0, (50, 2))
    k = 7.0
    np.testing.assert_allclose(funk_hecke_scalar(v, k), bessel_j(0, k * np.linalg.norm(v, axis=-1)), atol=1e-12)


@pytest.mark.parametrize('mq', [6, 9, 1023])
def test_funk_rejects_bad_quadrature(medium, mq):
    with pytest.raises(ValueError):
        im_green_funk(np.zeros(2), np.ones(2), medium, mq=mq)


def test_gradient_matches_differences(low_medium):
    x = np.array([0.3, 1.1])
    z = np.array([-0.4, 0.2])
    fd = fd_gradient(lambda p: navier_green(x, p, low_medium), z, 1e-3)
    np.testing.assert_allclose(green_gradient(x, z, low_medium), fd, atol=1e-8)


def test_stress_kernel_broadcasts_normals(low_medium):
    x = np.array([[0.0, 1.0], [0.5, 1.5]])
    y = np.array([[0.1, 0.0], [-0.2, 0.1]])
    normal = np.array([0.0, 1.0])
    batch = stress_kernel(x, CurvePoint(y, normal), low_medium)
    single = stress_kernel(x[1], CurvePoint(y[1], normal), low_medium)
    np.testing.assert_allclose(batch[1], single, atol=1e-15)


def test_regular_part_limit(low_medium):
    a_reg, b0 = green_regular_limit(low_medium)
    tangent = np.array([math.cos(0.3), math.sin(0.3)])
    x = np.array([0.1, 0.2])
    r = 1e-5
    pi = navier_green(x, x + r * tangent, low_medium)
    regular = pi + (2.0 / math.pi) * im_green_at_coincidence(low_medium) * math.log(r)
    expected = a_reg * np.eye(2) + b0 * np.outer(tangent, tangent)
    np.testing.assert_allclose(regular, expected, atol=1e-6)


def test_double_layer_limit_on_curve(low_medium):
    f = surface_registry('f2')
    # closer than this the one-sided values drown in cancellation
    t0, eps = 0.3, 1e-4

    def on_curve(t):
        fp = f.deriv(t)
        jac = math.sqrt(1.0 + fp * fp)
        return np.array([t, f.eval(t)]), np.array([-fp, 1.0]) / jac, jac

    x, _, jac = on_curve(t0)
    tangent = np.array([1.0, f.deriv(t0)]) / jac
    limit = kelvin_double_layer_limit(low_medium, f.curvature(t0), tangent)
    sides = []
    for t in (t0 - eps, t0 + eps):
        y, normal, _ = on_curve(t)
        sides.append(2.0 * stress_kernel(x, CurvePoint(y, normal), low_medium))
        np.testing.assert_allclose(sides[-1], limit, atol=2e-3)
    np.testing.assert_allclose(0.5 * (sides[0] + sides[1]), limit, atol=1e-4)
