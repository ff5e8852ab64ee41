#!/usr/bin/env python3
"""
Tests for the Bessel / Hankel evaluators
"""

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from src.errors import OrderOutOfRangeError, SingularArgumentError
from src.specfun import (
    asymptotic_bessel, bessel_j, bessel_y, crossover_report, hankel1, series_bessel, two_branch,
)


def test_values_at_known_points():
    assert bessel_j(0, 0.0) == 1.0
    assert bessel_j(1, 0.0) == 0.0
    # first zero of J0
    assert abs(bessel_j(0, 2.404825557695773)) < 1e-14
    assert bessel_j(0, 1.0) == pytest.approx(0.7651976865579666, abs=1e-15)
    assert bessel_y(0, 1.0) == pytest.approx(0.08825696421567696, abs=1e-15)
    assert bessel_y(1, 1.0) == pytest.approx(-0.7812128213002887, abs=1e-15)


def test_hankel_is_j_plus_iy():
    t = np.linspace(0.1, 50.0, 101)
    for n in (0, 1):
        np.testing.assert_allclose(hankel1(n, t), bessel_j(n, t) + 1j * bessel_y(n, t), rtol=1e-14)


def test_scalar_and_array_inputs():
    assert isinstance(bessel_j(0, 2.0), float)
    assert isinstance(hankel1(1, 2.0), complex)
    assert bessel_j(1, np.array([1.0, 2.0])).shape == (2,)


def test_errors():
    with pytest.raises(OrderOutOfRangeError):
        bessel_j(2, 1.0)
    with pytest.raises(SingularArgumentError):
        bessel_y(0, 0.0)
    with pytest.raises(SingularArgumentError):
        hankel1(1, np.array([1.0, 0.0]))
    with pytest.raises(ValueError):
        bessel_j(0, -1.0)


@settings(max_examples=200, deadline=None)
@given(st.floats(min_value=1e-3, max_value=500.0))
def test_wronskian(t):
    lhs = bessel_j(1, t) * bessel_y(0, t) - bessel_j(0, t) * bessel_y(1, t)
    assert lhs == pytest.approx(2.0 / (math.pi * t), rel=1e-10)


@pytest.mark.parametrize('t', [0.01, 0.5, 3.0, 8.0, 11.9])
def test_series_branch_matches_library(t):
    for n in (0, 1):
        j, y = series_bessel(n, t)
        assert j == pytest.approx(bessel_j(n, t), abs=1e-12)
        assert y == pytest.approx(bessel_y(n, t), abs=1e-11)


@pytest.mark.parametrize('t', [12.0, 20.0, 75.0, 400.0])
def test_asymptotic_branch_matches_library(t):
    for n in (0, 1):
        j, y = asymptotic_bessel(n, t)
        assert j == pytest.approx(bessel_j(n, t), abs=1e-10)
        assert y == pytest.approx(bessel_y(n, t), abs=1e-10)


def test_two_branch_dispatch():
    assert two_branch(0, 5.0) == series_bessel(0, 5.0)
    assert two_branch(1, 30.0) == asymptotic_bessel(1, 30.0)


def test_crossover_is_continuous():
    assert crossover_report() < 1e-9
