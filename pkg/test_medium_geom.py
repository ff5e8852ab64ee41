#!/usr/bin/env python3
"""
Tests for media, surface profiles, direction grids and the measurement line
"""

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from src.errors import GeometryError, InvalidGridError, RegistryError
from src.medium_geom import (
    SURFACES, DirectionGrid, ElasticMedium, MeasurementLine, flat_surface, mirror_dir, mirror_point,
    parse_surface, perp, surface_registry,
)

finite = st.floats(min_value=-10.0, max_value=10.0, allow_nan=False)


class TestMedium:

    def test_wavenumbers(self, medium):
        assert medium.ks == pytest.approx(20.0)
        assert medium.kp == pytest.approx(20.0 / math.sqrt(3.0))
        assert medium.wavelength_s == pytest.approx(2 * math.pi / 20.0)

    def test_stress_params_unit_moduli(self, medium):
        sp = medium.stress_params()
        assert sp.mu_t == pytest.approx(0.5)
        assert sp.lambda_t == pytest.approx(1.5)

    @pytest.mark.parametrize('lam,mu,omega', [(1.0, 0.0, 1.0), (-2.0, 1.0, 1.0), (1.0, 1.0, 0.0)])
    def test_rejects_bad_parameters(self, lam, mu, omega):
        with pytest.raises(GeometryError):
            ElasticMedium(lam, mu, omega)

    def test_to_dict(self, medium):
        assert medium.to_dict() == {'lambda': 1.0, 'mu': 1.0, 'omega': 20.0}


class TestSurfaces:

    def test_registry_ids(self):
        assert set(SURFACES) == {'f1', 'f2', 'f3', 'f4'}
        assert surface_registry('flat').eval(3.0) == 0.0

    def test_f1_pieces(self):
        f1 = surface_registry('f1')
        assert f1.eval(0.0) == pytest.approx(0.27)
        assert f1.eval(5.0) == pytest.approx(0.55)
        assert f1.eval(4.0) == pytest.approx(0.55)
        assert f1.deriv(5.0) == 0.0

    def test_f2_value(self):
        f2 = surface_registry('f2')
        x = 0.3
        expected = 0.5 + 0.14 * math.sin(0.7 * math.pi * (x + 0.6))
        assert f2.eval(x) == pytest.approx(expected)

    @pytest.mark.parametrize('surface_id', ['f1', 'f2', 'f3', 'f4'])
    def test_envelope_bounds_samples(self, surface_id):
        f = surface_registry(surface_id)
        x = np.linspace(-20.0, 20.0, 4001)
        values = f.eval(x)
        assert values.max() <= f.f_sup + 1e-12
        assert values.min() >= f.f_inf - 1e-12

    @pytest.mark.parametrize('surface_id', ['f2', 'f3', 'f4'])
    def test_derivatives_match_differences(self, surface_id):
        f = surface_registry(surface_id)
        x = np.linspace(-3.0, 3.0, 13)
        h = 1e-5
        np.testing.assert_allclose(f.deriv(x), (f.eval(x + h) - f.eval(x - h)) / (2 * h), atol=1e-7)
        np.testing.assert_allclose(f.deriv2(x), (f.deriv(x + h) - f.deriv(x - h)) / (2 * h), atol=1e-6)

    @pytest.mark.parametrize('surface_id', ['f2', 'f3', 'f4'])
    def test_curvature_is_turning_rate_of_tangent(self, surface_id):
        f = surface_registry(surface_id)
        x = np.linspace(-3.0, 3.0, 13)
        h = 1e-5
        angle = lambda t: np.arctan(f.deriv(t))
        arc = np.sqrt(1.0 + f.deriv(x) ** 2)
        np.testing.assert_allclose(f.curvature(x), (angle(x + h) - angle(x - h)) / (2 * h * arc), atol=1e-6)
        assert isinstance(f.curvature(0.3), float)
        assert flat_surface(0.4).curvature(1.0) == 0.0

    @pytest.mark.parametrize('surface_id', ['f1', 'f2', 'f3', 'f4'])
    def test_describe_parses_back(self, surface_id):
        f = surface_registry(surface_id)
        spec = f.describe()
        split = float(spec['split']) if 'split' in spec else None
        g = parse_surface(spec['expr'], split, spec.get('expr_right'), surface_id)
        x = np.linspace(-6.0, 6.0, 101)
        np.testing.assert_allclose(g.eval(x), f.eval(x), atol=1e-14)

    def test_custom_expression(self):
        f = surface_registry('mine', {'expr': '0.3 - 0.1*cos(2*x) + 0.05*sin(3*x-0.5)'})
        assert f.id == 'mine'
        assert f.eval(0.0) == pytest.approx(0.3 - 0.1 + 0.05 * math.sin(-0.5))
        assert f.f_sup == pytest.approx(0.45)

    def test_unknown_id_and_bad_expression(self):
        with pytest.raises(RegistryError):
            surface_registry('f9')
        with pytest.raises(RegistryError):
            parse_surface('0.3 + 0.1*tan(x)')
        with pytest.raises(RegistryError):
            parse_surface('0.3', split=1.0)

    def test_flat_surface(self):
        f = flat_surface(0.25)
        assert f.f_sup == f.f_inf == 0.25
        assert f.deriv(np.array([1.0, 2.0])).tolist() == [0.0, 0.0]


class TestDirections:

    @settings(max_examples=100)
    @given(finite, finite)
    def test_perp_and_mirror_algebra(self, a, b):
        d = np.array([a, b])
        assert np.dot(perp(d), d) == pytest.approx(0.0, abs=1e-12)
        np.testing.assert_array_equal(perp(perp(d)), -d)
        np.testing.assert_array_equal(mirror_point(mirror_point(d)), d)
        md, md_perp = mirror_dir(d)
        np.testing.assert_array_equal(md, [a, -b])
        np.testing.assert_array_equal(md_perp, [b, a])

    @pytest.mark.parametrize('M', [2, 16, 256])
    def test_grid_weights_and_endpoints(self, M):
        grid = DirectionGrid(M)
        d = grid.directions
        assert d.shape == (M + 1, 2)
        assert grid.weights.sum() == pytest.approx(math.pi)
        np.testing.assert_array_equal(d[0], [-1.0, 0.0])
        np.testing.assert_array_equal(d[M // 2], [0.0, -1.0])
        assert np.all(d[:, 1] <= 0.0)
        np.testing.assert_allclose(np.linalg.norm(d, axis=1), 1.0, atol=1e-15)

    def test_grid_is_symmetric(self, small_grid):
        d = small_grid.directions
        np.testing.assert_array_equal(d[::-1, 0], -d[:, 0])
        np.testing.assert_array_equal(d[::-1, 1], d[:, 1])
        assert np.all(small_grid.upper()[:, 1] >= 0.0)

    @pytest.mark.parametrize('M', [0, 3, 17])
    def test_odd_or_small_count_rejected(self, M):
        with pytest.raises(InvalidGridError):
            DirectionGrid(M)


class TestMeasurementLine:

    def test_nodes_and_weights(self, small_line):
        nodes = small_line.nodes
        assert nodes.shape == (41, 2)
        assert nodes[0, 0] == -2.0 and nodes[-1, 0] == 2.0
        assert np.all(nodes[:, 1] == 1.0)
        assert small_line.weights.sum() == pytest.approx(4.0)
        assert small_line.h == pytest.approx(0.1)

    def test_check_above(self):
        MeasurementLine(2.0, 8.0, 10).check_above(surface_registry('f2'))
        with pytest.raises(GeometryError):
            MeasurementLine(0.6, 8.0, 10).check_above(surface_registry('f2'))

    def test_rejects_bad_geometry(self):
        with pytest.raises(GeometryError):
            MeasurementLine(1.0, 0.0, 10)
        with pytest.raises(GeometryError):
            MeasurementLine(1.0, 2.0, 0)
