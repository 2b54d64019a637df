import math

import numpy as np
import pytest

from nvbmesh import triangle_rule


def exact_monomial(a, b):
    # integral of x**a * y**b over the reference triangle
    return math.factorial(a) * math.factorial(b) / math.factorial(a + b + 2)


@pytest.mark.parametrize("degree", range(0, 13))
def test_weights_sum_to_reference_area(degree):
    rule = triangle_rule(degree)
    assert float(np.sum(rule.weights)) == pytest.approx(0.5, abs=1e-14)


@pytest.mark.parametrize("degree", range(0, 13))
def test_monomial_exactness(degree):
    rule = triangle_rule(degree)
    x, y = rule.points[:, 0], rule.points[:, 1]
    for a in range(degree + 1):
        for b in range(degree + 1 - a):
            approx = float(np.sum(rule.weights * x**a * y**b))
            assert abs(approx - exact_monomial(a, b)) <= 1e-13


def test_points_strictly_interior():
    for degree in (1, 4, 6, 10):
        pts = triangle_rule(degree).points
        assert np.all(pts > 0.0)
        assert np.all(pts.sum(axis=1) < 1.0)


def test_weights_positive():
    for degree in (1, 4, 6, 10):
        assert np.all(triangle_rule(degree).weights > 0.0)


def test_map_to_integrates_area():
    rule = triangle_rule(2)
    A = np.array([[0.2, -0.1], [1.0, 1.0]])
    B = np.array([[1.5, 0.3], [2.0, 1.5]])
    C = np.array([[0.4, 2.0], [1.2, 3.0]])
    _, w = rule.map_to(A, B, C)
    areas = 0.5 * np.abs(
        (B[:, 0] - A[:, 0]) * (C[:, 1] - A[:, 1]) - (C[:, 0] - A[:, 0]) * (B[:, 1] - A[:, 1])
    )
    assert np.allclose(w.sum(axis=1), areas, rtol=1e-14)


def test_map_to_single_triangle_linear_function():
    # integral of x over the unit right triangle = 1/6
    rule = triangle_rule(3)
    pts, w = rule.map_to(np.array([0.0, 0.0]), np.array([1.0, 0.0]), np.array([0.0, 1.0]))
    assert float(np.sum(w * pts[:, 0])) == pytest.approx(1.0 / 6.0, abs=1e-15)
