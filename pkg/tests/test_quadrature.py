import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fem.errors import NumericError
from fem.quadrature import (edge_rule, gauss_jacobi_endpoint, gauss_legendre, graded_rule,
                            tensor_triangle_rule, triangle_rule, two_sided_graded_rule)

pytestmark = pytest.mark.unit


def test_gauss_legendre_integrates_polynomials():
    t, w = gauss_legendre(4, 0.0, 2.0)
    assert np.sum(w * t ** 7) == pytest.approx(2.0 ** 8 / 8, rel=1e-13)


def test_gauss_legendre_needs_points():
    with pytest.raises(NumericError):
        gauss_legendre(0)


@settings(max_examples=30, deadline=None)
@given(st.floats(-0.95, 0.95))
def test_jacobi_endpoint_is_exact_for_power(alpha):
    t, w = gauss_jacobi_endpoint(6, alpha, 0.3)
    assert np.sum(w * t ** alpha) == pytest.approx(0.3 ** (1 + alpha) / (1 + alpha), rel=1e-12)


@pytest.mark.parametrize("alpha", [-0.9, -0.5, 0.0, 0.5, 0.9])
def test_graded_rule_singular_moment(alpha):
    t, w = graded_rule(alpha)
    assert np.all(t > 0) and np.all(t < 1)
    assert np.sum(w * t ** alpha) == pytest.approx(1.0 / (1.0 + alpha), rel=1e-6)


def test_graded_rule_is_cached_and_readonly():
    a = graded_rule(0.25)
    assert graded_rule(0.25) is a
    with pytest.raises(ValueError):
        a[0][0] = 1.0


def test_two_sided_rule_is_symmetric():
    t, w = two_sided_graded_rule()
    assert np.sum(w) == pytest.approx(1.0, rel=1e-13)
    assert np.allclose(np.sort(t), np.sort(1.0 - t))


def test_triangle_rule_moments():
    bary, w = triangle_rule(4)
    assert len(w) == 6 and np.all(w > 0)
    assert np.sum(w) == pytest.approx(0.5, rel=1e-13)
    x, y = bary[:, 1], bary[:, 2]
    assert np.sum(w * x * y) == pytest.approx(1.0 / 24.0, rel=1e-13)
    assert np.allclose(bary.sum(axis=1), 1.0)


@pytest.mark.parametrize("degree", [1, 2, 4, 5, 6, 8])
def test_triangle_rule_exact_to_its_degree(degree):
    bary, w = triangle_rule(degree)
    x, y = bary[:, 1], bary[:, 2]
    for i in range(degree + 1):
        for j in range(degree + 1 - i):
            # int_T x^i y^j = i! j! / (i + j + 2)!
            exact = math.factorial(i) * math.factorial(j) / math.factorial(i + j + 2)
            assert np.sum(w * x ** i * y ** j) == pytest.approx(exact, rel=1e-10)


def test_triangle_rule_is_symmetric_under_vertex_permutation():
    bary, w = triangle_rule(8)
    key = lambda b, ww: sorted(zip(np.round(b, 12).tolist(), np.round(ww, 14).tolist()))
    for perm in ([1, 2, 0], [0, 2, 1]):
        assert key(bary[:, perm], w) == key(bary, w)


def test_triangle_rule_rounds_up_and_rejects_unknown_degree():
    assert len(triangle_rule(3)[1]) == len(triangle_rule(4)[1])
    assert len(triangle_rule(7)[1]) == 16
    with pytest.raises(NumericError):
        triangle_rule(9)
    with pytest.raises(NumericError):
        triangle_rule(0)


def test_tensor_triangle_rule_for_fast_varying_weights():
    bary, w = tensor_triangle_rule(8)
    assert len(w) == 64
    x = bary[:, 1]
    assert np.sum(w * x ** 14) == pytest.approx(1.0 / (15 * 16), rel=1e-12)


def test_edge_rule_length_and_points():
    p0 = np.array([[0.0, 0.0], [1.0, 1.0]])
    p1 = np.array([[3.0, 4.0], [1.0, 3.0]])
    pts, w = edge_rule(p0, p1, 3)
    assert pts.shape == (2, 3, 2)
    assert w.sum(axis=1) == pytest.approx([5.0, 2.0])
    assert np.sum(w[1] * pts[1, :, 1] ** 2) == pytest.approx((27.0 - 1.0) / 3.0)
