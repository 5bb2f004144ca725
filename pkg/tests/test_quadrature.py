import math

import numpy as np
import pytest

from app.core.exceptions import QuadratureError
from app.utils.quadrature import (
    adaptive_triangle_points,
    gauss_01,
    graded_breakpoints,
    segment_points,
    triangle_points,
    triangle_rule,
)

UNIT_SQUARE = np.array([
    [[0.0, 0.0], [1.0, 0.0], [1.0, 1.0]],
    [[0.0, 0.0], [1.0, 1.0], [0.0, 1.0]],
])


@pytest.mark.parametrize("order", [1, 3, 7, 15])
def test_gauss_01_exact_up_to_order(order):
    x, w = gauss_01(order)
    for p in range(order + 1):
        assert np.dot(w, x ** p) == pytest.approx(1.0 / (p + 1), rel=1e-13)


@pytest.mark.parametrize("order", [1, 2, 4, 7])
def test_triangle_rule_monomials(order):
    pts, w = triangle_rule(order)
    assert w.sum() == pytest.approx(0.5, rel=1e-14)
    assert np.all(w > 0.0)
    for a in range(order + 1):
        for b in range(order + 1 - a):
            exact = math.factorial(a) * math.factorial(b) / math.factorial(a + b + 2)
            assert np.dot(w, pts[:, 0] ** a * pts[:, 1] ** b) == pytest.approx(exact, rel=1e-12)


def test_triangle_points_scale_with_area():
    pts, w = triangle_points(UNIT_SQUARE, 4)
    assert w.sum() == pytest.approx(1.0, rel=1e-14)
    # ∫ x y sur le carré unité
    assert np.sum(w * pts[..., 0] * pts[..., 1]) == pytest.approx(0.25, rel=1e-13)


def test_graded_breakpoints():
    br = graded_breakpoints(0.25, 20)
    assert br[0] == 0.0 and br[-1] == 1.0
    assert br[1] == pytest.approx(0.25 ** 20)
    assert np.all(np.diff(br) > 0.0)


@pytest.mark.parametrize("toward", [-1, 1])
def test_graded_segment_integrates_endpoint_singularity(toward):
    t, w = segment_points(7, graded_toward=toward)
    assert w.sum() == pytest.approx(1.0, rel=1e-13)
    dist = t if toward < 0 else 1.0 - t
    assert np.all(dist > 0.0)
    assert np.dot(w, dist ** -0.4) == pytest.approx(1.0 / 0.6, rel=1e-6)


def test_plain_segment_is_gauss():
    t, w = segment_points(5)
    x, wx = gauss_01(5)
    np.testing.assert_array_equal(t, x)
    np.testing.assert_array_equal(w, wx)


def test_adaptive_resolves_sharp_layer():
    eps = 0.05

    def layer(points, owner):
        return np.exp(-((points[:, 0] - 0.3) / eps) ** 2)

    pts, w, owner = adaptive_triangle_points(UNIT_SQUARE, np.arange(2), layer, 7)
    assert w.sum() == pytest.approx(1.0, rel=1e-12)
    assert set(np.unique(owner)) == {0, 1}
    exact = 0.5 * eps * math.sqrt(math.pi) * (math.erf(0.7 / eps) + math.erf(0.3 / eps))
    assert np.dot(w, layer(pts, owner)) == pytest.approx(exact, rel=1e-4)
    # raffinement concentré près de x = 0.3
    assert w.size > triangle_rule(7)[1].size * 8


def test_adaptive_rejects_non_finite_samples():
    def bad(points, owner):
        out = np.ones(points.shape[0])
        out[points[:, 0] > 0.5] = np.nan
        return out

    with pytest.raises(QuadratureError) as exc:
        adaptive_triangle_points(UNIT_SQUARE, np.arange(2), bad, 3)
    assert exc.value.location is not None
    assert exc.value.location[0] > 0.5
