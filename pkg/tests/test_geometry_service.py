import numpy as np
import pytest

from app.core.exceptions import GeometryError, InvalidPolygonError, TangentCutError
from app.models.geometry import Circle, InterfaceSpec, Line, Polygon, Region
from app.services.geometry_service import (
    cut_by_interface,
    cut_polygon,
    is_convex,
    level_eval,
    make_rectangle,
    points_in_polygon,
    polygon_centroid,
    polygon_metrics,
    star_radius,
    triangulate,
)


def test_line_cut_splits_area():
    square = make_rectangle(0.0, 1.0, 0.0, 1.0)
    pieces = cut_polygon(square, Line(point=(0.3, 0.0), normal=(1.0, 0.0)))
    by_side = {side: poly for poly, side in pieces}
    assert set(by_side) == {-1, 1}
    assert by_side[-1].area == pytest.approx(0.3)
    assert by_side[1].area == pytest.approx(0.7)


def test_circle_cut_uses_chord():
    square = make_rectangle(0.0, 1.0, 0.0, 1.0)
    pieces = cut_polygon(square, Circle((0.0, 0.0), 0.5))
    by_side = {side: poly for poly, side in pieces}
    assert by_side[-1].n == 3
    assert by_side[-1].area == pytest.approx(0.125)
    assert by_side[1].area == pytest.approx(0.875)


def test_uncut_polygon_returned_whole():
    square = make_rectangle(0.0, 1.0, 0.0, 1.0)
    pieces = cut_polygon(square, Line(point=(2.0, 0.0), normal=(1.0, 0.0)))
    assert len(pieces) == 1
    assert pieces[0][0] is square
    assert pieces[0][1] == -1


def test_circle_through_single_edge_rejected():
    square = make_rectangle(0.0, 1.0, 0.0, 1.0)
    with pytest.raises(TangentCutError) as exc:
        cut_polygon(square, Circle((0.5, -0.3), 0.5))
    assert exc.value.recoverable


def test_cut_points_are_bitwise_shared_by_neighbours():
    circle = Circle((0.1, 0.05), 0.77)
    left = make_rectangle(0.0, 0.5, 0.5, 1.0)
    right = make_rectangle(0.5, 1.0, 0.5, 1.0)
    pts_left = {tuple(p) for poly, _ in cut_polygon(left, circle) for p in poly.vertices}
    pts_right = {tuple(p) for poly, _ in cut_polygon(right, circle) for p in poly.vertices}
    shared = {p for p in pts_left & pts_right if p[0] == 0.5}
    # coin (0.5, 0.5), (0.5, 1.0) et le point d'intersection sur x = 0.5
    assert len(shared) == 3


def test_vertex_on_line_is_snapped():
    square = make_rectangle(0.0, 1.0, 0.0, 1.0)
    # diagonale: passe par deux sommets
    diag = Line(point=(0.0, 0.0), normal=(np.sqrt(0.5), -np.sqrt(0.5)))
    pieces = cut_polygon(square, diag)
    assert sorted(poly.n for poly, _ in pieces) == [3, 3]
    assert sum(poly.area for poly, _ in pieces) == pytest.approx(1.0)


def test_composite_interface_region_rule():
    spec = InterfaceSpec(
        primitives=(Circle((0.0, 0.0), 0.5), Circle((1.0, 0.0), 0.4)),
        minus_clauses=((0,), (1,)),
    )
    _, tag = level_eval(spec, (0.1, 0.1))
    assert tag is Region.MINUS
    _, tag = level_eval(spec, (0.5, 0.8))
    assert tag is Region.PLUS
    pieces = cut_by_interface(make_rectangle(0.0, 1.0, 0.0, 1.0), spec)
    assert len(pieces) == 3
    assert sum(p.area for p, _ in pieces) == pytest.approx(1.0)
    assert sorted(int(tag) for _, tag in pieces) == [-1, -1, 1]


def test_band_interface_needs_both_lines():
    spec = InterfaceSpec(
        primitives=(
            Line(point=(0.0, 0.24), normal=(0.0, -1.0)),
            Line(point=(0.0, 0.26), normal=(0.0, 1.0)),
        ),
        minus_clauses=((0, 1),),
    )
    tags = spec.region(np.array([[0.5, 0.25], [0.5, 0.1], [0.5, 0.9]]))
    assert list(tags) == [-1, 1, 1]


def test_polygon_validation():
    with pytest.raises(InvalidPolygonError):
        Polygon(np.array([[0.0, 0.0], [0.0, 1.0], [1.0, 1.0], [1.0, 0.0]]))
    with pytest.raises(InvalidPolygonError):
        Polygon(np.array([[0.0, 0.0], [2.0, 0.0], [0.0, 1.0], [2.0, 1.0], [1.0, 3.0]]))
    with pytest.raises(InvalidPolygonError):
        Polygon(np.array([[0.0, 0.0], [1.0, 0.0]]))
    with pytest.raises(GeometryError):
        Circle((0.0, 0.0), -1.0)
    with pytest.raises(GeometryError):
        Line(point=(0.0, 0.0), normal=(1.0, 1.0))


def test_square_metrics():
    m = polygon_metrics(make_rectangle(0.0, 2.0, 0.0, 1.0))
    assert m.area == pytest.approx(2.0)
    assert m.diameter == pytest.approx(np.sqrt(5.0))
    np.testing.assert_allclose(m.centroid, [1.0, 0.5])
    assert m.star_radius == pytest.approx(0.5, rel=1e-6)
    np.testing.assert_allclose(m.supporting_heights, [1.0, 2.0, 1.0, 2.0])


def test_star_radius_of_l_shape():
    v = np.array([[0, 0], [2, 0], [2, 1], [1, 1], [1, 2], [0, 2]], dtype=float)
    rho = star_radius(v)
    # noyau = carré unité [0,1]²
    assert rho == pytest.approx(0.5, rel=1e-3)
    assert not is_convex(v)


@pytest.mark.parametrize("seed", range(5))
def test_triangulation_partitions_polygon(seed):
    rng = np.random.default_rng(seed)
    angles = np.sort(rng.uniform(0.0, 2.0 * np.pi, 9))
    radii = rng.uniform(0.4, 1.0, 9)
    v = np.column_stack([radii * np.cos(angles), radii * np.sin(angles)])
    poly = Polygon(v)
    tris = triangulate(poly)
    e1 = [t[1] - t[0] for t in tris]
    e2 = [t[2] - t[0] for t in tris]
    areas = [0.5 * (a[0] * b[1] - a[1] * b[0]) for a, b in zip(e1, e2)]
    assert min(areas) > 0.0
    assert sum(areas) == pytest.approx(poly.area)
    centroids = np.array([t.mean(axis=0) for t in tris])
    assert points_in_polygon(centroids, v).all()


def test_centroid_of_triangle():
    v = np.array([[0.0, 0.0], [3.0, 0.0], [0.0, 3.0]])
    np.testing.assert_allclose(polygon_centroid(v), [1.0, 1.0])


def test_points_in_polygon_boundary_tolerance():
    v = make_rectangle(0.0, 1.0, 0.0, 1.0).vertices
    pts = np.array([[0.5, 0.5], [1.5, 0.5], [1.0 + 1e-14, 0.5]])
    assert list(points_in_polygon(pts, v)) == [True, False, False]
    assert list(points_in_polygon(pts, v, tol=1e-12)) == [True, False, True]


PENTAGON = np.array([[0.0, 0.0], [1.0, -0.2], [1.6, 0.7], [0.9, 1.4], [-0.3, 0.8]])


@pytest.mark.parametrize("s", [0.5, 2.0])
def test_polygon_metrics_scale(s):
    base = polygon_metrics(Polygon(PENTAGON))
    scaled = polygon_metrics(Polygon(s * PENTAGON))
    assert scaled.area == pytest.approx(s ** 2 * base.area, rel=1e-12)
    assert scaled.diameter == pytest.approx(s * base.diameter, rel=1e-12)
    assert scaled.star_radius == pytest.approx(s * base.star_radius, rel=1e-8)
    np.testing.assert_allclose(scaled.centroid, s * base.centroid, rtol=1e-12)
    np.testing.assert_allclose(scaled.edge_lengths, s * base.edge_lengths, rtol=1e-12)
    np.testing.assert_allclose(scaled.supporting_heights, s * base.supporting_heights, rtol=1e-12)
