import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import smooth_random_image
from oracles import point_polyline_distance
from polymap.errors import DegenerateRegionError, NotFoundError, RejectedInputError
from polymap.polygonize import (
    BoundaryContour,
    bridge_holes,
    boundary_pixel_count,
    contour_to_polygon,
    is_simple,
    polygonize_partition,
    rasterize_polygon,
    signed_area,
    trace_boundary,
    trace_mask,
)
from polymap.snic import SnicParams, SuperpixelPartition, run_snic


def grid_partition(grid):
    grid = np.asarray(grid)
    return SuperpixelPartition(grid, [], int(grid.max()) + 1, grid.size)


def test_single_pixel():
    c = trace_mask(np.array([[True]]))
    assert len(c) == 4
    assert {tuple(p) for p in c.points} == {(-0.5, -0.5), (0.5, -0.5), (0.5, 0.5), (-0.5, 0.5)}
    assert signed_area(c.points) == 1.0


def test_rectangle_contour_and_polygon():
    mask = np.zeros((5, 6), bool)
    mask[1:3, 2:5] = True  # 3 wide, 2 tall
    c = trace_mask(mask)
    assert len(c) == 10
    poly = contour_to_polygon(c)
    assert len(poly) == 4
    assert {tuple(p) for p in poly.vertices} == {(1.5, 0.5), (4.5, 0.5), (4.5, 2.5), (1.5, 2.5)}
    assert signed_area(poly.vertices) == 6.0


def test_l_shape_has_six_vertices():
    mask = np.zeros((4, 4), bool)
    mask[0:3, 0] = True
    mask[2, 0:3] = True
    poly = contour_to_polygon(trace_mask(mask))
    assert len(poly) == 6
    np.testing.assert_array_equal(rasterize_polygon(poly, 4, 4), mask)


def test_region_with_hole():
    ring = np.ones((5, 5), bool)
    ring[2, 2] = False
    c = trace_mask(ring)
    assert len(c.holes) == 1
    assert signed_area(c.holes[0]) == -1.0
    poly = contour_to_polygon(c)
    # 4 outer + 4 hole corners, the hole's start vertex and the slit top repeated
    assert len(poly) == 4 + 4 + 2 + 1
    assert signed_area(poly.vertices) == 24
    np.testing.assert_array_equal(rasterize_polygon(poly, 5, 5), ring)
    part = grid_partition(np.where(ring, 0, 1))
    polys, failures = polygonize_partition(part)
    assert failures == {}
    assert [p.superpixel_id for p in polys] == [0, 1]


def test_two_holes_stacked():
    m = np.ones((9, 7), bool)
    m[2, 3] = m[5:7, 2:5] = False
    poly = contour_to_polygon(trace_mask(m))
    np.testing.assert_array_equal(rasterize_polygon(poly, 7, 9), m)
    assert signed_area(poly.vertices) == m.sum()


def test_bridge_without_enclosure_fails():
    outer = np.array([[0, 0], [4, 0], [4, 4], [0, 4]], float)
    with pytest.raises(DegenerateRegionError):
        bridge_holes(outer, [np.array([[6, 6], [6, 7], [7, 7], [7, 6]], float)])


def test_vertex_bound_needs_room():
    # a lone pixel is one boundary pixel but four vertices; the frame-level
    # bound is a property of realistically sized superpixels
    part = grid_partition(np.array([[0, 0, 0], [0, 1, 0], [0, 0, 0]]))
    polys, _ = polygonize_partition(part)
    assert len(polys[1]) == 4 > boundary_pixel_count(part.assignment == 1)


def test_missing_and_degenerate():
    part = grid_partition(np.zeros((3, 3), int))
    with pytest.raises(NotFoundError):
        trace_boundary(part, 5)
    with pytest.raises(DegenerateRegionError):
        contour_to_polygon(BoundaryContour(np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 0.0]])))
    with pytest.raises(RejectedInputError):
        contour_to_polygon(trace_mask(np.ones((2, 2), bool)), epsilon=-1)


def test_diagonal_contact_round_trips():
    # region 0 touches itself at corner (1.5, 0.5); the contour passes through it twice
    grid = np.array([[0, 0, 2], [0, 1, 0], [0, 0, 0]])
    part = grid_partition(grid)
    polys, failures = polygonize_partition(part)
    assert failures == {}
    outer = polys[0].vertices.tolist()
    assert outer.count([1.5, 0.5]) == 2
    for poly in polys:
        np.testing.assert_array_equal(rasterize_polygon(poly, 3, 3), grid == poly.superpixel_id)


def staircase(n=8):
    mask = np.zeros((n, n), bool)
    for v in range(n):
        mask[v, : v + 1] = True
    return mask


def test_staircase_rdp_deviation_bound():
    mask = staircase(10)
    c = trace_mask(mask)
    poly = contour_to_polygon(c, epsilon=1.5)
    lossless = contour_to_polygon(c)
    assert len(poly) < len(lossless)
    assert is_simple(poly.vertices)
    assert signed_area(poly.vertices) > 0
    # every dropped contour point stays within epsilon of the simplified ring
    worst = max(point_polyline_distance(p, poly.vertices) for p in c.points)
    assert worst <= 1.5 + 1e-12


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(0.3, 4.0))
def test_rdp_bound_and_simplicity_random(seed, eps):
    r = np.random.default_rng(seed)
    lab, labels = smooth_random_image(r, 24, 24)
    part = run_snic(lab, labels, SnicParams(int(r.integers(2, 8))))
    for sp in range(part.k_actual):
        c = trace_boundary(part, sp)
        poly = contour_to_polygon(c, eps, sp)
        assert signed_area(poly.vertices) > 0
        if not c.holes:
            assert is_simple(poly.vertices)
        worst = max(point_polyline_distance(p, poly.vertices) for p in c.points)
        assert worst <= eps + 1e-9


@pytest.mark.parametrize("seed", range(8))
def test_lossless_round_trip(seed):
    r = np.random.default_rng(seed)
    h, w = r.integers(24, 64, 2)
    lab, labels = smooth_random_image(r, h, w)
    part = run_snic(lab, labels, SnicParams(int(r.integers(1, 20))))
    polys, failures = polygonize_partition(part, 0.0)
    assert failures == {}
    assert len(polys) == part.k_actual
    vertices = boundary = 0
    for poly in polys:
        mask = part.assignment == poly.superpixel_id
        np.testing.assert_array_equal(rasterize_polygon(poly, w, h), mask)
        assert signed_area(poly.vertices) == np.count_nonzero(mask)
        vertices += len(poly)
        boundary += boundary_pixel_count(mask)
    assert vertices <= boundary


def test_boundary_pixel_count():
    assert boundary_pixel_count(np.ones((1, 1), bool)) == 1
    assert boundary_pixel_count(np.ones((5, 5), bool)) == 16
    m = np.zeros((7, 7), bool)
    m[1:6, 1:6] = True
    assert boundary_pixel_count(m) == 16
