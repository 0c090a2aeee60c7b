import hashlib

import numpy as np
import pytest
from plyfile import PlyData

from polymap.core import CameraIntrinsics, CameraPose, nearest_rotation, project, transform_to_camera
from polymap.errors import DegenerateGeometryError, RejectedInputError
from polymap.labels import load_palette, palette_colors
from polymap.mapping import (
    MapPolygon3D,
    MemoryStats,
    SemanticMap,
    accumulate,
    assign_label,
    ear_clip,
    export_ply,
    lift_polygon,
    superpixel_labels,
)
from polymap.polygonize import Polygon2D
from polymap.refine import GroundPlane, PlaneParams
from polymap.snic import SuperpixelPartition

K = CameraIntrinsics(100.0, 100.0, 50.0, 50.0)
SQUARE = Polygon2D(np.array([[40.0, 40.0], [60.0, 40.0], [60.0, 60.0], [40.0, 60.0]]), 3)


def test_lift_constant_plane():
    p = lift_polygon(SQUARE, PlaneParams(0, 0, 5.0), K, CameraPose.identity(), semantic_label=2, frame_id=1)
    np.testing.assert_allclose(p.vertices[:, 2], 5.0)
    np.testing.assert_allclose(p.vertices[0], [-0.5, -0.5, 5.0])
    assert p.key == (1, 3)


def test_lift_translation_shifts_vertices():
    base = lift_polygon(SQUARE, PlaneParams(0.01, 0.02, 4.0), K, CameraPose.identity())
    moved = lift_polygon(SQUARE, PlaneParams(0.01, 0.02, 4.0), K, CameraPose(np.eye(3), [1.0, -2.0, 3.0]))
    np.testing.assert_allclose(moved.vertices - base.vertices, np.tile([1.0, -2.0, 3.0], (4, 1)), atol=1e-12)


def test_lift_project_round_trip(rng):
    for _ in range(30):
        pose = CameraPose(nearest_rotation(rng.normal(size=(3, 3))), rng.normal(size=3) * 5)
        plane = PlaneParams(*rng.uniform(-0.01, 0.01, 2), rng.uniform(3, 20))
        verts = rng.uniform(0, 100, (6, 2))
        p = lift_polygon(Polygon2D(verts, 0), plane, K, pose)
        back = np.array([project(q, K)[:2] for q in transform_to_camera(p.vertices, pose)])
        np.testing.assert_allclose(back, verts, atol=1e-6)


def test_lift_coplanar_for_fronto_parallel_and_ground():
    pose = CameraPose(nearest_rotation(np.eye(3) + 0.1), [2.0, 0.0, 1.0])
    p = lift_polygon(SQUARE, PlaneParams(0, 0, 7.0), K, pose)
    ground = GroundPlane(np.array([0.0, -0.8, -0.6]) * -1, 1.2)
    g = lift_polygon(SQUARE, PlaneParams(0, 0, 1.0), K, pose, ground=ground)
    for poly in (p, g):
        centred = poly.vertices - poly.vertices.mean(0)
        assert np.linalg.svd(centred, compute_uv=False)[-1] < 1e-9


def test_lift_errors():
    with pytest.raises(DegenerateGeometryError):
        lift_polygon(SQUARE, PlaneParams(0, 0, -1.0), K, CameraPose.identity())
    with pytest.raises(DegenerateGeometryError):
        lift_polygon(SQUARE, PlaneParams(0, 0, 1.0, valid=False), K, CameraPose.identity())
    sky_facing = GroundPlane(np.array([0.0, 1.0, 0.0]), 1.5)  # ground below; rays above the horizon miss
    with pytest.raises(DegenerateGeometryError):
        lift_polygon(Polygon2D(SQUARE.vertices - [0, 30], 0), PlaneParams(0, 0, 1), K, CameraPose.identity(), ground=sky_facing)


def test_assign_label_majority_and_ties():
    grid = np.array([[0, 0, 1, 1]])
    part = SuperpixelPartition(grid, [], 2, 4)
    labels = np.array([[5, 2, 7, 7]])
    assert assign_label(part, 0, labels) == 2  # tie goes to the smaller id
    assert assign_label(part, 1, labels) == 7
    np.testing.assert_array_equal(superpixel_labels(part, labels), [2, 7])


def poly3d(frame, sp, label, verts=None, dense=10):
    verts = np.array([[0, 0, 5], [1, 0, 5], [1, 1, 5], [0, 1, 5]], float) if verts is None else verts
    img = verts[:, :2].copy()
    return MapPolygon3D(verts, label, (10, 20, 30), frame, sp, img, dense)


def test_accumulate():
    m = SemanticMap()
    m = accumulate(m, 1, [poly3d(1, 0, 2), poly3d(1, 1, 10)])
    m = accumulate(m, 0, [poly3d(0, 4, 0)])
    assert m.frame_count == 2
    assert [p.key for p in m.sorted_polygons()] == [(0, 4), (1, 0)]
    assert m.stats == MemoryStats(8, 20)
    assert m.stats.compression_ratio == 0.4
    assert "compression_ratio=0.400000" in m.stats.report()
    with pytest.raises(RejectedInputError):
        accumulate(m, 1, [])
    with pytest.raises(RejectedInputError):
        accumulate(m, 2, [poly3d(3, 0, 1)])


def test_ply_quad(tmp_path):
    m = accumulate(SemanticMap(), 0, [poly3d(0, 0, 0)])
    path = export_ply(m, tmp_path / "q.ply")
    ply = PlyData.read(str(path))
    assert ply["vertex"].count == 4
    assert ply["face"].count == 2
    road = palette_colors(load_palette())[0]
    v = ply["vertex"].data
    assert {(int(r), int(g), int(b)) for r, g, b in zip(v["red"], v["green"], v["blue"])} == {road}
    rgb = export_ply(m, tmp_path / "c.ply", color_mode="rgb")
    assert set(PlyData.read(str(rgb))["vertex"].data["red"].tolist()) == {10}


def test_ply_binary_matches_ascii(tmp_path, rng):
    polys = [poly3d(0, i, i % 5, rng.normal(size=(4, 3)) + [0, 0, 9]) for i in range(6)]
    m = accumulate(SemanticMap(), 0, polys)
    a = PlyData.read(str(export_ply(m, tmp_path / "a.ply")))
    b = PlyData.read(str(export_ply(m, tmp_path / "b.ply", binary=True)))
    for name in ("x", "y", "z", "red"):
        np.testing.assert_array_equal(a["vertex"].data[name], b["vertex"].data[name])
    fa = np.stack(a["face"].data["vertex_indices"])
    fb = np.stack(b["face"].data["vertex_indices"])
    np.testing.assert_array_equal(fa, fb)
    assert fa.max() < a["vertex"].count


def test_ply_is_byte_deterministic(tmp_path, rng):
    polys = [poly3d(0, i, 1, rng.normal(size=(4, 3))) for i in range(5)]
    m1 = accumulate(SemanticMap(), 0, polys)
    m2 = accumulate(SemanticMap(), 0, list(reversed(polys)))
    h = [hashlib.sha256(export_ply(m, tmp_path / f"{i}.ply").read_bytes()).hexdigest() for i, m in enumerate((m1, m2))]
    assert h[0] == h[1]


def test_ply_rejects_empty_and_bad_mode(tmp_path):
    with pytest.raises(RejectedInputError):
        export_ply(SemanticMap(), tmp_path / "e.ply")
    m = accumulate(SemanticMap(), 0, [poly3d(0, 0, 0)])
    with pytest.raises(RejectedInputError):
        export_ply(m, tmp_path / "e.ply", color_mode="depth")


def test_ear_clip_concave():
    l_shape = np.array([[0, 0], [2, 0], [2, 1], [1, 1], [1, 2], [0, 2]], float)
    tris = ear_clip(l_shape)
    assert len(tris) == 4
    area = 0.0
    for i, j, k in tris:
        a, b, c = l_shape[[i, j, k]]
        area += 0.5 * abs((b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]))
    assert area == pytest.approx(3.0)
