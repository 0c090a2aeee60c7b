"""World-frame polygon map: lifting, accumulation and PLY export."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .core import CameraIntrinsics, CameraPose, back_project, transform_to_world
from .errors import DegenerateGeometryError, RejectedInputError
from .labels import SKY, load_palette, palette_colors
from .polygonize import Polygon2D, signed_area
from .refine import GroundPlane, PlaneParams
from .snic import SuperpixelPartition

log = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class MapPolygon3D:
    vertices: np.ndarray  # (n, 3) world frame
    semantic_label: int
    rgb: tuple[int, int, int]
    frame_id: int
    superpixel_id: int
    # source polygon in image coordinates, used for triangulation
    image_vertices: np.ndarray | None = None
    # valid-depth pixels this polygon stands in for
    dense_points: int = 0

    @property
    def key(self) -> tuple[int, int]:
        return self.frame_id, self.superpixel_id


@dataclass(frozen=True)
class MemoryStats:
    stored_vertices: int = 0
    equivalent_dense_points: int = 0

    @property
    def compression_ratio(self) -> float:
        if self.equivalent_dense_points == 0:
            return float("nan")
        return self.stored_vertices / self.equivalent_dense_points

    def __add__(self, other: "MemoryStats") -> "MemoryStats":
        return MemoryStats(
            self.stored_vertices + other.stored_vertices,
            self.equivalent_dense_points + other.equivalent_dense_points,
        )

    def report(self) -> str:
        return (
            f"stored_vertices={self.stored_vertices}\n"
            f"equivalent_dense_points={self.equivalent_dense_points}\n"
            f"compression_ratio={self.compression_ratio:.6f}\n"
        )


@dataclass(frozen=True)
class SemanticMap:
    polygons: tuple[MapPolygon3D, ...] = ()
    frame_ids: frozenset[int] = field(default_factory=frozenset)
    stats: MemoryStats = MemoryStats()
    sky_class: int = SKY

    @property
    def frame_count(self) -> int:
        return len(self.frame_ids)

    def sorted_polygons(self) -> list[MapPolygon3D]:
        return sorted(self.polygons, key=lambda p: p.key)


def lift_polygon(
    poly: Polygon2D,
    plane: PlaneParams,
    k: CameraIntrinsics,
    pose: CameraPose,
    *,
    semantic_label: int = -1,
    rgb=(0, 0, 0),
    frame_id: int = 0,
    ground: GroundPlane | None = None,
    dense_points: int = 0,
) -> MapPolygon3D:
    """Lift image-space polygon vertices into the world frame.

    Vertex depth comes from the superpixel's depth plane, or from the ray
    intersection with ``ground`` when one is given (road polygons).
    """
    verts = np.asarray(poly.vertices, dtype=np.float64)
    u, v = verts[:, 0], verts[:, 1]
    if ground is not None:
        z = ground.ray_depth(u, v, k)
        if np.any(np.isnan(z)):
            raise DegenerateGeometryError(f"superpixel {poly.superpixel_id}: vertex ray misses the ground plane")
    else:
        if not plane.valid:
            raise DegenerateGeometryError(f"superpixel {poly.superpixel_id}: invalid plane")
        z = plane.depth_at(u, v)
        if not np.all(np.isfinite(z)) or np.any(z <= 0):
            raise DegenerateGeometryError(f"superpixel {poly.superpixel_id}: non-positive plane depth at a vertex")
    world = transform_to_world(back_project(u, v, z, k), pose)
    return MapPolygon3D(
        vertices=world,
        semantic_label=int(semantic_label),
        rgb=tuple(int(c) for c in rgb),
        frame_id=int(frame_id),
        superpixel_id=int(poly.superpixel_id),
        image_vertices=verts,
        dense_points=int(dense_points),
    )


def assign_label(partition: SuperpixelPartition, sp_id: int, labels) -> int:
    """Majority label over the superpixel; ties go to the smaller class id."""
    members = np.asarray(labels)[partition.assignment == sp_id].astype(np.int64)
    if members.size == 0:
        raise RejectedInputError(f"superpixel {sp_id} is empty")
    return int(np.argmax(np.bincount(members)))


def superpixel_labels(partition: SuperpixelPartition, labels) -> np.ndarray:
    """:func:`assign_label` for every superpixel at once."""
    ids = partition.assignment.ravel().astype(np.int64)
    lab = np.asarray(labels).ravel().astype(np.int64)
    nl = int(lab.max()) + 1
    counts = np.bincount(ids * nl + lab, minlength=partition.k_actual * nl).reshape(partition.k_actual, nl)
    return np.argmax(counts, axis=1)


def accumulate(smap: SemanticMap, frame_id: int, frame_polygons) -> SemanticMap:
    """Append one frame's polygons, dropping sky-labelled ones."""
    if frame_id in smap.frame_ids:
        raise RejectedInputError(f"frame {frame_id} is already in the map")
    kept = []
    for p in frame_polygons:
        if p.frame_id != frame_id:
            raise RejectedInputError(f"polygon from frame {p.frame_id} passed with frame {frame_id}")
        if p.semantic_label == smap.sky_class:
            continue
        kept.append(p)
    added = MemoryStats(sum(len(p.vertices) for p in kept), sum(p.dense_points for p in kept))
    return replace(
        smap,
        polygons=smap.polygons + tuple(kept),
        frame_ids=smap.frame_ids | {frame_id},
        stats=smap.stats + added,
    )


def _is_convex(pts: np.ndarray) -> bool:
    d = np.roll(pts, -1, axis=0) - pts
    cross = d[:, 0] * np.roll(d[:, 1], -1) - d[:, 1] * np.roll(d[:, 0], -1)
    return bool(np.all(cross >= 0) or np.all(cross <= 0)) and len({tuple(p) for p in pts}) == len(pts)


def _plane_coords(vertices3d: np.ndarray) -> np.ndarray:
    # Newell normal, then an orthonormal basis of the polygon's plane
    v = vertices3d
    nxt = np.roll(v, -1, axis=0)
    normal = np.array(
        [
            np.sum((v[:, 1] - nxt[:, 1]) * (v[:, 2] + nxt[:, 2])),
            np.sum((v[:, 2] - nxt[:, 2]) * (v[:, 0] + nxt[:, 0])),
            np.sum((v[:, 0] - nxt[:, 0]) * (v[:, 1] + nxt[:, 1])),
        ]
    )
    normal /= np.linalg.norm(normal) or 1.0
    ref = np.array([1.0, 0.0, 0.0]) if abs(normal[0]) < 0.9 else np.array([0.0, 1.0, 0.0])
    e1 = np.cross(normal, ref)
    e1 /= np.linalg.norm(e1)
    e2 = np.cross(normal, e1)
    return np.stack([v @ e1, v @ e2], axis=1)


def _point_in_triangle(p, a, b, c) -> bool:
    def cr(o, x, y):
        return (x[0] - o[0]) * (y[1] - o[1]) - (x[1] - o[1]) * (y[0] - o[0])

    d1, d2, d3 = cr(a, b, p), cr(b, c, p), cr(c, a, p)
    return (d1 >= 0 and d2 >= 0 and d3 >= 0) or (d1 <= 0 and d2 <= 0 and d3 <= 0)


def ear_clip(pts2d: np.ndarray) -> list[tuple[int, int, int]]:
    """Triangulate a simple polygon given in 2D; returns index triples."""
    pts = [tuple(p) for p in np.asarray(pts2d, dtype=np.float64)]
    orient = 1.0 if signed_area(np.asarray(pts)) >= 0 else -1.0
    idx = list(range(len(pts)))
    tris = []
    guard = 0
    while len(idx) > 3 and guard < len(pts) ** 2:
        guard += 1
        n = len(idx)
        for j in range(n):
            i0, i1, i2 = idx[j - 1], idx[j], idx[(j + 1) % n]
            a, b, c = pts[i0], pts[i1], pts[i2]
            area = orient * ((b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]))
            if area <= 0:
                continue
            blocked = any(
                _point_in_triangle(pts[m], a, b, c)
                for m in idx
                if m not in (i0, i1, i2) and pts[m] not in (a, b, c)
            )
            if not blocked:
                tris.append((i0, i1, i2))
                del idx[j]
                break
        else:
            break
    if len(idx) == 3:
        tris.append(tuple(idx))
    elif len(idx) > 3:
        # degenerate remainder: fan it so the face count stays n - 2
        tris.extend((idx[0], idx[t], idx[t + 1]) for t in range(1, len(idx) - 1))
    return tris


def triangulate(poly: MapPolygon3D) -> list[tuple[int, int, int]]:
    """Fan from the first vertex when convex, ear clipping otherwise."""
    n = len(poly.vertices)
    pts2d = poly.image_vertices if poly.image_vertices is not None else _plane_coords(poly.vertices)
    if _is_convex(np.asarray(pts2d)):
        return [(0, t, t + 1) for t in range(1, n - 1)]
    return ear_clip(pts2d)


def export_ply(smap: SemanticMap, path, color_mode: str = "semantic", palette=None, binary: bool = False) -> Path:
    """Write the map as a triangle mesh with per-vertex colours.

    ``color_mode`` is ``"semantic"`` (palette colour of the polygon label)
    or ``"rgb"`` (mean image colour of the source superpixel).
    """
    if not smap.polygons:
        raise RejectedInputError("cannot export an empty map")
    if color_mode not in ("semantic", "rgb"):
        raise RejectedInputError(f"unknown color mode {color_mode!r}")
    colors = palette_colors(palette if palette is not None else load_palette())
    polys = smap.sorted_polygons()
    verts, cols, faces = [], [], []
    base = 0
    for p in polys:
        if color_mode == "semantic":
            rgb = colors.get(p.semantic_label, (0, 0, 0))
        else:
            rgb = p.rgb
        verts.append(p.vertices)
        cols.extend([rgb] * len(p.vertices))
        faces.extend((base + a, base + b, base + c) for a, b, c in triangulate(p))
        base += len(p.vertices)
    xyz = np.vstack(verts).astype("<f4")
    rgb = np.asarray(cols, dtype=np.uint8)
    header = (
        "ply\n"
        f"format {'binary_little_endian' if binary else 'ascii'} 1.0\n"
        "comment polymap semantic polygon map\n"
        f"element vertex {len(xyz)}\n"
        "property float x\nproperty float y\nproperty float z\n"
        "property uchar red\nproperty uchar green\nproperty uchar blue\n"
        f"element face {len(faces)}\n"
        "property list uchar int vertex_indices\n"
        "end_header\n"
    )
    path = Path(path)
    try:
        with open(path, "wb") as fh:
            fh.write(header.encode("ascii"))
            if binary:
                vrec = np.empty(len(xyz), dtype=[("p", "<f4", 3), ("c", "u1", 3)])
                vrec["p"], vrec["c"] = xyz, rgb
                fh.write(vrec.tobytes())
                frec = np.empty(len(faces), dtype=[("n", "u1"), ("i", "<i4", 3)])
                frec["n"], frec["i"] = 3, np.asarray(faces, dtype=np.int32).reshape(-1, 3)
                fh.write(frec.tobytes())
            else:
                lines = [
                    f"{float(x)!r} {float(y)!r} {float(z)!r} {r} {g} {b}"
                    for (x, y, z), (r, g, b) in zip(xyz.tolist(), rgb.tolist())
                ]
                lines += [f"3 {a} {b} {c}" for a, b, c in faces]
                fh.write(("\n".join(lines) + "\n").encode("ascii"))
    except OSError as exc:
        raise OSError(f"failed to write PLY to {path}: {exc}") from exc
    return path
