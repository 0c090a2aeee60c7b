"""Superpixel regions to polygons and back.

Contours follow pixel edges ("crack following"). Vertices sit on the
pixel-corner lattice: the cell of pixel ``(u, v)`` spans
``[u - 0.5, u + 0.5] x [v - 0.5, v + 0.5]``, so a lossless polygon
rasterizes back to exactly the original pixels when pixel centres are
tested for containment.

Contours and polygons are ordered with positive shoelace area in (u, v)
coordinates, i.e. counter-clockwise in the u-v plane (which appears
clockwise on screen because v points down). Where a region touches itself
diagonally the contour passes through that corner twice.

A region that encloses other superpixels gets one extra ring per hole. The
polygon joins each hole to the outer ring with a zero-width slit running
straight up from the hole's top-left vertex, so a polygon is always a single
ring and even-odd rasterization still reproduces the pixel set.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateRegionError, NotFoundError, RejectedInputError
from .snic import SuperpixelPartition

@dataclass(frozen=True)
class BoundaryContour:
    points: np.ndarray  # (n, 2) float, pixel coordinates of lattice corners
    holes: tuple[np.ndarray, ...] = ()  # clockwise rings, one per enclosed hole

    def __len__(self):
        return len(self.points)


@dataclass(frozen=True)
class Polygon2D:
    vertices: np.ndarray  # (n, 2) float
    superpixel_id: int = -1

    def __len__(self):
        return len(self.vertices)


def region_edges(mask: np.ndarray) -> dict[tuple[int, int], list[tuple[int, int]]]:
    """Directed boundary edges of a pixel mask on the integer corner lattice.

    Lattice corner ``(i, j)`` is the pixel-coordinate point
    ``(i - 0.5, j - 0.5)``. Edges keep the region on their left in the
    u-v plane.
    """
    h, w = mask.shape
    padded = np.zeros((h + 2, w + 2), bool)
    padded[1:-1, 1:-1] = mask
    inner = padded[1:-1, 1:-1]
    out: dict[tuple[int, int], list[tuple[int, int]]] = {}

    def add(vs, us, du0, dv0, du1, dv1):
        for v, u in zip(vs.tolist(), us.tolist()):
            out.setdefault((u + du0, v + dv0), []).append((u + du1, v + dv1))

    vs, us = np.nonzero(inner & ~padded[:-2, 1:-1])
    add(vs, us, 0, 0, 1, 0)  # top
    vs, us = np.nonzero(inner & ~padded[1:-1, 2:])
    add(vs, us, 1, 0, 1, 1)  # right
    vs, us = np.nonzero(inner & ~padded[2:, 1:-1])
    add(vs, us, 1, 1, 0, 1)  # bottom
    vs, us = np.nonzero(inner & ~padded[1:-1, :-2])
    add(vs, us, 0, 1, 0, 0)  # left
    return out


def _walk(edges, start, direction) -> list[tuple[int, int]]:
    """Follow unused edges from ``start`` until the ring closes, consuming them."""
    cur = start
    points = []
    while True:
        points.append(cur)
        outs = edges[cur]
        if len(outs) == 1:
            nxt = outs.pop()
        else:
            # diagonal self-contact: turn towards the region (left) to hug the current cell
            du, dv = direction
            for d in ((-dv, du), (du, dv), (dv, -du)):
                cand = (cur[0] + d[0], cur[1] + d[1])
                if cand in outs:
                    outs.remove(cand)
                    nxt = cand
                    break
            else:  # pragma: no cover - lattice edges always turn by multiples of 90 degrees
                raise DegenerateRegionError("broken contour")
        if not outs:
            del edges[cur]
        direction = (nxt[0] - cur[0], nxt[1] - cur[1])
        cur = nxt
        if cur == start:
            return points


def _trace_rings(mask: np.ndarray) -> list[list[tuple[int, int]]]:
    """Outer ring first, then one ring per hole."""
    if not mask.any():
        raise NotFoundError("region is empty")
    edges = region_edges(mask)
    vs, us = np.nonzero(mask)
    # first pixel in row-major order: its top-left corner has a single outgoing
    # edge (the top edge) and lies on the outer boundary
    rings = [_walk(edges, (int(us[0]), int(vs[0])), (0, -1))]
    while edges:
        # top-left corner of a hole, reached along the hole's top side (leftwards)
        start = min(edges, key=lambda q: (q[1], q[0]))
        rings.append(_walk(edges, start, (-1, 0)))
    return rings


def trace_mask(mask: np.ndarray) -> BoundaryContour:
    """Boundary of a 4-connected pixel mask: outer contour plus hole contours."""
    rings = [np.asarray(r, dtype=np.float64) - 0.5 for r in _trace_rings(np.asarray(mask, bool))]
    return BoundaryContour(rings[0], tuple(rings[1:]))


def trace_boundary(partition: SuperpixelPartition, sp_id: int) -> BoundaryContour:
    if not 0 <= sp_id < partition.k_actual:
        raise NotFoundError(f"superpixel {sp_id} does not exist")
    mask = partition.assignment == sp_id
    if not mask.any():
        raise NotFoundError(f"superpixel {sp_id} is empty")
    return trace_mask(mask)


def _cross(o, a, b) -> float:
    return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])


def remove_collinear(points: np.ndarray) -> np.ndarray:
    """Drop vertices lying on the straight segment between their neighbours."""
    pts = [tuple(p) for p in np.asarray(points, dtype=np.float64)]
    changed = True
    while changed and len(pts) >= 3:
        changed = False
        keep = []
        n = len(pts)
        for i in range(n):
            prev = keep[-1] if keep else pts[i - 1]
            nxt = pts[(i + 1) % n]
            p = pts[i]
            if _cross(prev, p, nxt) == 0 and (
                (p[0] - prev[0]) * (nxt[0] - p[0]) + (p[1] - prev[1]) * (nxt[1] - p[1]) > 0
            ):
                changed = True
                continue
            keep.append(p)
        pts = keep
    return np.asarray(pts, dtype=np.float64).reshape(-1, 2)


def point_segment_distance(p, a, b) -> float:
    p, a, b = (np.asarray(x, dtype=np.float64) for x in (p, a, b))
    ab = b - a
    denom = float(ab @ ab)
    if denom == 0.0:
        return float(np.linalg.norm(p - a))
    t = min(1.0, max(0.0, float((p - a) @ ab) / denom))
    return float(np.linalg.norm(p - (a + t * ab)))


def _rdp(points: np.ndarray, epsilon: float) -> np.ndarray:
    """Open-chain Ramer-Douglas-Peucker; keeps both endpoints."""
    keep = np.zeros(len(points), bool)
    keep[0] = keep[-1] = True
    stack = [(0, len(points) - 1)]
    while stack:
        first, last = stack.pop()
        if last - first < 2:
            continue
        a, b = points[first], points[last]
        seg = points[first + 1 : last]
        ab = b - a
        denom = float(ab @ ab)
        if denom == 0.0:
            dist = np.linalg.norm(seg - a, axis=1)
        else:
            t = np.clip((seg - a) @ ab / denom, 0.0, 1.0)
            dist = np.linalg.norm(seg - (a + t[:, None] * ab), axis=1)
        idx = int(np.argmax(dist))
        if dist[idx] > epsilon:
            mid = first + 1 + idx
            keep[mid] = True
            stack.append((first, mid))
            stack.append((mid, last))
    return points[keep]


def _segments_cross(p1, p2, q1, q2) -> bool:
    """True when the segments cross or overlap anywhere except a shared endpoint."""
    d1 = _cross(q1, q2, p1)
    d2 = _cross(q1, q2, p2)
    d3 = _cross(p1, p2, q1)
    d4 = _cross(p1, p2, q2)
    if ((d1 > 0 > d2) or (d1 < 0 < d2)) and ((d3 > 0 > d4) or (d3 < 0 < d4)):
        return True

    def on_segment(a, b, c):  # c strictly inside segment ab, collinear
        return (
            _cross(a, b, c) == 0
            and min(a[0], b[0]) <= c[0] <= max(a[0], b[0])
            and min(a[1], b[1]) <= c[1] <= max(a[1], b[1])
            and c != a
            and c != b
        )

    return on_segment(p1, p2, q1) or on_segment(p1, p2, q2) or on_segment(q1, q2, p1) or on_segment(q1, q2, p2)


def is_simple(vertices: np.ndarray) -> bool:
    """No edge crosses or overlaps another; touching at a shared vertex is allowed."""
    pts = [tuple(p) for p in np.asarray(vertices, dtype=np.float64)]
    n = len(pts)
    if n < 3:
        return False
    for i in range(n):
        a1, a2 = pts[i], pts[(i + 1) % n]
        for j in range(i + 1, n):
            if j == i or (j + 1) % n == i or j == (i + 1) % n:
                continue
            if _segments_cross(a1, a2, pts[j], pts[(j + 1) % n]):
                return False
    return True


def signed_area(vertices: np.ndarray) -> float:
    v = np.asarray(vertices, dtype=np.float64)
    x, y = v[:, 0], v[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y))


def simplify_closed(points: np.ndarray, epsilon: float) -> np.ndarray:
    """RDP on a closed ring, split at the first point and the point farthest from it."""
    pts = np.asarray(points, dtype=np.float64)
    far = int(np.argmax(np.linalg.norm(pts - pts[0], axis=1)))
    if far == 0:
        return pts[:1]
    first = _rdp(pts[: far + 1], epsilon)
    second = _rdp(np.vstack([pts[far:], pts[:1]]), epsilon)
    return np.vstack([first[:-1], second[:-1]])


def _rings_valid(rings: list[np.ndarray]) -> bool:
    if any(len(r) < 3 or not is_simple(r) for r in rings):
        return False
    if signed_area(rings[0]) <= 0 or any(signed_area(r) >= 0 for r in rings[1:]):
        return False
    for i in range(len(rings)):
        for j in range(i + 1, len(rings)):
            a, b = rings[i], rings[j]
            for p in range(len(a)):
                p1, p2 = tuple(a[p]), tuple(a[(p + 1) % len(a)])
                for q in range(len(b)):
                    q1, q2 = tuple(b[q]), tuple(b[(q + 1) % len(b)])
                    if _segments_cross(p1, p2, q1, q2) or p1 == q1:
                        return False
    return True


def bridge_holes(outer: np.ndarray, holes) -> np.ndarray:
    """Single ring: each hole spliced in through a vertical slit from its top-left vertex."""
    ring = [tuple(p) for p in np.asarray(outer, dtype=np.float64)]
    order = sorted(holes, key=lambda r: min((p[1], p[0]) for p in r.tolist()))
    for hole in order:
        pts = [tuple(p) for p in np.asarray(hole, dtype=np.float64)]
        k = min(range(len(pts)), key=lambda i: (pts[i][1], pts[i][0]))
        h = pts[k]
        # nearest edge straight above h; it runs rightwards (region below it)
        best = None
        n = len(ring)
        for i in range(n):
            a, b = ring[i], ring[(i + 1) % n]
            if a[0] <= h[0] < b[0]:
                v = a[1] + (h[0] - a[0]) * (b[1] - a[1]) / (b[0] - a[0])
                if v < h[1] and (best is None or v > best[0]):
                    best = (v, i)
        if best is None:
            raise DegenerateRegionError("hole is not enclosed by the outer contour")
        v, i = best
        top = (h[0], v)
        loop = pts[k:] + pts[:k] + [h]
        splice = ([] if top == ring[i] else [top]) + loop + [top]
        ring = ring[: i + 1] + splice + ring[i + 1 :]
    return np.asarray(ring, dtype=np.float64)


def contour_to_polygon(contour: BoundaryContour, epsilon: float = 0.0, superpixel_id: int = -1) -> Polygon2D:
    """Polygon from a traced contour.

    ``epsilon == 0`` only removes collinear points, which loses nothing.
    ``epsilon > 0`` applies Ramer-Douglas-Peucker to every ring; if any ring
    self-intersects or rings cross, the tolerance is halved until they do not
    (falling back to the lossless polygon).
    """
    if epsilon < 0:
        raise RejectedInputError("epsilon must be >= 0")
    pts = np.asarray(contour.points, dtype=np.float64)
    if len({tuple(p) for p in pts}) < 3:
        raise DegenerateRegionError("contour has fewer than three distinct points")
    lossless = remove_collinear(pts)
    if len(lossless) < 3 or signed_area(lossless) == 0:
        raise DegenerateRegionError("contour encloses no area")
    holes = [remove_collinear(h) for h in contour.holes]
    eps = float(epsilon)
    while eps > 1e-3:
        rings = [remove_collinear(simplify_closed(r, eps)) for r in (pts, *contour.holes)]
        if _rings_valid(rings):
            return Polygon2D(bridge_holes(rings[0], rings[1:]), superpixel_id)
        eps /= 2.0
    return Polygon2D(bridge_holes(lossless, holes), superpixel_id)


def rasterize_polygon(poly: Polygon2D | np.ndarray, width: int, height: int) -> np.ndarray:
    """Boolean ``(height, width)`` mask of pixels whose centres are inside (even-odd rule)."""
    verts = poly.vertices if isinstance(poly, Polygon2D) else np.asarray(poly, dtype=np.float64)
    x0, y0 = verts[:, 0], verts[:, 1]
    x1, y1 = np.roll(x0, -1), np.roll(y0, -1)
    inside = np.zeros((height, width), bool)
    us = np.arange(width, dtype=np.float64)
    for v in range(height):
        yc = float(v)
        hit = ((y0 <= yc) & (y1 > yc)) | ((y1 <= yc) & (y0 > yc))
        if not hit.any():
            continue
        xa, ya, xb, yb = x0[hit], y0[hit], x1[hit], y1[hit]
        xs = xa + (yc - ya) * (xb - xa) / (yb - ya)
        # parity of crossings to the right of each pixel centre
        inside[v] = (np.count_nonzero(xs[None, :] > us[:, None], axis=1) % 2) == 1
    return inside


def boundary_pixel_count(mask: np.ndarray) -> int:
    """Pixels of the region with an 8-neighbour outside it (image border counts as outside)."""
    m = np.asarray(mask, bool)
    padded = np.pad(m, 1, constant_values=False)
    h, w = m.shape
    interior = np.ones_like(m)
    for dv in (-1, 0, 1):
        for du in (-1, 0, 1):
            interior &= padded[1 + dv : 1 + dv + h, 1 + du : 1 + du + w]
    return int(np.count_nonzero(m & ~interior))


def polygonize_partition(partition: SuperpixelPartition, epsilon: float = 0.0) -> tuple[list[Polygon2D], dict[int, Exception]]:
    """Polygon per superpixel; regions that fail (holes) are returned as errors."""
    polys, failures = [], {}
    for sp in range(partition.k_actual):
        try:
            polys.append(contour_to_polygon(trace_boundary(partition, sp), epsilon, sp))
        except (DegenerateRegionError, NotFoundError) as exc:
            failures[sp] = exc
    return polys, failures
