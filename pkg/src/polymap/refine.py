"""Per-superpixel slanted-plane depth refinement and RANSAC road smoothing."""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .core import CameraIntrinsics, back_project
from .errors import NoDataError, RejectedInputError
from .snic import SuperpixelPartition

log = logging.getLogger(__name__)

# relative determinant threshold of the centred 2x2 normal matrix
_SINGULAR_TOL = 1e-10


@dataclass(frozen=True)
class PlaneParams:
    """``depth(u, v) = a*u + b*v + c`` over one superpixel."""

    a: float
    b: float
    c: float
    superpixel_id: int = -1
    valid: bool = True

    def depth_at(self, u, v):
        return self.a * np.asarray(u, dtype=np.float64) + self.b * np.asarray(v, dtype=np.float64) + self.c


@dataclass(frozen=True)
class RansacParams:
    rng_seed: int
    iterations: int = 200
    inlier_threshold: float = 0.15
    min_inliers: float = 0.5

    def __post_init__(self):
        if self.iterations < 1:
            raise RejectedInputError("iterations must be >= 1")
        if not self.inlier_threshold > 0:
            raise RejectedInputError("inlier_threshold must be > 0")
        if not 0 < self.min_inliers <= 1:
            raise RejectedInputError("min_inliers must lie in (0, 1]")


@dataclass(frozen=True)
class GroundPlane:
    """Camera-frame plane ``normal . p = offset`` with a unit normal and ``offset >= 0``."""

    normal: np.ndarray
    offset: float

    def ray_depth(self, u, v, k: CameraIntrinsics) -> np.ndarray:
        """Depth (z) where pixel rays meet the plane; NaN where they do not."""
        rx = (np.asarray(u, dtype=np.float64) - k.cx) / k.fx
        ry = (np.asarray(v, dtype=np.float64) - k.cy) / k.fy
        denom = self.normal[0] * rx + self.normal[1] * ry + self.normal[2]
        with np.errstate(divide="ignore", invalid="ignore"):
            z = self.offset / denom
        return np.where((denom > 0) & np.isfinite(z) & (z > 0), z, np.nan)


@dataclass(frozen=True)
class RansacResult:
    status: str  # "ok", "insufficient_points" or "no_consensus"
    plane: GroundPlane | None
    depth: np.ndarray
    inliers: np.ndarray | None = None  # boolean, aligned with the road points used
    num_points: int = 0


def fit_plane(pixels, superpixel_id: int = -1) -> PlaneParams:
    """Least-squares ``depth = a*u + b*v + c`` over ``(u, v, depth)`` rows.

    Solves the normal equations after centring u and v. Fewer than three
    points or collinear pixels fall back to the constant plane at the mean
    depth.
    """
    pts = np.asarray(pixels, dtype=np.float64).reshape(-1, 3)
    if len(pts) == 0:
        raise NoDataError("cannot fit a plane to zero pixels")
    u, v, d = pts[:, 0], pts[:, 1], pts[:, 2]
    mean_d = float(d.mean())
    if len(pts) < 3:
        return PlaneParams(0.0, 0.0, mean_d, superpixel_id)
    mu, mv = u.mean(), v.mean()
    du, dv, dd = u - mu, v - mv, d - mean_d
    suu, svv, suv = du @ du, dv @ dv, du @ dv
    sud, svd = du @ dd, dv @ dd
    det = suu * svv - suv * suv
    if det <= _SINGULAR_TOL * (suu + svv) ** 2:
        return PlaneParams(0.0, 0.0, mean_d, superpixel_id)
    a = (svv * sud - suv * svd) / det
    b = (suu * svd - suv * sud) / det
    c = mean_d - a * mu - b * mv
    return PlaneParams(float(a), float(b), float(c), superpixel_id)


def _group_indices(ids: np.ndarray, k: int) -> list[np.ndarray]:
    order = np.argsort(ids, kind="stable")
    bounds = np.searchsorted(ids[order], np.arange(k + 1))
    return [order[bounds[i] : bounds[i + 1]] for i in range(k)]


def apply_planes(partition: SuperpixelPartition, depth, mask=None) -> tuple[np.ndarray, np.ndarray, list[PlaneParams]]:
    """Replace depth inside every superpixel by its fitted plane.

    Returns ``(refined_depth, refined_mask, planes)``. Invalid pixels carry
    depth 0. Superpixels without valid depth get an invalid plane.
    """
    depth = np.asarray(depth, dtype=np.float64)
    grid = partition.assignment
    if depth.shape != grid.shape:
        raise RejectedInputError(f"depth grid {depth.shape} does not match partition {grid.shape}")
    mask = depth > 0 if mask is None else np.asarray(mask, bool) & (depth > 0)
    h, w = grid.shape
    ids = grid.ravel()
    uu = np.tile(np.arange(w, dtype=np.float64), h)
    vv = np.repeat(np.arange(h, dtype=np.float64), w)
    dflat, mflat = depth.ravel(), mask.ravel()
    refined = np.zeros(h * w)
    valid = np.zeros(h * w, bool)
    planes = []
    for sp, idx in enumerate(_group_indices(ids, partition.k_actual)):
        good = idx[mflat[idx]]
        if good.size == 0:
            planes.append(PlaneParams(0.0, 0.0, 0.0, sp, valid=False))
            continue
        plane = fit_plane(np.stack([uu[good], vv[good], dflat[good]], axis=1), sp)
        planes.append(plane)
        z = plane.depth_at(uu[idx], vv[idx])
        ok = np.isfinite(z) & (z > 0)
        refined[idx[ok]] = z[ok]
        valid[idx[ok]] = True
    return refined.reshape(h, w), valid.reshape(h, w), planes


def _plane_through(p0, p1, p2):
    n = np.cross(p1 - p0, p2 - p0)
    norm = np.linalg.norm(n)
    if norm < 1e-12:
        return None
    n = n / norm
    return n, float(n @ p0)


def _oriented(normal, offset) -> GroundPlane:
    if offset < 0:
        normal, offset = -normal, -offset
    return GroundPlane(np.asarray(normal, dtype=np.float64), float(offset))


def fit_plane_3d(points: np.ndarray) -> GroundPlane:
    """Orthogonal least-squares plane through 3D points."""
    centroid = points.mean(axis=0)
    _, _, vt = np.linalg.svd(points - centroid, full_matrices=False)
    normal = vt[-1]
    return _oriented(normal, float(normal @ centroid))


def ransac_plane(points: np.ndarray, params: RansacParams) -> tuple[GroundPlane | None, np.ndarray | None]:
    """3-point RANSAC followed by a least-squares refit on the consensus set."""
    pts = np.asarray(points, dtype=np.float64)
    n = len(pts)
    rng = np.random.default_rng(params.rng_seed)
    best_count, best = -1, None
    for _ in range(params.iterations):
        sample = pts[rng.choice(n, 3, replace=False)]
        hyp = _plane_through(*sample)
        if hyp is None:
            continue
        count = int(np.count_nonzero(np.abs(pts @ hyp[0] - hyp[1]) < params.inlier_threshold))
        if count > best_count:
            best_count, best = count, hyp
    if best is None or best_count < params.min_inliers * n or best_count < 3:
        return None, None
    inliers = np.abs(pts @ best[0] - best[1]) < params.inlier_threshold
    plane = fit_plane_3d(pts[inliers])
    inliers = np.abs(pts @ plane.normal - plane.offset) < params.inlier_threshold
    return plane, inliers


def ransac_ground(depth, labels, road_class: int, k: CameraIntrinsics, params: RansacParams, mask=None) -> RansacResult:
    """Fit one 3D plane to road pixels and re-render their depth from it.

    Only pixels labelled ``road_class`` with valid depth are used and
    changed; everything else is returned untouched. Failures are reported
    through ``status`` with the input depth returned as-is.
    """
    depth = np.asarray(depth, dtype=np.float64)
    labels = np.asarray(labels)
    valid = depth > 0 if mask is None else np.asarray(mask, bool) & (depth > 0)
    road = (labels == road_class) & valid
    vs, us = np.nonzero(road)
    if len(us) < 3:
        log.warning("ransac_ground: %d road pixels, need at least 3; skipped", len(us))
        return RansacResult("insufficient_points", None, depth.copy(), num_points=len(us))
    pts = back_project(us, vs, depth[vs, us], k)
    plane, inliers = ransac_plane(pts, params)
    if plane is None:
        log.warning("ransac_ground: no hypothesis reached %.0f%% inliers; skipped", 100 * params.min_inliers)
        return RansacResult("no_consensus", None, depth.copy(), num_points=len(us))
    out = depth.copy()
    z = plane.ray_depth(us, vs, k)
    out[vs, us] = np.where(np.isnan(z), 0.0, z)
    return RansacResult("ok", plane, out, inliers, len(us))
