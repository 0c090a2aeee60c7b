"""Semantic-aware SNIC superpixels.

Region growing from grid seeds driven by one global priority queue. Every
pixel is popped and assigned exactly once; the distance to a cluster mixes
spatial distance, CIELAB distance and a constant penalty when the pixel's
semantic label differs from the label under the cluster's seed.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from heapq import heappop, heappush

import numpy as np

from .errors import RejectedInputError

DEFAULT_COLOR_NORM = 100.0
DEFAULT_SEMANTIC_PENALTY = 10.0


@dataclass(frozen=True)
class SnicParams:
    """``spatial_norm=None`` resolves to the grid-cell area ``w*h/k``."""

    k_superpixels: int
    spatial_norm: float | None = None
    color_norm: float = DEFAULT_COLOR_NORM
    semantic_penalty: float = DEFAULT_SEMANTIC_PENALTY

    def __post_init__(self):
        if int(self.k_superpixels) != self.k_superpixels or self.k_superpixels < 1:
            raise RejectedInputError("k_superpixels must be a positive integer")
        if self.spatial_norm is not None and not self.spatial_norm > 0:
            raise RejectedInputError("spatial_norm must be > 0")
        if not self.color_norm > 0:
            raise RejectedInputError("color_norm must be > 0")
        if not self.semantic_penalty >= 0:
            raise RejectedInputError("semantic_penalty must be >= 0")

    def resolved_spatial_norm(self, width: int, height: int) -> float:
        if self.spatial_norm is not None:
            return float(self.spatial_norm)
        return width * height / self.k_superpixels


@dataclass(frozen=True)
class ClusterCentroid:
    spatial: tuple[float, float]  # (u, v)
    color: tuple[float, float, float]
    seed_label: int
    pixel_count: int


@dataclass(frozen=True)
class SuperpixelPartition:
    assignment: np.ndarray  # (H, W) int32 superpixel ids
    centroids: list[ClusterCentroid]
    k_actual: int
    # number of heap pops that assigned a pixel; equals H*W on success
    assignments_made: int = 0

    @property
    def shape(self) -> tuple[int, int]:
        return self.assignment.shape

    def pixels_of(self, sp_id: int) -> np.ndarray:
        """``(n, 2)`` array of (u, v) for one superpixel, row-major order."""
        v, u = np.nonzero(self.assignment == sp_id)
        return np.stack([u, v], axis=1)


def _grid_shape(width: int, height: int, k: int) -> tuple[int, int]:
    best = None
    for nx in range(1, min(width, k) + 1):
        for ny in {max(1, min(height, k // nx)), max(1, min(height, -(-k // nx)))}:
            count = nx * ny
            out_of_band = not (0.75 * k <= count <= 1.3 * k)
            aspect = abs(math.log((width / nx) / (height / ny)))
            key = (out_of_band, abs(count - k) if out_of_band else 0, round(aspect, 12), abs(count - k), nx)
            if best is None or key < best[0]:
                best = (key, nx, ny)
    return best[1], best[2]


def init_seeds(width: int, height: int, k: int) -> list[tuple[int, int]]:
    """Seed positions ``(u, v)`` at the centres of a regular grid.

    The grid has roughly ``k`` cells of near-square shape; the returned
    count can differ from ``k`` by grid rounding.
    """
    if width < 1 or height < 1:
        raise RejectedInputError("image must be at least 1x1")
    if k < 1 or k > width * height:
        raise RejectedInputError(f"cannot place {k} seeds in a {width}x{height} image")
    nx, ny = _grid_shape(width, height, k)
    us = [int((i + 0.5) * width / nx) for i in range(nx)]
    vs = [int((j + 0.5) * height / ny) for j in range(ny)]
    return [(u, v) for v in vs for u in us]


def snic_distance(pixel_uv, pixel_lab, pixel_label, centroid: ClusterCentroid, params: SnicParams,
                  spatial_norm: float | None = None) -> float:
    """Distance between a candidate pixel and a cluster centroid.

    ``spatial_norm`` overrides ``params.spatial_norm`` (needed when the latter
    is left to resolve from the image size).
    """
    s = spatial_norm if spatial_norm is not None else params.spatial_norm
    if s is None:
        raise RejectedInputError("spatial_norm must be resolved before computing distances")
    du = pixel_uv[0] - centroid.spatial[0]
    dv = pixel_uv[1] - centroid.spatial[1]
    dl = pixel_lab[0] - centroid.color[0]
    da = pixel_lab[1] - centroid.color[1]
    db = pixel_lab[2] - centroid.color[2]
    h = 0.0 if pixel_label == centroid.seed_label else params.semantic_penalty
    return math.sqrt((du * du + dv * dv) / s + (dl * dl + da * da + db * db) / params.color_norm + h)


def run_snic(image_lab: np.ndarray, labels: np.ndarray | None, params: SnicParams) -> SuperpixelPartition:
    """Partition an image into 4-connected superpixels.

    ``labels=None`` gives plain (colour + space) SNIC. Queue entries are
    ordered by ``(distance, row-major pixel index, cluster id)``.
    """
    lab = np.asarray(image_lab, dtype=np.float64)
    if lab.ndim != 3 or lab.shape[2] != 3:
        raise RejectedInputError(f"expected an (H, W, 3) CIELAB image, got {lab.shape}")
    height, width = lab.shape[:2]
    if labels is not None:
        labels = np.asarray(labels)
        if labels.shape != (height, width):
            raise RejectedInputError(f"label grid {labels.shape} does not match image {(height, width)}")
        lbl = labels.ravel().tolist()
        penalty = float(params.semantic_penalty)
    else:
        lbl = [0] * (width * height)
        penalty = 0.0

    seeds = init_seeds(width, height, params.k_superpixels)
    s = params.resolved_spatial_norm(width, height)
    m = float(params.color_norm)
    L, A, B = (lab[:, :, c].ravel().tolist() for c in range(3))
    n = width * height
    nk = len(seeds)

    assign = [-1] * n
    su = [0.0] * nk
    sv = [0.0] * nk
    sl = [0.0] * nk
    sa = [0.0] * nk
    sb = [0.0] * nk
    cnt = [0] * nk
    seed_label = [lbl[v * width + u] for u, v in seeds]

    heap = [(0.0, v * width + u, k) for k, (u, v) in enumerate(seeds)]
    heap.sort()
    sqrt = math.sqrt
    popped = 0
    while heap:
        _, i, k = heappop(heap)
        if assign[i] >= 0:
            continue
        assign[i] = k
        popped += 1
        y, x = divmod(i, width)
        c = cnt[k] + 1
        cnt[k] = c
        su[k] += x
        sv[k] += y
        sl[k] += L[i]
        sa[k] += A[i]
        sb[k] += B[i]
        mu = su[k] / c
        mv = sv[k] / c
        ml = sl[k] / c
        ma = sa[k] / c
        mb = sb[k] / c
        klabel = seed_label[k]
        for xx, yy, j in (
            (x - 1, y, i - 1),
            (x, y - 1, i - width),
            (x + 1, y, i + 1),
            (x, y + 1, i + width),
        ):
            if xx < 0 or xx >= width or yy < 0 or yy >= height or assign[j] >= 0:
                continue
            du = xx - mu
            dv = yy - mv
            dl = L[j] - ml
            da = A[j] - ma
            db = B[j] - mb
            h = 0.0 if lbl[j] == klabel else penalty
            d = sqrt((du * du + dv * dv) / s + (dl * dl + da * da + db * db) / m + h)
            heappush(heap, (d, j, k))

    grid = np.array(assign, dtype=np.int32).reshape(height, width)
    # every seed claims its own pixel first (all seed entries sit at distance 0),
    # so ids are already dense; the remap guards the invariant regardless
    used = sorted(k for k in range(nk) if cnt[k] > 0)
    if len(used) != nk:
        remap = np.full(nk, -1, np.int32)
        remap[used] = np.arange(len(used), dtype=np.int32)
        grid = remap[grid]
    centroids = [
        ClusterCentroid(
            spatial=(su[k] / cnt[k], sv[k] / cnt[k]),
            color=(sl[k] / cnt[k], sa[k] / cnt[k], sb[k] / cnt[k]),
            seed_label=int(seed_label[k]) if labels is not None else -1,
            pixel_count=cnt[k],
        )
        for k in used
    ]
    return SuperpixelPartition(grid, centroids, len(used), popped)


def run_plain_snic(image_lab: np.ndarray, params: SnicParams) -> SuperpixelPartition:
    """Colour-and-space SNIC without the semantic term."""
    return run_snic(image_lab, None, params)


def recompute_centroids(partition: SuperpixelPartition, image_lab: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Per-superpixel (count, mean (u, v), mean Lab) computed from scratch."""
    grid = partition.assignment
    h, w = grid.shape
    ids = grid.ravel()
    k = partition.k_actual
    counts = np.bincount(ids, minlength=k).astype(np.float64)
    vv, uu = np.mgrid[0:h, 0:w]
    spatial = np.stack(
        [np.bincount(ids, uu.ravel(), k) / counts, np.bincount(ids, vv.ravel(), k) / counts], axis=1
    )
    lab = np.asarray(image_lab, dtype=np.float64).reshape(-1, 3)
    color = np.stack([np.bincount(ids, lab[:, c], k) / counts for c in range(3)], axis=1)
    return counts, spatial, color
