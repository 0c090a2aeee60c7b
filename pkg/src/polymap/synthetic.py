"""Synthetic scenes with known geometry, for tests and demos."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import CameraIntrinsics, CameraPose
from .labels import ROAD, SKY
from .pipeline import FrameData

BUILDING, WALL = 2, 3


@dataclass(frozen=True)
class PlanarMosaic:
    """Rectangular tiles, each with its own colour, label and depth plane."""

    rgb: np.ndarray
    labels: np.ndarray
    depth: np.ndarray
    region: np.ndarray  # tile id per pixel
    planes: np.ndarray  # (n_tiles, 3) rows of (a, b, c)


def planar_mosaic(width: int, height: int, tiles: tuple[int, int], rng: np.random.Generator) -> PlanarMosaic:
    """Jittered tile boundaries; neighbouring tiles get distinct colours and labels."""
    nx, ny = tiles

    def splits(size, n):
        # evenly spaced cuts jittered by up to a quarter tile, so no tile is a sliver
        step = size / n
        base = step * np.arange(1, n)
        return np.rint(base + rng.uniform(-0.25, 0.25, n - 1) * step).astype(int)

    xs, ys = splits(width, nx), splits(height, ny)
    col = np.searchsorted(xs, np.arange(width), side="right")
    row = np.searchsorted(ys, np.arange(height), side="right")
    region = row[:, None] * nx + col[None, :]
    n = nx * ny
    # checkerboard-style label/colour assignment keeps 4-neighbouring tiles distinct
    labels_of = np.array([((i // nx) + (i % nx)) % 2 * 6 + (i % 3) for i in range(n)]) % 19
    labels_of[labels_of == SKY] = 9
    colors = rng.integers(30, 226, (n, 3))
    for i in range(n):
        r, c = divmod(i, nx)
        if c and np.abs(colors[i] - colors[i - 1]).sum() < 120:
            colors[i] = 255 - colors[i - 1]
        if r and np.abs(colors[i] - colors[i - nx]).sum() < 120:
            colors[i] = (colors[i] + 128) % 256
    planes = np.stack(
        [rng.uniform(-0.02, 0.02, n), rng.uniform(-0.02, 0.02, n), rng.uniform(6.0, 20.0, n)], axis=1
    )
    vv, uu = np.mgrid[0:height, 0:width]
    p = planes[region]
    depth = p[..., 0] * uu + p[..., 1] * vv + p[..., 2]
    return PlanarMosaic(colors[region].astype(np.uint8), labels_of[region], depth, region, planes)


@dataclass(frozen=True)
class Corridor:
    """Ground plane plus two side walls, seen by a camera moving along +z.

    World frame equals the first camera frame: x right, y down, z forward.
    Everything that is not ground or wall is sky (depth 0).
    """

    intrinsics: CameraIntrinsics = CameraIntrinsics(100.0, 100.0, 79.5, 59.5)
    width: int = 160
    height: int = 120
    ground_y: float = 1.5
    wall_x: float = 3.0
    wall_top: float = -2.5
    wall_end: float = 9.0
    ground_end: float = 12.0
    tile: float = 1.0

    def surface_distance(self, points: np.ndarray, labels: np.ndarray) -> np.ndarray:
        """Distance from world points to the analytic surface of their label."""
        p = np.asarray(points, dtype=np.float64)
        labels = np.asarray(labels)
        d = np.full(len(p), np.nan)
        d[labels == ROAD] = np.abs(p[labels == ROAD, 1] - self.ground_y)
        d[labels == BUILDING] = np.abs(p[labels == BUILDING, 0] + self.wall_x)
        d[labels == WALL] = np.abs(p[labels == WALL, 0] - self.wall_x)
        return d

    def render(self, pose_z: float, noise: float = 0.0, rng: np.random.Generator | None = None) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        k = self.intrinsics
        vv, uu = np.mgrid[0 : self.height, 0 : self.width].astype(np.float64)
        rx = (uu - k.cx) / k.fx
        ry = (vv - k.cy) / k.fy
        inf = np.full(rx.shape, np.inf)
        depth = inf.copy()
        labels = np.full(rx.shape, SKY, np.uint8)
        with np.errstate(divide="ignore", invalid="ignore"):
            candidates = [
                (ROAD, np.where(ry > 0, self.ground_y / ry, np.inf), "ground"),
                (BUILDING, np.where(rx < 0, -self.wall_x / rx, np.inf), "left"),
                (WALL, np.where(rx > 0, self.wall_x / rx, np.inf), "right"),
            ]
        rgb = np.zeros(rx.shape + (3,), np.uint8)
        rgb[:] = (135, 190, 235)
        for label, t, name in candidates:
            t = np.where(np.isfinite(t), t, 1e9)
            x, y, zw = rx * t, ry * t, t + pose_z
            if name == "ground":
                ok = (t < 1e9) & (np.abs(x) <= self.wall_x) & (zw <= self.ground_end)
                a, b = x, zw
                base = np.array([110, 110, 110])
            else:
                ok = (t < 1e9) & (y >= self.wall_top) & (y <= self.ground_y) & (zw <= self.wall_end)
                a, b = y, zw
                base = np.array([170, 70, 60]) if name == "left" else np.array([60, 80, 170])
            closer = ok & (t < depth)
            depth[closer] = t[closer]
            labels[closer] = label
            checker = ((np.floor(a / self.tile) + np.floor(b / self.tile)) % 2)[..., None]
            shade = np.clip(base + checker * 30, 0, 255).astype(np.uint8)
            rgb[closer] = shade[closer]
        depth = np.where(np.isfinite(depth), depth, 0.0)
        if noise > 0:
            rng = rng or np.random.default_rng(0)
            noisy = depth + rng.normal(0.0, noise, depth.shape)
            depth = np.where((depth > 0) & (noisy > 0), noisy, 0.0)
        return rgb, depth, labels

    def frames(self, count: int = 5, step: float = 0.5, noise: float = 0.1, seed: int = 0) -> list[FrameData]:
        rng = np.random.default_rng(seed)
        out = []
        for i in range(count):
            z = i * step
            rgb, depth, labels = self.render(z, noise, rng)
            out.append(FrameData(i, rgb, depth, labels, CameraPose(np.eye(3), [0.0, 0.0, z])))
        return out


def textured_wall(width: int, height: int, depth: float, tile: int = 8) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Fronto-parallel wall at constant depth with a checker texture; one label."""
    vv, uu = np.mgrid[0:height, 0:width]
    checker = ((uu // tile + vv // tile) % 2).astype(np.uint8)
    rgb = np.stack([120 + 80 * checker, 90 + 40 * checker, 60 + 100 * checker], axis=-1).astype(np.uint8)
    return rgb, np.full((height, width), float(depth)), np.full((height, width), BUILDING, np.uint8)
