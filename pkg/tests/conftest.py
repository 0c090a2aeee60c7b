import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from polymap.core import CameraIntrinsics, srgb_to_lab  # noqa: E402


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def intrinsics():
    return CameraIntrinsics(100.0, 100.0, 50.0, 50.0)


def quadrant_scene(size=64):
    """Four equal quadrants with distinct colours and matching labels."""
    half = size // 2
    quad = np.zeros((size, size), int)
    quad[:half, half:] = 1
    quad[half:, :half] = 2
    quad[half:, half:] = 3
    colors = np.array([[200, 40, 40], [40, 200, 40], [40, 40, 200], [220, 220, 60]], np.uint8)
    labels = np.array([0, 2, 8, 13])[quad]
    return srgb_to_lab(colors[quad]), labels, quad


def smooth_random_image(rng, h, w, blobs=6):
    """Piecewise-constant colour image made of random rectangles over a gradient."""
    vv, uu = np.mgrid[0:h, 0:w]
    img = np.stack([uu * 255 // max(w - 1, 1), vv * 255 // max(h - 1, 1), np.full((h, w), 128)], -1).astype(float)
    labels = np.zeros((h, w), int)
    for i in range(blobs):
        u0, v0 = rng.integers(0, w), rng.integers(0, h)
        du, dv = rng.integers(1, max(2, w // 2)), rng.integers(1, max(2, h // 2))
        img[v0 : v0 + dv, u0 : u0 + du] = rng.integers(0, 256, 3)
        labels[v0 : v0 + dv, u0 : u0 + du] = rng.integers(0, 19)
    img += rng.normal(0, 6, img.shape)
    return srgb_to_lab(np.clip(img, 0, 255)), labels
