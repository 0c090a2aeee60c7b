"""Camera model, rigid poses and colour conversion.

Conventions used throughout the package:

* image coordinates are ``u`` = column, ``v`` = row, with the origin at the
  centre of the top-left pixel;
* the camera frame is x right, y down, z forward (pinhole, no distortion);
* poses are camera-to-world: ``p_world = R @ p_cam + t``;
* a depth value of 0 means "no measurement".

Rasters are plain ``numpy`` arrays indexed ``[v, u]`` (rows first).
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import BehindCameraError, RejectedInputError

ORTHO_TOL = 1e-9


@dataclass(frozen=True)
class CameraIntrinsics:
    fx: float
    fy: float
    cx: float
    cy: float

    def __post_init__(self):
        for name in ("fx", "fy", "cx", "cy"):
            if not np.isfinite(getattr(self, name)):
                raise RejectedInputError(f"{name} must be finite")
        if self.fx <= 0 or self.fy <= 0:
            raise RejectedInputError(f"focal lengths must be positive, got fx={self.fx}, fy={self.fy}")

    @property
    def matrix(self) -> np.ndarray:
        return np.array([[self.fx, 0.0, self.cx], [0.0, self.fy, self.cy], [0.0, 0.0, 1.0]])


@dataclass(frozen=True, eq=False)
class CameraPose:
    """Camera-to-world rigid transform."""

    rotation: np.ndarray = field(default_factory=lambda: np.eye(3))
    translation: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        r = np.array(self.rotation, dtype=np.float64).reshape(3, 3)
        t = np.array(self.translation, dtype=np.float64).reshape(3)
        if not (np.all(np.isfinite(r)) and np.all(np.isfinite(t))):
            raise RejectedInputError("pose contains non-finite values")
        if np.max(np.abs(r.T @ r - np.eye(3))) > ORTHO_TOL:
            raise RejectedInputError("rotation is not orthonormal")
        if abs(np.linalg.det(r) - 1.0) > ORTHO_TOL:
            raise RejectedInputError("rotation determinant is not +1")
        r.setflags(write=False)
        t.setflags(write=False)
        object.__setattr__(self, "rotation", r)
        object.__setattr__(self, "translation", t)

    def __eq__(self, other):
        if not isinstance(other, CameraPose):
            return NotImplemented
        return np.array_equal(self.rotation, other.rotation) and np.array_equal(
            self.translation, other.translation
        )

    __hash__ = None

    @classmethod
    def identity(cls) -> "CameraPose":
        return cls(np.eye(3), np.zeros(3))

    def inverse(self) -> "CameraPose":
        rt = self.rotation.T
        return CameraPose(rt, -rt @ self.translation)


def back_project(u, v, depth, k: CameraIntrinsics) -> np.ndarray:
    """Lift pixel(s) with metric depth into camera-frame point(s).

    Accepts scalars or broadcastable arrays; returns an array of shape
    ``(..., 3)``.
    """
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    depth = np.asarray(depth, dtype=np.float64)
    if not np.all(np.isfinite(depth)) or np.any(depth <= 0):
        raise RejectedInputError("depth must be finite and positive")
    x = (u - k.cx) * depth / k.fx
    y = (v - k.cy) * depth / k.fy
    x, y, z = np.broadcast_arrays(x, y, depth)
    return np.stack([x, y, z], axis=-1)


def project(p, k: CameraIntrinsics) -> np.ndarray:
    """Pinhole projection of camera-frame point(s) to ``(u, v, depth)``."""
    p = np.asarray(p, dtype=np.float64)
    z = p[..., 2]
    if np.any(z <= 0):
        raise BehindCameraError("point lies on or behind the image plane")
    u = k.fx * p[..., 0] / z + k.cx
    v = k.fy * p[..., 1] / z + k.cy
    return np.stack([u, v, z], axis=-1)


def transform_to_world(p, pose: CameraPose) -> np.ndarray:
    p = np.asarray(p, dtype=np.float64)
    return p @ pose.rotation.T + pose.translation


def transform_to_camera(p, pose: CameraPose) -> np.ndarray:
    p = np.asarray(p, dtype=np.float64)
    return (p - pose.translation) @ pose.rotation


def nearest_rotation(m: np.ndarray) -> np.ndarray:
    """Project a 3x3 matrix onto SO(3) (closest in Frobenius norm)."""
    u, _, vt = np.linalg.svd(np.asarray(m, dtype=np.float64))
    d = np.sign(np.linalg.det(u @ vt))
    return u @ np.diag([1.0, 1.0, d]) @ vt


# sRGB (D65) -> XYZ, IEC 61966-2-1
_RGB_TO_XYZ = np.array(
    [
        [0.4124564, 0.3575761, 0.1804375],
        [0.2126729, 0.7151522, 0.0721750],
        [0.0193339, 0.1191920, 0.9503041],
    ]
)
_D65_WHITE = np.array([0.95047, 1.00000, 1.08883])
_EPS = 216.0 / 24389.0
_KAPPA = 24389.0 / 27.0


def srgb_to_lab(rgb) -> np.ndarray:
    """Convert 8-bit sRGB values (``(..., 3)``) to CIELAB under D65."""
    c = np.asarray(rgb, dtype=np.float64) / 255.0
    if np.any(c < 0) or np.any(c > 1):
        raise RejectedInputError("RGB channels must lie in [0, 255]")
    lin = np.where(c <= 0.04045, c / 12.92, ((c + 0.055) / 1.055) ** 2.4)
    xyz = lin @ _RGB_TO_XYZ.T / _D65_WHITE
    f = np.where(xyz > _EPS, np.cbrt(xyz), (_KAPPA * xyz + 16.0) / 116.0)
    lab = np.empty_like(f)
    lab[..., 0] = 116.0 * f[..., 1] - 16.0
    lab[..., 1] = 500.0 * (f[..., 0] - f[..., 1])
    lab[..., 2] = 200.0 * (f[..., 1] - f[..., 2])
    return lab


def rgb_to_cielab(r, g, b) -> tuple[float, float, float]:
    lab = srgb_to_lab([r, g, b])
    return float(lab[0]), float(lab[1]), float(lab[2])
