"""Raster, pose, index and config file formats."""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import cv2
import numpy as np

from .core import CameraIntrinsics, CameraPose, nearest_rotation
from .errors import FormatError, RejectedInputError
from .labels import IGNORE_LABEL, NUM_CLASSES, ROAD, SKY
from .refine import RansacParams
from .snic import SnicParams

DEFAULT_DEPTH_SCALE = 256.0
POSE_ORTHO_TOL = 1e-3


def _read_raw(path) -> np.ndarray:
    img = cv2.imread(str(path), cv2.IMREAD_UNCHANGED)
    if img is None:
        raise FormatError(f"{path}: cannot read image")
    return img


def _write_raw(path, img: np.ndarray) -> None:
    if not cv2.imwrite(str(path), img):
        raise FormatError(f"{path}: cannot write image")


def load_depth(path, depth_scale: float = DEFAULT_DEPTH_SCALE) -> tuple[np.ndarray, np.ndarray]:
    """16-bit single-channel raster to ``(depth_m, valid_mask)``; raw 0 is invalid."""
    if not depth_scale > 0:
        raise RejectedInputError("depth_scale must be > 0")
    raw = _read_raw(path)
    if raw.ndim != 2 or raw.dtype != np.uint16:
        channels = 1 if raw.ndim == 2 else raw.shape[2]
        raise FormatError(
            f"{path}: expected 16-bit single-channel depth, got {raw.dtype} with {channels} channel(s)"
        )
    valid = raw > 0
    return raw.astype(np.float64) / depth_scale, valid


def save_depth(path, depth: np.ndarray, depth_scale: float = DEFAULT_DEPTH_SCALE, mask=None) -> None:
    """Inverse of :func:`load_depth`; values are rounded to the nearest raw unit."""
    depth = np.asarray(depth, dtype=np.float64)
    raw = np.rint(depth * depth_scale)
    valid = depth > 0 if mask is None else np.asarray(mask, bool) & (depth > 0)
    raw = np.where(valid, raw, 0)
    if raw.max(initial=0) > 65535:
        raise RejectedInputError(f"depth exceeds the 16-bit range at scale {depth_scale}")
    _write_raw(path, raw.astype(np.uint16))


def load_labels(path, num_classes: int = NUM_CLASSES, ignore_label: int = IGNORE_LABEL) -> np.ndarray:
    raw = _read_raw(path)
    if raw.ndim != 2 or raw.dtype != np.uint8:
        channels = 1 if raw.ndim == 2 else raw.shape[2]
        raise FormatError(f"{path}: expected 8-bit single-channel labels, got {raw.dtype} with {channels} channel(s)")
    bad = (raw >= num_classes) & (raw != ignore_label)
    if bad.any():
        v, u = (int(x[0]) for x in np.nonzero(bad))
        raise FormatError(f"{path}: label value {int(raw[v, u])} at (u={u}, v={v}) is not < {num_classes} or {ignore_label}")
    return raw


def save_labels(path, labels: np.ndarray) -> None:
    _write_raw(path, np.asarray(labels).astype(np.uint8))


def load_rgb(path) -> np.ndarray:
    """8-bit colour image as ``(H, W, 3)`` RGB."""
    raw = _read_raw(path)
    if raw.dtype != np.uint8:
        raise FormatError(f"{path}: expected an 8-bit image, got {raw.dtype}")
    if raw.ndim == 2:
        return np.repeat(raw[:, :, None], 3, axis=2)
    if raw.shape[2] == 4:
        raw = raw[:, :, :3]
    return cv2.cvtColor(raw, cv2.COLOR_BGR2RGB)


def save_rgb(path, rgb: np.ndarray) -> None:
    _write_raw(path, cv2.cvtColor(np.asarray(rgb, dtype=np.uint8), cv2.COLOR_RGB2BGR))


def load_assignment(path) -> np.ndarray:
    raw = _read_raw(path)
    if raw.ndim != 2 or raw.dtype != np.uint16:
        raise FormatError(f"{path}: expected a 16-bit single-channel superpixel raster")
    return raw.astype(np.int32)


def save_assignment(path, assignment: np.ndarray) -> None:
    a = np.asarray(assignment)
    if a.min() < 0 or a.max() > 65535:
        raise RejectedInputError("superpixel ids must fit in 16 bits")
    _write_raw(path, a.astype(np.uint16))


def parse_pose_line(line: str, lineno: int = 0, source: str = "<poses>") -> CameraPose:
    tokens = line.split()
    if len(tokens) != 12:
        raise FormatError(f"{source}:{lineno}: expected 12 values, got {len(tokens)}")
    try:
        m = np.array([float(t) for t in tokens]).reshape(3, 4)
    except ValueError as exc:
        raise FormatError(f"{source}:{lineno}: non-numeric pose value") from exc
    r = m[:, :3]
    err = np.max(np.abs(r.T @ r - np.eye(3)))
    if not np.isfinite(err) or err > POSE_ORTHO_TOL or np.linalg.det(r) < 0:
        raise FormatError(f"{source}:{lineno}: rotation is not orthonormal (max deviation {err:.3g})")
    return CameraPose(nearest_rotation(r), m[:, 3])


def load_poses(path) -> list[CameraPose]:
    """One camera-to-world pose per line: row-major 3x4 ``[R | t]``."""
    poses = []
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        poses.append(parse_pose_line(line, lineno, str(path)))
    return poses


def save_poses(path, poses) -> None:
    lines = []
    for p in poses:
        m = np.hstack([p.rotation, p.translation[:, None]])
        lines.append(" ".join(repr(float(x)) for x in m.ravel()))
    Path(path).write_text("\n".join(lines) + "\n")


@dataclass(frozen=True)
class FrameEntry:
    frame_id: int
    rgb: Path
    depth: Path
    labels: Path


def load_index(path) -> list[FrameEntry]:
    """``frame_id rgb_path depth_path label_path`` per line; relative paths resolve against the index file."""
    path = Path(path)
    base = path.parent
    out = []
    seen = set()
    for lineno, line in enumerate(path.read_text().splitlines(), 1):
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        tokens = line.split()
        if len(tokens) != 4:
            raise FormatError(f"{path}:{lineno}: expected 'frame_id rgb depth labels', got {len(tokens)} fields")
        try:
            fid = int(tokens[0])
        except ValueError as exc:
            raise FormatError(f"{path}:{lineno}: frame id {tokens[0]!r} is not an integer") from exc
        if fid in seen:
            raise FormatError(f"{path}:{lineno}: duplicate frame id {fid}")
        seen.add(fid)
        rgb, depth, labels = (base / t for t in tokens[1:])
        out.append(FrameEntry(fid, rgb, depth, labels))
    return out


@dataclass(frozen=True)
class PipelineConfig:
    intrinsics: CameraIntrinsics
    snic: SnicParams = field(default_factory=lambda: SnicParams(400))
    epsilon: float = 0.0
    ransac: RansacParams = field(default_factory=lambda: RansacParams(rng_seed=0))
    road_class: int = ROAD
    sky_class: int = SKY
    depth_scale: float = DEFAULT_DEPTH_SCALE
    color_mode: str = "semantic"
    binary_ply: bool = False
    poses: Path | None = None
    palette: Path | None = None
    workers: int = 1

    def __post_init__(self):
        if not self.depth_scale > 0:
            raise RejectedInputError("depth_scale must be > 0")
        if self.epsilon < 0:
            raise RejectedInputError("epsilon must be >= 0")
        if self.color_mode not in ("semantic", "rgb"):
            raise RejectedInputError(f"color_mode must be 'semantic' or 'rgb', got {self.color_mode!r}")
        if self.workers < 1:
            raise RejectedInputError("workers must be >= 1")


# key -> value converter
_CONFIG_KEYS = {
    "fx": float, "fy": float, "cx": float, "cy": float,
    "k_superpixels": int, "spatial_norm": float, "color_norm": float, "semantic_penalty": float,
    "epsilon": float,
    "ransac_iterations": int, "ransac_threshold": float, "ransac_min_inliers": float, "rng_seed": int,
    "road_class": int, "sky_class": int, "depth_scale": float,
    "color_mode": str, "ply_format": str, "poses": str, "palette": str, "workers": int,
}  # fmt: skip


def parse_config_text(text: str, source: str = "<config>") -> dict[str, object]:
    values: dict[str, object] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise FormatError(f"{source}:{lineno}: expected key=value, got {raw!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in _CONFIG_KEYS:
            raise FormatError(f"{source}:{lineno}: unknown key {key!r}")
        try:
            values[key] = _CONFIG_KEYS[key](value)
        except ValueError as exc:
            raise FormatError(f"{source}:{lineno}: bad value for {key}: {value!r}") from exc
    return values


def build_config(values: dict[str, object], base_dir: Path | None = None) -> PipelineConfig:
    """Assemble a validated config from key/value pairs (file values merged with flag overrides)."""
    missing = [k for k in ("fx", "fy", "cx", "cy") if k not in values]
    if missing:
        raise FormatError(f"config is missing camera intrinsics: {', '.join(missing)}")
    v = dict(values)

    def path_of(key):
        if v.get(key) is None:
            return None
        p = Path(str(v[key]))
        return p if p.is_absolute() or base_dir is None else base_dir / p

    fmt = v.get("ply_format", "ascii")
    if fmt not in ("ascii", "binary"):
        raise FormatError(f"ply_format must be 'ascii' or 'binary', got {fmt!r}")
    try:
        return PipelineConfig(
            intrinsics=CameraIntrinsics(v["fx"], v["fy"], v["cx"], v["cy"]),
            snic=SnicParams(
                int(v.get("k_superpixels", 400)),
                v.get("spatial_norm"),
                float(v.get("color_norm", 100.0)),
                float(v.get("semantic_penalty", 10.0)),
            ),
            epsilon=float(v.get("epsilon", 0.0)),
            ransac=RansacParams(
                rng_seed=int(v.get("rng_seed", 0)),
                iterations=int(v.get("ransac_iterations", 200)),
                inlier_threshold=float(v.get("ransac_threshold", 0.15)),
                min_inliers=float(v.get("ransac_min_inliers", 0.5)),
            ),
            road_class=int(v.get("road_class", ROAD)),
            sky_class=int(v.get("sky_class", SKY)),
            depth_scale=float(v.get("depth_scale", DEFAULT_DEPTH_SCALE)),
            color_mode=str(v.get("color_mode", "semantic")),
            binary_ply=fmt == "binary",
            poses=path_of("poses"),
            palette=path_of("palette"),
            workers=int(v.get("workers", 1)),
        )
    except RejectedInputError as exc:
        raise FormatError(f"invalid config: {exc}") from exc


def load_config(path, overrides: dict[str, object] | None = None) -> PipelineConfig:
    path = Path(path)
    values = parse_config_text(path.read_text(), str(path))
    values.update({k: val for k, val in (overrides or {}).items() if val is not None})
    return build_config(values, path.parent)


def write_config(path, config: PipelineConfig) -> None:
    k = config.intrinsics
    lines = [
        f"fx={k.fx!r}", f"fy={k.fy!r}", f"cx={k.cx!r}", f"cy={k.cy!r}",
        f"k_superpixels={config.snic.k_superpixels}",
        f"color_norm={config.snic.color_norm!r}",
        f"semantic_penalty={config.snic.semantic_penalty!r}",
        f"epsilon={config.epsilon!r}",
        f"ransac_iterations={config.ransac.iterations}",
        f"ransac_threshold={config.ransac.inlier_threshold!r}",
        f"ransac_min_inliers={config.ransac.min_inliers!r}",
        f"rng_seed={config.ransac.rng_seed}",
        f"road_class={config.road_class}", f"sky_class={config.sky_class}",
        f"depth_scale={config.depth_scale!r}",
        f"color_mode={config.color_mode}",
        f"ply_format={'binary' if config.binary_ply else 'ascii'}",
        f"workers={config.workers}",
    ]  # fmt: skip
    if config.snic.spatial_norm is not None:
        lines.append(f"spatial_norm={config.snic.spatial_norm!r}")
    if config.poses is not None:
        lines.append(f"poses={config.poses}")
    if config.palette is not None:
        lines.append(f"palette={config.palette}")
    Path(path).write_text("\n".join(lines) + "\n")


def write_polygons(path, polygons, labels_by_id=None) -> None:
    """One polygon per line: ``id label u0 v0 u1 v1 ...``."""
    lines = []
    for p in polygons:
        label = IGNORE_LABEL if labels_by_id is None else int(labels_by_id[p.superpixel_id])
        coords = " ".join(f"{x:g}" for x in np.asarray(p.vertices).ravel())
        lines.append(f"{p.superpixel_id} {label} {coords}")
    Path(path).write_text("\n".join(lines) + ("\n" if lines else ""))


def read_polygons(path) -> list[tuple[int, int, np.ndarray]]:
    out = []
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        tokens = line.split()
        if not tokens:
            continue
        if len(tokens) < 8 or len(tokens) % 2:
            raise FormatError(f"{path}:{lineno}: expected 'id label' plus at least 3 vertex pairs")
        coords = np.array([float(t) for t in tokens[2:]]).reshape(-1, 2)
        out.append((int(tokens[0]), int(tokens[1]), coords))
    return out


def write_planes(path, planes) -> None:
    """One line per superpixel: ``id valid a b c``."""
    lines = [f"{p.superpixel_id} {int(p.valid)} {p.a!r} {p.b!r} {p.c!r}" for p in planes]
    Path(path).write_text("\n".join(lines) + ("\n" if lines else ""))


def write_centroids(path, partition) -> None:
    lines = ["# id pixel_count u v L a b seed_label"]
    for i, c in enumerate(partition.centroids):
        lines.append(
            f"{i} {c.pixel_count} {c.spatial[0]:.6f} {c.spatial[1]:.6f} "
            f"{c.color[0]:.6f} {c.color[1]:.6f} {c.color[2]:.6f} {c.seed_label}"
        )
    Path(path).write_text("\n".join(lines) + "\n")
